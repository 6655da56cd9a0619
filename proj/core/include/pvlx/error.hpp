#pragma once

#include <stdexcept>
#include <string>

namespace pvlx {

enum class ErrorKind {
  InvalidArgument,
  InvalidCoordinate,
  Range,
  InsufficientData,
  EmptyDistribution,
  EmptySummary,
  UndefinedExposure,
  Degenerate,
  PipelineOrder,
  EmptyStratum,
  Config,
  Io,
  NonConvergence,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library-wide exception. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pvlx
