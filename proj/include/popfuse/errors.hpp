#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace popfuse {

enum class ErrorKind {
  InvalidArgument,
  GridMismatch,
  NotNormalized,
  DegenerateSelection,
  EmptyInput,
  Infeasible,
  NotConverged,
  EmptySample,
  InsufficientUsers,
  Io,
  Parse,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace popfuse
