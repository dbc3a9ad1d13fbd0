#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pudefect {

enum class ErrorKind {
  kFormat,
  kDimension,
  kValue,
  kIo,
  kEmptyClass,
  kEmptyInput,
  kInsufficientData,
  kArgument,
  kTrainingData,
  kStratification,
  kConfig,
};

std::string_view to_string(ErrorKind kind);

// Every library failure is reported through this type. `kind` survives stage
// wrapping so callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Same kind, message prefixed with "<context>: ".
  Error with_context(std::string_view context) const {
    return Error(kind_, std::string(context) + ": " + what());
  }

 private:
  ErrorKind kind_;
};

}  // namespace pudefect
