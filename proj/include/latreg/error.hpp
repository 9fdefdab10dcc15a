#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace latreg {

enum class ErrorCode {
  InvalidArgument,
  InvalidTessellation,
  EmptyCellSet,
  MissingColumn,
  EmptyInput,
  TooFewUsers,
  NoSamples,
  TooFewSamples,
  KTooLarge,
  EmptyTest,
  EmptyValues,
  EmptySource,
  InfeasibleFloor,
  TooManyComponents,
  NotAdjacent,
  CellSetMismatch,
  ConstantField,
  TooFewCells,
  EmptyCell,
  InvalidScenario,
  Io,
  Config,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code so callers (and tests)
// can dispatch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The text without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace latreg
