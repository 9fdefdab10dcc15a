#include "latreg/error.hpp"

namespace latreg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidTessellation: return "InvalidTessellation";
    case ErrorCode::EmptyCellSet: return "EmptyCellSet";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooFewUsers: return "TooFewUsers";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyTest: return "EmptyTest";
    case ErrorCode::EmptyValues: return "EmptyValues";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::InfeasibleFloor: return "InfeasibleFloor";
    case ErrorCode::TooManyComponents: return "TooManyComponents";
    case ErrorCode::NotAdjacent: return "NotAdjacent";
    case ErrorCode::CellSetMismatch: return "CellSetMismatch";
    case ErrorCode::ConstantField: return "ConstantField";
    case ErrorCode::TooFewCells: return "TooFewCells";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace latreg
