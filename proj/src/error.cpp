#include "pudefect/error.hpp"

namespace pudefect {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kValue: return "value error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kEmptyClass: return "empty-class error";
    case ErrorKind::kEmptyInput: return "empty-input error";
    case ErrorKind::kInsufficientData: return "insufficient-data error";
    case ErrorKind::kArgument: return "argument error";
    case ErrorKind::kTrainingData: return "training-data error";
    case ErrorKind::kStratification: return "stratification error";
    case ErrorKind::kConfig: return "config error";
  }
  return "error";
}

}  // namespace pudefect
