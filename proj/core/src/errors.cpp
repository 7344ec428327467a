#include "qfeq/errors.hpp"

namespace qfeq {

std::string_view to_string(ErrorClass cls) noexcept {
  switch (cls) {
    case ErrorClass::Length: return "length";
    case ErrorClass::Config: return "config";
    case ErrorClass::Shape: return "shape";
    case ErrorClass::Range: return "range";
    case ErrorClass::Mode: return "mode";
    case ErrorClass::State: return "state";
    case ErrorClass::Sync: return "sync";
    case ErrorClass::Training: return "training";
    case ErrorClass::Pairing: return "pairing";
    case ErrorClass::Overflow: return "overflow";
    case ErrorClass::Io: return "io";
    case ErrorClass::Format: return "format";
    case ErrorClass::Prerequisite: return "missing prerequisite";
    case ErrorClass::NoData: return "no data";
  }
  return "unknown";
}

void raise(ErrorClass cls, const std::string& what) {
  throw Error(cls, std::string(to_string(cls)) + " error: " + what);
}

}  // namespace qfeq
