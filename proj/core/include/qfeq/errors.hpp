#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qfeq {

/// Diagnostic class carried by every library error. The CLI maps each class
/// to a distinct nonzero exit code.
enum class ErrorClass {
  Length = 1,
  Config,
  Shape,
  Range,
  Mode,
  State,
  Sync,
  Training,
  Pairing,
  Overflow,
  Io,
  Format,
  Prerequisite,
  NoData,
};

std::string_view to_string(ErrorClass cls) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}

  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

[[noreturn]] void raise(ErrorClass cls, const std::string& what);

inline void require(bool condition, ErrorClass cls, const std::string& what) {
  if (!condition) raise(cls, what);
}

}  // namespace qfeq
