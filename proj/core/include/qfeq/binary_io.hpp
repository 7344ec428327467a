#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qfeq/signal.hpp"

namespace qfeq {

/// Flat little-endian container used for bits, symbol frames, fields and
/// datasets. Layout (see docs/FORMATS.md):
///
///   "QFEQ" | u8 version | u8 kind | u32 array count
///   per array: u8 type tag | u64 element count | payload
///
/// Type tags: 1 = u8, 2 = f64 (IEEE-754 binary64), 3 = complex (re, im f64 pairs).
enum class FileKind : std::uint8_t { Bits = 1, SymbolFrame = 2, Field = 3, Dataset = 4 };

inline constexpr std::uint8_t kFormatVersion = 1;

class BinaryWriter {
 public:
  explicit BinaryWriter(FileKind kind);

  BinaryWriter& add(std::span<const std::uint8_t> values);
  BinaryWriter& add(std::span<const double> values);
  BinaryWriter& add(std::span<const cplx> values);
  BinaryWriter& add_scalar(double value) { return add(std::span<const double>(&value, 1)); }

  /// Serialized bytes; the array count in the header is patched on each call.
  std::string bytes() const;

 private:
  std::string buf_;
  std::uint32_t arrays_ = 0;
};

class BinaryReader {
 public:
  BinaryReader(std::string bytes, FileKind expected);

  std::vector<std::uint8_t> next_u8();
  std::vector<double> next_f64();
  CVec next_complex();
  double next_scalar();
  bool done() const noexcept { return pos_ == buf_.size(); }

 private:
  std::uint64_t begin_array(std::uint8_t tag, std::size_t element_size);

  std::string buf_;
  std::size_t pos_ = 0;
  std::uint32_t remaining_ = 0;
};

std::string read_file(const std::filesystem::path& path);
/// Write to a temporary sibling then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

void write_bits(const std::filesystem::path& path, std::span<const std::uint8_t> bits);
BitVec read_bits(const std::filesystem::path& path);
void write_frame(const std::filesystem::path& path, const SymbolFrame& frame);
SymbolFrame read_frame(const std::filesystem::path& path);
void write_field(const std::filesystem::path& path, const ComplexField& field);
ComplexField read_field(const std::filesystem::path& path);

}  // namespace qfeq
