#include "qfeq/binary_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

constexpr char kMagic[4] = {'Q', 'F', 'E', 'Q'};
constexpr std::size_t kHeaderSize = 10;
constexpr std::uint8_t kTagU8 = 1;
constexpr std::uint8_t kTagF64 = 2;
constexpr std::uint8_t kTagComplex = 3;

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

BinaryWriter::BinaryWriter(FileKind kind) {
  buf_.append(kMagic, 4);
  buf_.push_back(static_cast<char>(kFormatVersion));
  buf_.push_back(static_cast<char>(kind));
  put_le(buf_, 0, 4);
}

BinaryWriter& BinaryWriter::add(std::span<const std::uint8_t> values) {
  buf_.push_back(static_cast<char>(kTagU8));
  put_le(buf_, values.size(), 8);
  buf_.append(reinterpret_cast<const char*>(values.data()), values.size());
  ++arrays_;
  return *this;
}

BinaryWriter& BinaryWriter::add(std::span<const double> values) {
  buf_.push_back(static_cast<char>(kTagF64));
  put_le(buf_, values.size(), 8);
  for (double v : values) put_le(buf_, std::bit_cast<std::uint64_t>(v), 8);
  ++arrays_;
  return *this;
}

BinaryWriter& BinaryWriter::add(std::span<const cplx> values) {
  buf_.push_back(static_cast<char>(kTagComplex));
  put_le(buf_, values.size(), 8);
  for (cplx v : values) {
    put_le(buf_, std::bit_cast<std::uint64_t>(v.real()), 8);
    put_le(buf_, std::bit_cast<std::uint64_t>(v.imag()), 8);
  }
  ++arrays_;
  return *this;
}

std::string BinaryWriter::bytes() const {
  std::string out = buf_;
  for (int i = 0; i < 4; ++i) out[6 + i] = static_cast<char>((arrays_ >> (8 * i)) & 0xff);
  return out;
}

BinaryReader::BinaryReader(std::string bytes, FileKind expected) : buf_(std::move(bytes)) {
  require(buf_.size() >= kHeaderSize && std::equal(kMagic, kMagic + 4, buf_.begin()), ErrorClass::Format,
          "missing QFEQ magic");
  require(static_cast<std::uint8_t>(buf_[4]) == kFormatVersion, ErrorClass::Format,
          "unsupported format version " + std::to_string(static_cast<unsigned char>(buf_[4])));
  require(static_cast<std::uint8_t>(buf_[5]) == static_cast<std::uint8_t>(expected), ErrorClass::Format,
          "unexpected file kind");
  remaining_ = static_cast<std::uint32_t>(get_le(buf_, 6, 4));
  pos_ = kHeaderSize;
}

std::uint64_t BinaryReader::begin_array(std::uint8_t tag, std::size_t element_size) {
  require(remaining_ > 0 && pos_ + 9 <= buf_.size(), ErrorClass::Format, "truncated file: no more arrays");
  require(static_cast<std::uint8_t>(buf_[pos_]) == tag, ErrorClass::Format, "array type tag mismatch");
  const std::uint64_t count = get_le(buf_, pos_ + 1, 8);
  pos_ += 9;
  require(count <= (buf_.size() - pos_) / element_size, ErrorClass::Format, "truncated array payload");
  --remaining_;
  return count;
}

std::vector<std::uint8_t> BinaryReader::next_u8() {
  const auto n = begin_array(kTagU8, 1);
  std::vector<std::uint8_t> out(buf_.begin() + static_cast<long>(pos_), buf_.begin() + static_cast<long>(pos_ + n));
  pos_ += n;
  return out;
}

std::vector<double> BinaryReader::next_f64() {
  const auto n = begin_array(kTagF64, 8);
  std::vector<double> out(n);
  for (auto& v : out) {
    v = std::bit_cast<double>(get_le(buf_, pos_, 8));
    pos_ += 8;
  }
  return out;
}

CVec BinaryReader::next_complex() {
  const auto n = begin_array(kTagComplex, 16);
  CVec out(n);
  for (auto& v : out) {
    v = {std::bit_cast<double>(get_le(buf_, pos_, 8)), std::bit_cast<double>(get_le(buf_, pos_ + 8, 8))};
    pos_ += 16;
  }
  return out;
}

double BinaryReader::next_scalar() {
  const auto v = next_f64();
  require(v.size() == 1, ErrorClass::Format, "expected a scalar");
  return v[0];
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorClass::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    require(!ec, ErrorClass::Io, "cannot create directory " + path.parent_path().string());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorClass::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    require(static_cast<bool>(out), ErrorClass::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorClass::Io, "cannot rename onto " + path.string());
}

void write_bits(const std::filesystem::path& path, std::span<const std::uint8_t> bits) {
  write_file_atomic(path, BinaryWriter(FileKind::Bits).add(bits).bytes());
}

BitVec read_bits(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), FileKind::Bits);
  return r.next_u8();
}

void write_frame(const std::filesystem::path& path, const SymbolFrame& frame) {
  BinaryWriter w(FileKind::SymbolFrame);
  w.add(std::span<const cplx>(frame.x)).add(std::span<const cplx>(frame.y));
  write_file_atomic(path, w.bytes());
}

SymbolFrame read_frame(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), FileKind::SymbolFrame);
  SymbolFrame f;
  f.x = r.next_complex();
  f.y = r.next_complex();
  require(f.x.size() == f.y.size(), ErrorClass::Format, "polarization lengths differ");
  return f;
}

void write_field(const std::filesystem::path& path, const ComplexField& field) {
  BinaryWriter w(FileKind::Field);
  w.add_scalar(field.sample_rate).add(std::span<const cplx>(field.x)).add(std::span<const cplx>(field.y));
  write_file_atomic(path, w.bytes());
}

ComplexField read_field(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), FileKind::Field);
  ComplexField f;
  f.sample_rate = r.next_scalar();
  f.x = r.next_complex();
  f.y = r.next_complex();
  f.validate();
  return f;
}

}  // namespace qfeq
