#include "qfeq/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qfeq/errors.hpp"
#include "qfeq/fft.hpp"
#include "qfeq/rng.hpp"

namespace qfeq {
namespace {

// gray code -> amplitude level on one axis
constexpr std::array<double, 4> kGrayLevel = {-3.0, -1.0, 3.0, 1.0};  // 00, 01, 10, 11

}  // namespace

Qam16Constellation::Qam16Constellation() {
  const double norm = 1.0 / std::sqrt(10.0);
  for (std::uint8_t label = 0; label < 16; ++label) {
    points_[label] = cplx(kGrayLevel[label >> 2], kGrayLevel[label & 3]) * norm;
  }
  min_distance_ = 2.0 * norm;
}

const Qam16Constellation& Qam16Constellation::standard() {
  static const Qam16Constellation instance;
  return instance;
}

std::uint8_t Qam16Constellation::nearest(cplx z) const noexcept {
  std::uint8_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint8_t i = 0; i < 16; ++i) {
    const double d = std::norm(z - points_[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

cplx Qam16Constellation::slice(cplx z) const noexcept {
  const double norm = 1.0 / std::sqrt(10.0);
  auto axis = [norm](double v) {
    const double u = v / norm;
    const double level = u < -2.0 ? -3.0 : (u < 0.0 ? -1.0 : (u < 2.0 ? 1.0 : 3.0));
    return level * norm;
  };
  return {axis(z.real()), axis(z.imag())};
}

double ComplexField::power_mw() const noexcept {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::norm(x[i]) + std::norm(y[i]);
  return 1e3 * acc / static_cast<double>(x.size());
}

void ComplexField::validate() const {
  require(x.size() == y.size(), ErrorClass::Length, "polarization lengths differ");
  require(sample_rate > 0.0, ErrorClass::Config, "sample rate must be positive");
}

SymbolFrame map_bits_to_symbols(std::span<const std::uint8_t> bits, const Qam16Constellation& constellation) {
  require(bits.size() % (kBitsPerSymbol * kPolarizations) == 0, ErrorClass::Length,
          "bit count " + std::to_string(bits.size()) + " is not a multiple of 8");
  const std::size_t n = bits.size() / (kBitsPerSymbol * kPolarizations);
  SymbolFrame frame;
  frame.x.resize(n);
  frame.y.resize(n);
  auto label_at = [&](std::size_t offset) {
    std::uint8_t label = 0;
    for (int b = 0; b < kBitsPerSymbol; ++b) label = static_cast<std::uint8_t>((label << 1) | (bits[offset + b] & 1));
    return label;
  };
  for (std::size_t k = 0; k < n; ++k) {
    frame.x[k] = constellation.point(label_at(8 * k));
    frame.y[k] = constellation.point(label_at(8 * k + 4));
  }
  return frame;
}

BitVec demap_symbols(std::span<const cplx> symbols, const Qam16Constellation& constellation) {
  BitVec bits(symbols.size() * kBitsPerSymbol);
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const std::uint8_t label = constellation.nearest(symbols[k]);
    for (int b = 0; b < kBitsPerSymbol; ++b) bits[4 * k + b] = (label >> (3 - b)) & 1;
  }
  return bits;
}

BitVec demap_frame(const SymbolFrame& frame, const Qam16Constellation& constellation) {
  require(frame.x.size() == frame.y.size(), ErrorClass::Length, "polarization lengths differ");
  const BitVec bx = demap_symbols(frame.x, constellation);
  const BitVec by = demap_symbols(frame.y, constellation);
  BitVec bits(bx.size() + by.size());
  for (std::size_t k = 0; k < frame.length(); ++k) {
    std::copy_n(bx.begin() + 4 * k, 4, bits.begin() + 8 * k);
    std::copy_n(by.begin() + 4 * k, 4, bits.begin() + 8 * k + 4);
  }
  return bits;
}

BitVec random_bits(std::size_t count, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  BitVec bits(count);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % 64 == 0) word = rng();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1);
  }
  return bits;
}

std::vector<double> rrc_taps(double rolloff, int sps, int span_symbols) {
  require(rolloff > 0.0 && rolloff <= 1.0, ErrorClass::Config, "rolloff must lie in (0, 1]");
  require(sps >= 1, ErrorClass::Config, "samples per symbol must be positive");
  require(span_symbols > 0 && span_symbols % 2 == 1, ErrorClass::Config, "RRC span must be an odd number of symbols");
  const int len = span_symbols * sps + 1;
  const int centre = len / 2;
  const double pi = std::numbers::pi;
  const double b = rolloff;
  std::vector<double> taps(len);
  for (int k = 0; k < len; ++k) {
    const double t = static_cast<double>(k - centre) / sps;  // in symbol periods
    double h;
    if (k == centre) {
      h = 1.0 + b * (4.0 / pi - 1.0);
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
      h = b / std::sqrt(2.0) *
          ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * b)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * b)));
    } else {
      h = (std::sin(pi * t * (1.0 - b)) + 4.0 * b * t * std::cos(pi * t * (1.0 + b))) /
          (pi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t)));
    }
    taps[k] = h;
  }
  // enforce exact even symmetry before normalising
  for (int k = 0; k < centre; ++k) taps[len - 1 - k] = taps[k];
  const double energy = std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0);
  const double scale = 1.0 / std::sqrt(energy);
  for (double& v : taps) v *= scale;
  return taps;
}

CVec circular_filter(std::span<const cplx> input, std::span<const double> taps) {
  require(taps.size() % 2 == 1, ErrorClass::Config, "filter length must be odd");
  const std::size_t n = input.size();
  if (n == 0) return {};
  const std::size_t centre = taps.size() / 2;
  CVec kernel(n, cplx(0.0));
  for (std::size_t k = 0; k < taps.size(); ++k) {
    // tap k sits at lag (k - centre); wrap modulo n
    const long lag = static_cast<long>(k) - static_cast<long>(centre);
    const long idx = ((lag % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
    kernel[static_cast<std::size_t>(idx)] += taps[k];
  }
  CVec data(input.begin(), input.end());
  Fft fft(n);
  fft.forward(data);
  fft.forward(kernel);
  for (std::size_t i = 0; i < n; ++i) data[i] *= kernel[i];
  fft.inverse(data);
  return data;
}

ComplexField rrc_shape(const SymbolFrame& frame, double rolloff, int sps, int span_symbols, double symbol_rate) {
  require(sps >= 2, ErrorClass::Config, "pulse shaping needs at least 2 samples per symbol");
  require(frame.x.size() == frame.y.size(), ErrorClass::Length, "polarization lengths differ");
  require(symbol_rate > 0.0, ErrorClass::Config, "symbol rate must be positive");
  const auto taps = rrc_taps(rolloff, sps, span_symbols);
  auto shape = [&](const CVec& symbols) {
    CVec up(symbols.size() * static_cast<std::size_t>(sps), cplx(0.0));
    for (std::size_t k = 0; k < symbols.size(); ++k) up[k * sps] = symbols[k];
    return circular_filter(up, taps);
  };
  ComplexField field;
  field.x = shape(frame.x);
  field.y = shape(frame.y);
  field.sample_rate = symbol_rate * sps;
  return field;
}

ComplexField set_power(ComplexField field, double power_mw) {
  const double current = field.power_mw();
  require(current > 0.0, ErrorClass::Range, "cannot rescale a zero-power field");
  const double scale = std::sqrt(power_mw / current);
  for (auto& v : field.x) v *= scale;
  for (auto& v : field.y) v *= scale;
  return field;
}

double dbm_to_mw(double dbm) noexcept { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) noexcept { return 10.0 * std::log10(mw); }

}  // namespace qfeq
