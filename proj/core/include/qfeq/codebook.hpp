#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qfeq {

enum class Scheme : std::uint8_t { Uniform, Pot, Apot };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& text);

/// One power-of-two term of a PoT/APoT symbol: sign * 2^-exponent.
struct PotTerm {
  int sign = 1;
  int exponent = 0;
};

struct Quantized {
  double value = 0.0;
  std::size_t index = 0;
};

/// Uniform quantizer over [a, c] with N levels:
///   s = (c - a)/(N - 1),  r = round((clip(w, a, c) - a)/s),  w_hat = a + r s.
/// Exact ties go to the level of smaller magnitude (then smaller r).
/// Throws a range error when a >= c and a config error when N < 2.
double uniform_quantize(double w, double a, double c, std::size_t levels);

/// Immutable quantization codebook. Symbols are sorted and distinct.
///
/// Uniform: 2^b levels a + r s, r = 0 .. 2^b - 1.
///
/// PoT: alpha * {0, +-2^0, +-2^-1, ..., +-2^-(N/2-1)} with N = 2^b. That set
/// has N + 1 members; unless `strict` is set, the symbol -alpha 2^-(N/2-1) is
/// dropped so that exactly N remain and every symbol has a b-bit index.
///
/// APoT with base bits b0 and n = b/b0 terms: each magnitude is a sum of n
/// power-of-two terms, term i contributing 2^-i times an element of the base
/// level set raised elementwise to the n-th power, i.e. term i is one of
/// {0, 2^-i, 2^-(i+n), 2^-(i+2n), ...}. The interleaved exponents make every
/// sum distinct. Term 0 carries 2^(b0-1) levels and the others 2^b0, which
/// gives 2^(b-1) magnitudes; the signed set plus the one extra positive level
/// 2^-(n (2^(b0-1) - 1)) holds exactly 2^b symbols, and reduces to the PoT
/// book when n = 1. Symbols are gamma * sign * magnitude + beta.
class Codebook {
 public:
  static Codebook uniform(double a, double c, int bits);
  static Codebook pot(double alpha, int bits, bool strict = false);
  static Codebook apot(double gamma, double beta, int bits, int base_bits);

  Scheme scheme() const noexcept { return scheme_; }
  int bits() const noexcept { return bits_; }
  double a() const noexcept { return a_; }
  double c() const noexcept { return c_; }
  double alpha() const noexcept { return alpha_; }
  double gamma() const noexcept { return gamma_; }
  double beta() const noexcept { return beta_; }
  int base_bits() const noexcept { return base_bits_; }
  bool strict() const noexcept { return strict_; }

  std::span<const double> symbols() const noexcept { return symbols_; }
  std::size_t size() const noexcept { return symbols_.size(); }
  /// log2 of the distinct symbol count; below bits() when levels underflowed.
  double effective_bits() const noexcept;
  /// Uniform spacing s(a, c, N); zero for non-uniform books.
  double step() const noexcept { return step_; }

  /// Nearest symbol; ties go to the smaller magnitude, then the smaller index.
  Quantized quantize(double w) const;
  bool contains(double w) const;

  /// Shift-add decomposition: symbol = term_scale * sum(sign 2^-e) + term_shift.
  /// Only available for PoT/APoT books.
  std::span<const PotTerm> terms(std::size_t index) const;
  double term_scale() const noexcept { return scheme_ == Scheme::Pot ? alpha_ : gamma_; }
  double term_shift() const noexcept { return scheme_ == Scheme::Apot ? beta_ : 0.0; }
  /// Number of 32-bit scalars stored alongside the indices.
  int stored_scalars() const noexcept;

  /// Same book with a new scale/shift (APoT gamma/beta, PoT alpha). Used by
  /// training-aware quantization when the scale parameters are learned.
  Codebook rescaled(double scale, double shift) const;

  bool operator==(const Codebook& other) const;

 private:
  Codebook() = default;
  void finalize(std::vector<std::pair<double, std::vector<PotTerm>>> entries);

  Scheme scheme_ = Scheme::Uniform;
  int bits_ = 0;
  double a_ = 0.0;
  double c_ = 0.0;
  double alpha_ = 1.0;
  double gamma_ = 1.0;
  double beta_ = 0.0;
  int base_bits_ = 0;
  bool strict_ = false;
  double step_ = 0.0;
  std::vector<double> symbols_;
  std::vector<std::vector<PotTerm>> terms_;
};

/// Normalized (scale 1, shift 0) APoT magnitude patterns; exposed for tests.
double apot_max_magnitude(int bits, int base_bits);

struct RangeMode {
  enum class Kind : std::uint8_t { Static, Dynamic };
  Kind kind = Kind::Dynamic;
  double a = -1.0;
  double c = 1.0;
  /// Dynamic mode only: clip to the [100 - p, p] percentiles instead of min/max.
  std::optional<double> percentile;

  static RangeMode fixed(double a, double c) { return {Kind::Static, a, c, std::nullopt}; }
  static RangeMode dynamic(std::optional<double> pct = std::nullopt) { return {Kind::Dynamic, 0.0, 0.0, pct}; }
};

/// (a, c) for one network component.
std::pair<double, double> calibrate_range(std::span<const double> values, const RangeMode& mode);

}  // namespace qfeq
