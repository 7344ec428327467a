#include "qfeq/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

constexpr int kMaxBits = 16;

double term_sum(const std::vector<PotTerm>& terms) {
  double acc = 0.0;
  for (const auto& t : terms) acc += t.sign * std::ldexp(1.0, -t.exponent);
  return acc;
}

// Level sets (as exponent lists; empty optional == zero level) for each APoT term.
std::vector<std::vector<int>> apot_term_levels(int n, int base_bits) {
  const int m = 1 << base_bits;
  std::vector<std::vector<int>> levels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int count = (i == 0) ? m / 2 - 1 : m - 1;  // nonzero levels
    for (int k = 0; k < count; ++k) levels[static_cast<std::size_t>(i)].push_back(i + n * k);
  }
  return levels;
}

}  // namespace

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Uniform: return "uniform";
    case Scheme::Pot: return "pot";
    case Scheme::Apot: return "apot";
  }
  return "uniform";
}

Scheme parse_scheme(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (t == "uniform") return Scheme::Uniform;
  if (t == "pot") return Scheme::Pot;
  if (t == "apot") return Scheme::Apot;
  raise(ErrorClass::Config, "unknown quantization scheme '" + text + "'");
}

double uniform_quantize(double w, double a, double c, std::size_t levels) {
  require(a < c, ErrorClass::Range, "uniform quantizer needs a < c");
  require(levels >= 2, ErrorClass::Config, "uniform quantizer needs at least 2 levels");
  const double s = (c - a) / static_cast<double>(levels - 1);
  const double top = static_cast<double>(levels - 1);
  const auto level = [&](double r) { return r >= top ? c : a + r * s; };
  const double clipped = std::min(std::max(w, a), c);
  // bracket by flooring, then decide on the actual codeword distances
  const double lo = std::clamp(std::floor((clipped - a) / s), 0.0, top);
  const double hi = std::min(lo + 1.0, top);
  const double dlo = std::abs(clipped - level(lo));
  const double dhi = std::abs(clipped - level(hi));
  if (dlo < dhi) return level(lo);
  if (dhi < dlo) return level(hi);
  return std::abs(level(hi)) < std::abs(level(lo)) ? level(hi) : level(lo);
}

Codebook Codebook::uniform(double a, double c, int bits) {
  require(bits >= 1 && bits <= kMaxBits, ErrorClass::Config, "uniform codebook bits must lie in [1, 16]");
  require(a < c, ErrorClass::Range, "uniform codebook needs a < c");
  Codebook book;
  book.scheme_ = Scheme::Uniform;
  book.bits_ = bits;
  book.a_ = a;
  book.c_ = c;
  const std::size_t levels = std::size_t{1} << bits;
  book.step_ = (c - a) / static_cast<double>(levels - 1);
  book.symbols_.resize(levels);
  for (std::size_t r = 0; r < levels; ++r) book.symbols_[r] = a + static_cast<double>(r) * book.step_;
  book.symbols_.back() = c;
  return book;
}

Codebook Codebook::pot(double alpha, int bits, bool strict) {
  require(bits >= 2 && bits <= kMaxBits, ErrorClass::Config, "PoT codebook bits must lie in [2, 16]");
  require(alpha > 0.0, ErrorClass::Config, "PoT scale alpha must be positive");
  Codebook book;
  book.scheme_ = Scheme::Pot;
  book.bits_ = bits;
  book.alpha_ = alpha;
  book.strict_ = strict;
  const int half = 1 << (bits - 1);  // N/2 magnitude levels
  std::vector<std::pair<double, std::vector<PotTerm>>> entries;
  entries.push_back({0.0, {}});
  for (int k = 0; k < half; ++k) {
    entries.push_back({0.0, {PotTerm{1, k}}});
    if (strict || k < half - 1) entries.push_back({0.0, {PotTerm{-1, k}}});
  }
  book.finalize(std::move(entries));
  book.a_ = book.symbols_.front();
  book.c_ = book.symbols_.back();
  return book;
}

double apot_max_magnitude(int bits, int base_bits) {
  const int n = bits / base_bits;
  double m = 0.0;
  for (int i = 0; i < n; ++i) m += std::ldexp(1.0, -i);
  return m;
}

Codebook Codebook::apot(double gamma, double beta, int bits, int base_bits) {
  require(bits >= 2 && bits <= kMaxBits, ErrorClass::Config, "APoT codebook bits must lie in [2, 16]");
  require(base_bits >= 1, ErrorClass::Config, "APoT base bits must be >= 1");
  require(bits % base_bits == 0, ErrorClass::Config,
          "APoT bits " + std::to_string(bits) + " not divisible by base bits " + std::to_string(base_bits));
  require(gamma > 0.0, ErrorClass::Config, "APoT scale gamma must be positive");
  const int n = bits / base_bits;
  Codebook book;
  book.scheme_ = Scheme::Apot;
  book.bits_ = bits;
  book.gamma_ = gamma;
  book.beta_ = beta;
  book.base_bits_ = base_bits;

  const auto levels = apot_term_levels(n, base_bits);
  std::vector<std::vector<PotTerm>> magnitudes;
  std::vector<PotTerm> current;
  // Cartesian product over terms; index -1 selects the zero level.
  std::function<void(int)> walk = [&](int term) {
    if (term == n) {
      magnitudes.push_back(current);
      return;
    }
    walk(term + 1);
    for (int e : levels[static_cast<std::size_t>(term)]) {
      current.push_back(PotTerm{1, e});
      walk(term + 1);
      current.pop_back();
    }
  };
  walk(0);

  std::vector<std::pair<double, std::vector<PotTerm>>> entries;
  for (const auto& mag : magnitudes) {
    entries.push_back({0.0, mag});
    if (!mag.empty()) {
      auto neg = mag;
      for (auto& t : neg) t.sign = -1;
      entries.push_back({0.0, std::move(neg)});
    }
  }
  const int extra_exponent = n * ((1 << (base_bits - 1)) - 1);
  entries.push_back({0.0, {PotTerm{1, extra_exponent}}});
  book.finalize(std::move(entries));
  book.a_ = book.symbols_.front();
  book.c_ = book.symbols_.back();
  return book;
}

void Codebook::finalize(std::vector<std::pair<double, std::vector<PotTerm>>> entries) {
  const double scale = term_scale();
  const double shift = term_shift();
  for (auto& [value, terms] : entries) value = scale * term_sum(terms) + shift;
  std::stable_sort(entries.begin(), entries.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
  symbols_.clear();
  terms_.clear();
  for (auto& [value, terms] : entries) {
    if (!symbols_.empty() && symbols_.back() == value) continue;
    symbols_.push_back(value);
    terms_.push_back(std::move(terms));
  }
}

double Codebook::effective_bits() const noexcept { return std::log2(static_cast<double>(symbols_.size())); }

Quantized Codebook::quantize(double w) const {
  if (scheme_ == Scheme::Uniform) {
    const double v = uniform_quantize(w, a_, c_, symbols_.size());
    const double r = std::round((v - a_) / step_);
    return {v, static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(symbols_.size() - 1)))};
  }
  const auto it = std::lower_bound(symbols_.begin(), symbols_.end(), w);
  if (it == symbols_.begin()) return {symbols_.front(), 0};
  if (it == symbols_.end()) return {symbols_.back(), symbols_.size() - 1};
  const std::size_t hi = static_cast<std::size_t>(it - symbols_.begin());
  const std::size_t lo = hi - 1;
  const double dlo = w - symbols_[lo];
  const double dhi = symbols_[hi] - w;
  std::size_t pick;
  if (dlo < dhi) {
    pick = lo;
  } else if (dhi < dlo) {
    pick = hi;
  } else {
    pick = std::abs(symbols_[hi]) < std::abs(symbols_[lo]) ? hi : lo;
  }
  return {symbols_[pick], pick};
}

bool Codebook::contains(double w) const { return std::binary_search(symbols_.begin(), symbols_.end(), w); }

std::span<const PotTerm> Codebook::terms(std::size_t index) const {
  require(scheme_ != Scheme::Uniform, ErrorClass::Mode, "uniform codebooks have no power-of-two terms");
  return terms_.at(index);
}

int Codebook::stored_scalars() const noexcept {
  switch (scheme_) {
    case Scheme::Uniform: return 2;  // a, c
    case Scheme::Pot: return 1;      // alpha
    case Scheme::Apot: return 2;     // gamma, beta
  }
  return 0;
}

Codebook Codebook::rescaled(double scale, double shift) const {
  switch (scheme_) {
    case Scheme::Pot: return pot(scale, bits_, strict_);
    case Scheme::Apot: return apot(scale, shift, bits_, base_bits_);
    case Scheme::Uniform: break;
  }
  raise(ErrorClass::Mode, "uniform codebooks are rescaled through their range");
}

bool Codebook::operator==(const Codebook& other) const {
  return scheme_ == other.scheme_ && bits_ == other.bits_ && symbols_ == other.symbols_ &&
         base_bits_ == other.base_bits_ && strict_ == other.strict_;
}

std::pair<double, double> calibrate_range(std::span<const double> values, const RangeMode& mode) {
  if (mode.kind == RangeMode::Kind::Static) {
    require(mode.a < mode.c, ErrorClass::Range, "static range needs a < c");
    return {mode.a, mode.c};
  }
  require(!values.empty(), ErrorClass::Length, "cannot calibrate a range from no values");
  if (!mode.percentile) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {*lo, *hi};
  }
  const double p = *mode.percentile;
  require(p > 50.0 && p <= 100.0, ErrorClass::Config, "percentile must lie in (50, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double last = static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor((1.0 - p / 100.0) * last));
  const auto hi = static_cast<std::size_t>(std::ceil(p / 100.0 * last));
  return {sorted[lo], sorted[hi]};
}

}  // namespace qfeq
