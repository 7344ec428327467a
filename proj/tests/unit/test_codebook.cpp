#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "qfeq/codebook.hpp"
#include "qfeq/errors.hpp"

using namespace qfeq;

namespace {

ErrorClass class_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.error_class();
  }
  return static_cast<ErrorClass>(0);
}

double brute_uniform(double w, double a, double c, std::size_t n) {
  const double s = (c - a) / static_cast<double>(n - 1);
  const double x = std::clamp(w, a, c);
  double best = a;
  for (std::size_t r = 0; r < n; ++r) {
    const double v = r + 1 == n ? c : a + static_cast<double>(r) * s;
    const double d = std::abs(x - v);
    const double db = std::abs(x - best);
    if (d < db || (d == db && std::abs(v) < std::abs(best))) best = v;
  }
  return best;
}

// APoT symbols as integers scaled by 2^top, enumerated term by term:
// term i is 0 or 2^-(i + n k), term 0 with 2^(b0-1) - 1 nonzero levels and
// the others with 2^b0 - 1; the signed set gains one extra positive level.
std::set<long long> apot_oracle(int b, int b0) {
  const int n = b / b0;
  const int top = n * (1 << b0) + 1;
  std::vector<std::vector<long long>> terms(n);
  for (int i = 0; i < n; ++i) {
    terms[i].push_back(0);
    const int count = i == 0 ? (1 << (b0 - 1)) - 1 : (1 << b0) - 1;
    for (int k = 0; k < count; ++k) terms[i].push_back(1LL << (top - (i + n * k)));
  }
  std::set<long long> mags = {0};
  for (int i = 0; i < n; ++i) {
    std::set<long long> next;
    for (long long m : mags)
      for (long long t : terms[i]) next.insert(m + t);
    mags = std::move(next);
  }
  std::set<long long> out;
  for (long long m : mags) {
    out.insert(m);
    out.insert(-m);
  }
  out.insert(1LL << (top - n * ((1 << (b0 - 1)) - 1)));
  return out;
}

std::set<double> to_values(const std::set<long long>& ints, int b, int b0) {
  const int top = (b / b0) * (1 << b0) + 1;
  std::set<double> out;
  for (long long v : ints) out.insert(std::ldexp(static_cast<double>(v), -top));
  return out;
}

std::set<double> book_set(const Codebook& book) { return {book.symbols().begin(), book.symbols().end()}; }

}  // namespace

TEST(Uniform, WorkedExample) { EXPECT_DOUBLE_EQ(uniform_quantize(0.3, -1.0, 1.0, 5), 0.5); }

TEST(Uniform, EndpointsAndClippingAreExact) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng);
    double c = u(rng);
    if (a == c) continue;
    if (a > c) std::swap(a, c);
    const std::size_t n = 2 + static_cast<std::size_t>(i % 300);
    EXPECT_EQ(uniform_quantize(a, a, c, n), a);
    EXPECT_EQ(uniform_quantize(c, a, c, n), c);
    EXPECT_EQ(uniform_quantize(c + 100.0, a, c, n), c);
    EXPECT_EQ(uniform_quantize(a - 100.0, a, c, n), a);
  }
}

TEST(Uniform, MatchesBruteForceNearestCodeword) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 20000; ++i) {
    double a = u(rng);
    double c = u(rng);
    if (a == c) continue;
    if (a > c) std::swap(a, c);
    const std::size_t n = 2 + static_cast<std::size_t>(rng() % 255);
    const double w = u(rng) * 1.5;
    const double q = uniform_quantize(w, a, c, n);
    ASSERT_EQ(q, brute_uniform(w, a, c, n)) << w << " " << a << " " << c << " " << n;
    const double s = (c - a) / static_cast<double>(n - 1);
    if (w >= a && w <= c) ASSERT_LE(std::abs(q - w), 0.5 * s * (1.0 + 1e-12));
  }
}

TEST(Uniform, ProjectionIsNonExpansiveUpToOneStep) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double a = -1.3;
  const double c = 0.9;
  const std::size_t n = 16;
  const double s = (c - a) / 15.0;
  for (int i = 0; i < 10000; ++i) {
    const double w1 = u(rng);
    const double w2 = u(rng);
    EXPECT_LE(std::abs(uniform_quantize(w1, a, c, n) - uniform_quantize(w2, a, c, n)),
              std::abs(w1 - w2) + s + 1e-12);
  }
}

TEST(Uniform, ExactTieGoesToSmallerMagnitude) {
  // a = -1, c = 1, N = 5: 0.25 lies halfway between 0 and 0.5
  EXPECT_EQ(uniform_quantize(0.25, -1.0, 1.0, 5), 0.0);
  EXPECT_EQ(uniform_quantize(-0.25, -1.0, 1.0, 5), 0.0);
  EXPECT_EQ(uniform_quantize(0.75, -1.0, 1.0, 5), 0.5);
}

TEST(Uniform, ErrorsOnDegenerateRangeAndLevels) {
  EXPECT_EQ(class_of([] { uniform_quantize(0.0, 1.0, 1.0, 4); }), ErrorClass::Range);
  EXPECT_EQ(class_of([] { uniform_quantize(0.0, 1.0, -1.0, 4); }), ErrorClass::Range);
  EXPECT_EQ(class_of([] { uniform_quantize(0.0, -1.0, 1.0, 1); }), ErrorClass::Config);
  EXPECT_EQ(class_of([] { Codebook::uniform(1.0, 1.0, 4); }), ErrorClass::Range);
}

TEST(UniformBook, ConstantSpacingAndAgreementWithQuantizer) {
  const Codebook book = Codebook::uniform(-0.7, 1.1, 5);
  ASSERT_EQ(book.size(), 32u);
  for (std::size_t i = 1; i < book.size(); ++i)
    EXPECT_NEAR(book.symbols()[i] - book.symbols()[i - 1], book.step(), 1e-12);
  for (int i = 0; i <= 10000; ++i) {
    const double w = (-0.7 - 1.0) + (1.8 + 2.0) * i / 10000.0;
    const Quantized q = book.quantize(w);
    ASSERT_EQ(q.value, uniform_quantize(w, -0.7, 1.1, 32)) << w;
    ASSERT_EQ(book.symbols()[q.index], q.value);
  }
}

TEST(PotBook, ThreeBitExample) {
  const Codebook book = Codebook::pot(1.0, 3);
  const std::set<double> expect = {-1.0, -0.5, -0.25, 0.0, 0.125, 0.25, 0.5, 1.0};
  EXPECT_EQ(book_set(book), expect);
  EXPECT_EQ(book.size(), 8u);
  EXPECT_EQ(book.quantize(0.3).value, 0.25);
  EXPECT_EQ(book.effective_bits(), 3.0);

  const Codebook strict = Codebook::pot(1.0, 3, true);
  EXPECT_EQ(strict.size(), 9u);
  EXPECT_TRUE(strict.contains(-0.125));
}

TEST(PotBook, ScaleDoublesEverySymbol) {
  const Codebook one = Codebook::pot(1.0, 4);
  const Codebook two = Codebook::pot(2.0, 4);
  ASSERT_EQ(one.size(), two.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(two.symbols()[i], 2.0 * one.symbols()[i]);
}

TEST(PotBook, DenserNearZeroThanUniform) {
  for (int b = 4; b <= 8; ++b) {
    const Codebook pot = Codebook::pot(1.0, b);
    const Codebook uni = Codebook::uniform(pot.a(), pot.c(), b);
    const double r = (pot.c() - pot.a()) / 8.0;
    auto near_zero = [&](const Codebook& book) {
      return std::count_if(book.symbols().begin(), book.symbols().end(), [&](double v) { return std::abs(v) < r; });
    };
    EXPECT_GT(near_zero(pot), near_zero(uni)) << b;
  }
}

TEST(PotBook, BitsBelowTwoIsConfigError) {
  EXPECT_EQ(class_of([] { Codebook::pot(1.0, 1); }), ErrorClass::Config);
}

TEST(ApotBook, ExhaustiveEnumerationHasExactlyTwoToTheBSymbols) {
  for (auto [b, b0] : std::vector<std::pair<int, int>>{{4, 2}, {6, 2}, {6, 3}, {8, 2}, {8, 4}, {4, 1}, {9, 3}, {12, 4}}) {
    const auto oracle = apot_oracle(b, b0);
    EXPECT_EQ(oracle.size(), std::size_t{1} << b) << b << "/" << b0;
    const Codebook book = Codebook::apot(1.0, 0.0, b, b0);
    EXPECT_EQ(book.size(), std::size_t{1} << b);
    EXPECT_EQ(book_set(book), to_values(oracle, b, b0)) << b << "/" << b0;
    EXPECT_EQ(book.effective_bits(), static_cast<double>(b));
  }
}

TEST(ApotBook, SingleTermDegeneratesToPot) {
  for (int b = 2; b <= 10; ++b)
    EXPECT_EQ(book_set(Codebook::apot(1.0, 0.0, b, b)), book_set(Codebook::pot(1.0, b))) << b;
  EXPECT_EQ(book_set(Codebook::apot(0.3, 0.0, 5, 5)), book_set(Codebook::pot(0.3, 5)));
}

TEST(ApotBook, ShiftAndScaleAreAffine) {
  const Codebook base = Codebook::apot(1.0, 0.0, 6, 2);
  const Codebook moved = Codebook::apot(2.0, 0.5, 6, 2);
  ASSERT_EQ(base.size(), moved.size());
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_DOUBLE_EQ(moved.symbols()[i], 2.0 * base.symbols()[i] + 0.5);
}

TEST(ApotBook, IndivisibleBitsAreConfigError) {
  EXPECT_EQ(class_of([] { Codebook::apot(1.0, 0.0, 7, 2); }), ErrorClass::Config);
}

TEST(ApotBook, TermsReconstructEverySymbol) {
  const Codebook book = Codebook::apot(0.7, -0.1, 8, 2);
  for (std::size_t i = 0; i < book.size(); ++i) {
    double acc = 0.0;
    for (const auto& t : book.terms(i)) acc += t.sign * std::ldexp(1.0, -t.exponent);
    EXPECT_NEAR(book.term_scale() * acc + book.term_shift(), book.symbols()[i], 1e-15);
  }
  EXPECT_EQ(class_of([] { Codebook::uniform(-1, 1, 4).terms(0); }), ErrorClass::Mode);
}

TEST(Quantize, NearestSymbolAndTies) {
  const Codebook book = Codebook::pot(1.0, 4);
  for (double s : book.symbols()) {
    const Quantized q = book.quantize(s);
    EXPECT_EQ(q.value, s);
    EXPECT_EQ(book.symbols()[q.index], s);
  }
  // midpoint of two adjacent symbols resolves toward the smaller magnitude
  for (std::size_t i = 1; i < book.size(); ++i) {
    const double lo = book.symbols()[i - 1];
    const double hi = book.symbols()[i];
    const double mid = 0.5 * (lo + hi);
    EXPECT_EQ(book.quantize(mid).value, std::abs(lo) < std::abs(hi) ? lo : hi);
  }
}

TEST(Quantize, OutputsAreAlwaysMembers) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::vector<Codebook> books = {Codebook::uniform(-0.8, 1.3, 6), Codebook::pot(0.9, 5),
                                       Codebook::apot(0.6, 0.1, 8, 2), Codebook::apot(1.2, 0.0, 6, 3)};
  for (const auto& book : books)
    for (int i = 0; i < 20000; ++i) {
      const double w = 2.0 * g(rng);
      const Quantized q = book.quantize(w);
      ASSERT_TRUE(book.contains(q.value));
      // brute force nearest (distance only)
      double best = 1e300;
      for (double s : book.symbols()) best = std::min(best, std::abs(w - s));
      ASSERT_EQ(std::abs(w - q.value), best);
    }
}

TEST(Calibrate, StaticDynamicPercentile) {
  const std::vector<double> v = {-0.2, 0.7};
  EXPECT_EQ(calibrate_range(v, RangeMode::fixed(-1.0, 1.0)), std::make_pair(-1.0, 1.0));
  EXPECT_EQ(calibrate_range(v, RangeMode::dynamic()), std::make_pair(-0.2, 0.7));

  std::mt19937_64 rng(5);
  std::student_t_distribution<double> heavy(1.5);
  std::vector<double> sample(10000);
  for (auto& x : sample) x = heavy(rng);
  const auto [lo, hi] = calibrate_range(sample, RangeMode::dynamic(99.9));
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_GT(lo, sorted.front());
  EXPECT_LT(hi, sorted.back());
  // order statistics around the 0.1 % / 99.9 % ranks
  EXPECT_GE(lo, sorted[8]);
  EXPECT_LE(lo, sorted[11]);
  EXPECT_GE(hi, sorted[9988]);
  EXPECT_LE(hi, sorted[9991]);
}

TEST(Calibrate, EmptyInputIsLengthError) {
  EXPECT_EQ(class_of([] { calibrate_range(std::vector<double>{}, RangeMode::dynamic()); }), ErrorClass::Length);
}
