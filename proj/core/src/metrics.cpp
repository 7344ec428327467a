#include "qfeq/metrics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numeric>

#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

std::size_t bit_errors(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits) {
  require(tx_bits.size() == rx_bits.size(), ErrorClass::Length, "bit sequences differ in length");
  std::size_t e = 0;
  for (std::size_t i = 0; i < tx_bits.size(); ++i) e += (tx_bits[i] != 0) != (rx_bits[i] != 0) ? 1 : 0;
  return e;
}

double bit_error_rate(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits) {
  const std::size_t e = bit_errors(tx_bits, rx_bits);
  require(!tx_bits.empty(), ErrorClass::Length, "bit error rate of an empty sequence");
  return static_cast<double>(e) / static_cast<double>(tx_bits.size());
}

double q_factor_db(double ber) {
  require(ber > 0.0 && ber < 0.5, ErrorClass::Range, "Q-factor needs 0 < BER < 0.5");
  return 20.0 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber));
}

QEstimate q_estimate(std::size_t errors, std::size_t bits) {
  require(bits > 0, ErrorClass::Length, "Q estimate from zero bits");
  require(2 * errors < bits, ErrorClass::Range, "BER at or above 0.5 has no Q-factor");
  if (errors == 0) return {q_factor_db(1.0 / static_cast<double>(bits)), true};
  return {q_factor_db(static_cast<double>(errors) / static_cast<double>(bits)), false};
}

double q_standard_error_db(std::size_t errors, std::size_t bits) {
  require(bits > 0, ErrorClass::Length, "Q standard error from zero bits");
  const double n = static_cast<double>(bits);
  const double p = std::max(static_cast<double>(errors), 1.0) / n;
  const double sd = std::sqrt(p * (1.0 - p) / n);
  const double lo = std::max(p - sd, 0.5 / n);
  const double hi = std::min(p + sd, 0.5 - 1e-12);
  return 0.5 * (q_factor_db(lo) - q_factor_db(hi));
}

double t_quantile(double confidence, std::size_t n) {
  require(confidence > 0.0 && confidence < 1.0, ErrorClass::Config, "confidence must lie in (0, 1)");
  const double p = 0.5 + confidence / 2.0;
  if (n < 2) return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  return boost::math::quantile(boost::math::students_t_distribution<double>(static_cast<double>(n - 1)), p);
}

DifferenceCi paired_difference(std::span<const double> a, std::span<const double> b, double confidence,
                               double floor_half_width) {
  require(a.size() == b.size() && !a.empty(), ErrorClass::Pairing, "paired samples must be nonempty and equal length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  DifferenceCi ci;
  ci.n = d.size();
  ci.mean = mean_of(d);
  const double hw = d.size() > 1 ? t_quantile(confidence, d.size()) * std::sqrt(variance_of(d) / static_cast<double>(d.size())) : 0.0;
  ci.half_width = std::max(hw, floor_half_width);
  return ci;
}

DifferenceCi unpaired_difference(std::span<const double> a, std::span<const double> b, double confidence,
                                 double floor_half_width) {
  require(!a.empty() && !b.empty(), ErrorClass::Length, "difference of empty samples");
  DifferenceCi ci;
  ci.n = std::min(a.size(), b.size());
  ci.mean = mean_of(a) - mean_of(b);
  const double se = std::sqrt(variance_of(a) / static_cast<double>(a.size()) + variance_of(b) / static_cast<double>(b.size()));
  ci.half_width = std::max(t_quantile(confidence, ci.n) * se, floor_half_width);
  return ci;
}

}  // namespace qfeq
