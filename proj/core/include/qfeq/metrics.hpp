#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace qfeq {

/// Hamming distance / length. Length error on mismatched inputs.
double bit_error_rate(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits);
std::size_t bit_errors(std::span<const std::uint8_t> tx_bits, std::span<const std::uint8_t> rx_bits);

/// Q_dB = 20 log10(sqrt(2) erfcinv(2 BER)) for 0 < BER < 0.5; range error otherwise.
double q_factor_db(double ber);

/// Q estimate from an error count. With zero errors the value is computed
/// from BER = 1/bits and flagged as a lower bound.
struct QEstimate {
  double db = 0.0;
  bool lower_bound = false;
};
QEstimate q_estimate(std::size_t errors, std::size_t bits);

/// Reports below this many bits are flagged low-confidence.
inline constexpr std::size_t kMinReportedBits = 100000;

/// Standard error of Q_dB implied by the binomial spread of the error count.
double q_standard_error_db(std::size_t errors, std::size_t bits);

/// Mean of a - b with a two-sided Student-t confidence interval. Paired
/// differences use the per-index spread; unpaired ones combine the spreads of
/// both samples. `floor_half_width` bounds the half width from below.
struct DifferenceCi {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;

  double lower() const noexcept { return mean - half_width; }
  double upper() const noexcept { return mean + half_width; }
};
DifferenceCi paired_difference(std::span<const double> a, std::span<const double> b, double confidence = 0.95,
                               double floor_half_width = 0.0);
DifferenceCi unpaired_difference(std::span<const double> a, std::span<const double> b, double confidence = 0.95,
                                 double floor_half_width = 0.0);

/// Two-sided Student-t quantile for n - 1 degrees of freedom (normal for n large).
double t_quantile(double confidence, std::size_t n);

}  // namespace qfeq
