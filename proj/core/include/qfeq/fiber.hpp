#pragma once

#include <cstdint>
#include <optional>

#include "qfeq/signal.hpp"

namespace qfeq {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;     // J s

/// Fiber parameters in the units engineers quote them in.
struct FiberParams {
  double loss_db_per_km = 0.23;
  double dispersion_ps_per_nm_km = 2.8;
  double gamma_per_w_km = 2.5;
  double length_km = 50.0;
  double center_wavelength_um = 1.55;

  /// Group-velocity dispersion, s^2/km. beta2 = -D lambda^2 / (2 pi c).
  double beta2_s2_per_km() const noexcept;
  /// Power attenuation coefficient, 1/km.
  double alpha_per_km() const noexcept;
  void validate() const;
};

struct LinkConfig {
  int spans = 9;
  FiberParams fiber;
  /// Defaults to exact span-loss compensation.
  std::optional<double> edfa_gain_db;
  double edfa_nf_db = 5.0;
  double step_km = 0.1;
  int oversampling = 8;
  /// Laser linewidth applied at TX and at the RX local oscillator; 0 disables.
  double laser_linewidth_hz = 100e3;
  /// Signal-to-noise ratio of the transceiver noise floor (TX/RX electronics),
  /// measured in the signal bandwidth. Unset disables it.
  std::optional<double> transceiver_snr_db;

  double span_loss_db() const noexcept { return fiber.loss_db_per_km * fiber.length_km; }
  double gain_db() const noexcept { return edfa_gain_db.value_or(span_loss_db()); }
  double total_dispersion_ps_per_nm() const noexcept {
    return fiber.dispersion_ps_per_nm_km * fiber.length_km * spans;
  }
  void validate() const;
};

/// Symmetric split-step Fourier integration of the Manakov equation over one
/// fiber span: half linear step, full nonlinear step, half linear step. The
/// nonlinear step rotates both polarizations by (8/9) gamma (|x|^2+|y|^2) h.
ComplexField propagate_span(const ComplexField& field, const FiberParams& fiber, double step_km);

/// Power one-sided ASE spectral density per polarization, W/Hz.
double ase_psd_per_pol(double gain_db, double nf_db, double wavelength_um = 1.55) noexcept;

/// Amplify by gain_db and add circular Gaussian ASE over the full simulation
/// bandwidth. Deterministic for a given seed.
ComplexField edfa_amplify(const ComplexField& field, double gain_db, double nf_db, std::uint64_t seed,
                          double wavelength_um = 1.55);

/// spans x (propagate_span, edfa_amplify). Span s uses seed derive_seed(seed, {edfa, s}).
ComplexField transmit_link(const ComplexField& field, const LinkConfig& link, std::uint64_t seed);

/// Wiener phase walk with variance 2 pi linewidth / sample_rate per sample,
/// common to both polarizations (one laser).
ComplexField apply_laser_phase_noise(const ComplexField& field, double linewidth_hz, std::uint64_t seed);

/// Add white circular Gaussian noise so that the in-band SNR (over
/// signal_bandwidth_hz) equals snr_db.
ComplexField add_awgn(const ComplexField& field, double snr_db, double signal_bandwidth_hz, std::uint64_t seed);

}  // namespace qfeq
