#include "qfeq/fiber.hpp"

#include <cmath>
#include <numbers>

#include "qfeq/errors.hpp"
#include "qfeq/fft.hpp"
#include "qfeq/rng.hpp"

namespace qfeq {
namespace {

constexpr double kManakov = 8.0 / 9.0;

void nonlinear_step(ComplexField& f, double gamma, double h) {
  const double k = kManakov * gamma * h;
  for (std::size_t i = 0; i < f.x.size(); ++i) {
    const double p = std::norm(f.x[i]) + std::norm(f.y[i]);
    const cplx rot = std::polar(1.0, k * p);
    f.x[i] *= rot;
    f.y[i] *= rot;
  }
}

CVec linear_response(std::size_t n, double sample_rate, const FiberParams& fiber, double h) {
  const double beta2 = fiber.beta2_s2_per_km();
  const double half_alpha = 0.5 * fiber.alpha_per_km();
  CVec response(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = bin_angular_frequency(k, n, sample_rate);
    response[k] = std::exp(cplx(-half_alpha * h, 0.5 * beta2 * w * w * h));
  }
  return response;
}

void apply_response(Fft& fft, CVec& data, const CVec& response) {
  fft.forward(data);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] *= response[i];
  fft.inverse(data);
}

}  // namespace

double FiberParams::beta2_s2_per_km() const noexcept {
  const double lambda = center_wavelength_um * 1e-6;                  // m
  const double d = dispersion_ps_per_nm_km * 1e-12 / (1e-9 * 1e3);     // s/m^2
  const double beta2_per_m = -d * lambda * lambda / (2.0 * std::numbers::pi * kSpeedOfLight);
  return beta2_per_m * 1e3;
}

double FiberParams::alpha_per_km() const noexcept { return loss_db_per_km * std::log(10.0) / 10.0; }

void FiberParams::validate() const {
  require(loss_db_per_km >= 0.0, ErrorClass::Config, "fiber.loss_db_per_km must be >= 0");
  require(length_km > 0.0, ErrorClass::Config, "fiber.length_km must be > 0");
  require(gamma_per_w_km >= 0.0, ErrorClass::Config, "fiber.gamma_per_w_km must be >= 0");
  require(center_wavelength_um > 0.0, ErrorClass::Config, "fiber.center_wavelength_um must be > 0");
}

void LinkConfig::validate() const {
  fiber.validate();
  require(spans >= 0, ErrorClass::Config, "link.spans must be >= 0");
  require(step_km > 0.0, ErrorClass::Config, "link.step_km must be > 0");
  require(oversampling >= 2, ErrorClass::Config, "link.oversampling must be >= 2");
  require(gain_db() >= 0.0, ErrorClass::Config, "link.edfa_gain_db must be >= 0");
  require(laser_linewidth_hz >= 0.0, ErrorClass::Config, "link.laser_linewidth_hz must be >= 0");
}

ComplexField propagate_span(const ComplexField& field, const FiberParams& fiber, double step_km) {
  require(step_km > 0.0, ErrorClass::Config, "split-step size must be positive");
  fiber.validate();
  field.validate();
  ComplexField f = field;
  const std::size_t n = f.length();
  if (n == 0) return f;

  const int steps = std::max(1, static_cast<int>(std::ceil(fiber.length_km / step_km - 1e-9)));
  const double h = fiber.length_km / steps;
  const CVec half = linear_response(n, f.sample_rate, fiber, 0.5 * h);
  const CVec full = linear_response(n, f.sample_rate, fiber, h);
  Fft fft(n);

  // L/2 N L N L ... N L/2: consecutive half steps are merged into full steps.
  for (int s = 0; s < steps; ++s) {
    const CVec& lin = (s == 0) ? half : full;
    apply_response(fft, f.x, lin);
    apply_response(fft, f.y, lin);
    nonlinear_step(f, fiber.gamma_per_w_km, h);
  }
  apply_response(fft, f.x, half);
  apply_response(fft, f.y, half);
  return f;
}

double ase_psd_per_pol(double gain_db, double nf_db, double wavelength_um) noexcept {
  const double g = std::pow(10.0, gain_db / 10.0);
  const double nf = std::pow(10.0, nf_db / 10.0);
  const double nu = kSpeedOfLight / (wavelength_um * 1e-6);
  // n_sp (G - 1) h nu with NF = 2 n_sp (G - 1)/G + 1/G
  return std::max(0.0, 0.5 * (nf * g - 1.0)) * kPlanck * nu;
}

ComplexField edfa_amplify(const ComplexField& field, double gain_db, double nf_db, std::uint64_t seed,
                          double wavelength_um) {
  require(gain_db >= 0.0, ErrorClass::Config, "EDFA gain must be >= 0 dB");
  field.validate();
  ComplexField f = field;
  const double amp = std::pow(10.0, gain_db / 20.0);
  const double variance = ase_psd_per_pol(gain_db, nf_db, wavelength_um) * f.sample_rate;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
  for (CVec* pol : {&f.x, &f.y}) {
    for (auto& v : *pol) {
      v *= amp;
      if (variance > 0.0) {
        const double re = normal(rng);
        const double im = normal(rng);
        v += cplx(re, im);
      }
    }
  }
  return f;
}

ComplexField transmit_link(const ComplexField& field, const LinkConfig& link, std::uint64_t seed) {
  link.validate();
  ComplexField f = field;
  for (int s = 0; s < link.spans; ++s) {
    f = propagate_span(f, link.fiber, link.step_km);
    f = edfa_amplify(f, link.gain_db(), link.edfa_nf_db,
                     derive_seed(seed, {stream::kEdfa, static_cast<std::uint64_t>(s)}),
                     link.fiber.center_wavelength_um);
  }
  return f;
}

ComplexField apply_laser_phase_noise(const ComplexField& field, double linewidth_hz, std::uint64_t seed) {
  field.validate();
  ComplexField f = field;
  if (linewidth_hz <= 0.0) return f;
  const double sigma = std::sqrt(2.0 * std::numbers::pi * linewidth_hz / f.sample_rate);
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  double phase = 0.0;
  for (std::size_t i = 0; i < f.length(); ++i) {
    phase += normal(rng);
    const cplx rot = std::polar(1.0, phase);
    f.x[i] *= rot;
    f.y[i] *= rot;
  }
  return f;
}

ComplexField add_awgn(const ComplexField& field, double snr_db, double signal_bandwidth_hz, std::uint64_t seed) {
  field.validate();
  require(signal_bandwidth_hz > 0.0, ErrorClass::Config, "signal bandwidth must be positive");
  ComplexField f = field;
  const double signal_w = 1e-3 * f.power_mw() / 2.0;  // per polarization
  // noise power in the signal band, scaled up to the simulation band
  const double in_band = signal_w / std::pow(10.0, snr_db / 10.0);
  const double variance = in_band * f.sample_rate / signal_bandwidth_hz;
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * variance));
  for (CVec* pol : {&f.x, &f.y}) {
    for (auto& v : *pol) {
      const double re = normal(rng);
      const double im = normal(rng);
      v += cplx(re, im);
    }
  }
  return f;
}

}  // namespace qfeq
