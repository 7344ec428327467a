#include "qfeq/dsp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "qfeq/errors.hpp"
#include "qfeq/fft.hpp"
#include "qfeq/fiber.hpp"

namespace qfeq {
namespace {

constexpr double kPi = std::numbers::pi;

CVec circular_shift(std::span<const cplx> v, long shift) {
  // out[k] = v[k + shift]
  const long n = static_cast<long>(v.size());
  CVec out(v.size());
  for (long k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>((((k + shift) % n) + n) % n)];
  return out;
}

double wrap_to(double phase, double period) {
  return phase - period * std::round(phase / period);
}

}  // namespace

void DspConfig::validate() const {
  require(cpe_test_phases >= 4, ErrorClass::Config, "dsp.cpe_test_phases must be >= 4");
  require(cpe_block_len >= 16, ErrorClass::Config, "dsp.cpe_block_len must be >= 16");
  require(sps_out == 1 || sps_out == 2, ErrorClass::Config, "dsp.sps_out must be 1 or 2");
  require(pilot_len >= 0, ErrorClass::Config, "dsp.pilot_len must be >= 0");
}

ComplexField cd_compensate(const ComplexField& field, double total_cd_ps_per_nm, double wavelength_um) {
  field.validate();
  ComplexField f = field;
  if (total_cd_ps_per_nm == 0.0 || f.length() == 0) return f;
  const double lambda = wavelength_um * 1e-6;
  const double d_total = total_cd_ps_per_nm * 1e-12 / 1e-9;  // s/m
  const double beta2_l = -d_total * lambda * lambda / (2.0 * kPi * kSpeedOfLight);  // s^2
  const std::size_t n = f.length();
  CVec inverse(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = bin_angular_frequency(k, n, f.sample_rate);
    inverse[k] = std::polar(1.0, -0.5 * beta2_l * w * w);
  }
  Fft fft(n);
  for (CVec* pol : {&f.x, &f.y}) {
    fft.forward(*pol);
    for (std::size_t k = 0; k < n; ++k) (*pol)[k] *= inverse[k];
    fft.inverse(*pol);
  }
  return f;
}

DownsampleResult matched_filter_downsample(const ComplexField& field, double rolloff, int sps_in, int sps_out,
                                           int span_symbols) {
  field.validate();
  require(sps_in >= 1 && sps_out >= 1, ErrorClass::Config, "samples per symbol must be positive");
  require(sps_in % sps_out == 0, ErrorClass::Config,
          "sps_in " + std::to_string(sps_in) + " is not divisible by sps_out " + std::to_string(sps_out));
  require(field.length() % static_cast<std::size_t>(sps_in) == 0, ErrorClass::Length,
          "field length is not a whole number of symbols");
  const auto taps = rrc_taps(rolloff, sps_in, span_symbols);
  ComplexField filtered{circular_filter(field.x, taps), circular_filter(field.y, taps), field.sample_rate};

  const std::size_t n_sym = field.length() / static_cast<std::size_t>(sps_in);
  int best_phase = 0;
  double best_energy = -1.0;
  for (int p = 0; p < sps_in; ++p) {
    double e = 0.0;
    for (std::size_t k = 0; k < n_sym; ++k) {
      const std::size_t i = k * sps_in + static_cast<std::size_t>(p);
      e += std::norm(filtered.x[i]) + std::norm(filtered.y[i]);
    }
    if (e > best_energy + 1e-12 * std::abs(best_energy)) {
      best_energy = e;
      best_phase = p;
    }
  }

  const int factor = sps_in / sps_out;
  DownsampleResult out;
  out.sampling_phase = best_phase;
  out.field.sample_rate = field.sample_rate / factor;
  const std::size_t n_out = n_sym * static_cast<std::size_t>(sps_out);
  out.field.x.resize(n_out);
  out.field.y.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::size_t i = (static_cast<std::size_t>(best_phase) + j * factor) % filtered.length();
    out.field.x[j] = filtered.x[i];
    out.field.y[j] = filtered.y[i];
  }
  return out;
}

std::vector<double> estimate_carrier_phase(std::span<const cplx> symbols, std::span<const cplx> pilots,
                                           const DspConfig& cfg) {
  cfg.validate();
  const auto& qam = Qam16Constellation::standard();
  const std::size_t n = symbols.size();
  const std::size_t block = static_cast<std::size_t>(cfg.cpe_block_len);
  const std::size_t n_blocks = (n + block - 1) / block;
  const double quarter = kPi / 2.0;

  std::vector<cplx> test_rot(static_cast<std::size_t>(cfg.cpe_test_phases));
  std::vector<double> test_phase(test_rot.size());
  for (std::size_t b = 0; b < test_rot.size(); ++b) {
    test_phase[b] = -kPi / 4.0 + quarter * static_cast<double>(b) / static_cast<double>(cfg.cpe_test_phases);
    test_rot[b] = std::polar(1.0, -test_phase[b]);
  }

  std::vector<double> block_phase(n_blocks, 0.0);
  for (std::size_t blk = 0; blk < n_blocks; ++blk) {
    const std::size_t lo = blk * block;
    const std::size_t hi = std::min(n, lo + block);
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < test_rot.size(); ++b) {
      double cost = 0.0;
      for (std::size_t i = lo; i < hi; ++i) {
        const cplx z = symbols[i] * test_rot[b];
        cost += std::norm(z - qam.slice(z));
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = b;
      }
    }
    // decision-directed refinement: ML phase given the BPS decisions
    cplx acc(0.0);
    for (std::size_t i = lo; i < hi; ++i) {
      const cplx z = symbols[i] * test_rot[best];
      acc += symbols[i] * std::conj(qam.slice(z));
    }
    double phase = std::abs(acc) > 0.0 ? std::arg(acc) : test_phase[best];
    // stay on the branch of the BPS decision
    phase = test_phase[best] + wrap_to(phase - test_phase[best], quarter);
    if (blk > 0) phase = block_phase[blk - 1] + wrap_to(phase - block_phase[blk - 1], quarter);
    block_phase[blk] = phase;
  }

  double correction = 0.0;
  if (!pilots.empty() && n > 0) {
    const std::size_t m = std::min(pilots.size(), n);
    double best_score = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < 4; ++q) {
      const double extra = q * quarter;
      double score = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const cplx z = symbols[i] * std::polar(1.0, -(block_phase[i / block] + extra));
        score += std::real(z * std::conj(pilots[i]));
      }
      if (score > best_score) {
        best_score = score;
        correction = extra;
      }
    }
  }

  std::vector<double> phase(n);
  for (std::size_t i = 0; i < n; ++i) phase[i] = block_phase[i / block] + correction;
  return phase;
}

CVec carrier_phase_estimate(std::span<const cplx> symbols, std::span<const cplx> pilots, const DspConfig& cfg) {
  const auto phase = estimate_carrier_phase(symbols, pilots, cfg);
  CVec out(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) out[i] = symbols[i] * std::polar(1.0, -phase[i]);
  return out;
}

SyncResult synchronize_scale(const SymbolFrame& rx, const SymbolFrame& tx) {
  require(rx.x.size() == rx.y.size() && tx.x.size() == tx.y.size(), ErrorClass::Length,
          "polarization lengths differ");
  require(rx.length() == tx.length(), ErrorClass::Length, "rx and tx frames differ in length");
  const std::size_t n = rx.length();
  require(n >= 1000, ErrorClass::Length, "synchronization needs at least 1000 overlapping symbols");

  // circular cross-correlation c[d] = sum_k rx[k] conj(tx[k - d]), both polarizations
  Fft fft(n);
  std::vector<double> magnitude(n, 0.0);
  std::array<CVec, 2> corr;
  double energy_rx = 0.0;
  double energy_tx = 0.0;
  for (int p = 0; p < 2; ++p) {
    CVec a = p == 0 ? rx.x : rx.y;
    CVec b = p == 0 ? tx.x : tx.y;
    for (auto v : a) energy_rx += std::norm(v);
    for (auto v : b) energy_tx += std::norm(v);
    fft.forward(a);
    fft.forward(b);
    for (std::size_t k = 0; k < n; ++k) a[k] *= std::conj(b[k]);
    fft.inverse(a);
    corr[p] = std::move(a);
  }
  std::size_t best = 0;
  for (std::size_t d = 0; d < n; ++d) {
    magnitude[d] = std::abs(corr[0][d]) + std::abs(corr[1][d]);
    if (magnitude[d] > magnitude[best]) best = d;
  }
  SyncResult result;
  result.correlation = energy_rx > 0.0 && energy_tx > 0.0 ? magnitude[best] / std::sqrt(energy_rx * energy_tx) : 0.0;
  require(result.correlation >= kSyncThreshold, ErrorClass::Sync,
          "correlation peak " + std::to_string(result.correlation) + " below threshold");
  result.delay = best < (n + 1) / 2 ? static_cast<long>(best) : static_cast<long>(best) - static_cast<long>(n);

  result.aligned.x = circular_shift(rx.x, result.delay);
  result.aligned.y = circular_shift(rx.y, result.delay);
  for (int p = 0; p < 2; ++p) {
    CVec& a = p == 0 ? result.aligned.x : result.aligned.y;
    const CVec& t = p == 0 ? tx.x : tx.y;
    cplx num(0.0);
    double den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      num += a[k] * std::conj(t[k]);
      den += std::norm(t[k]);
    }
    const cplx g = den > 0.0 ? num / den : cplx(1.0);
    result.scale[static_cast<std::size_t>(p)] = g;
    for (auto& v : a) v /= g;
  }
  return result;
}

ComplexField apply_sync(const ComplexField& field, const SyncResult& sync, int sps) {
  field.validate();
  ComplexField f;
  f.sample_rate = field.sample_rate;
  f.x = circular_shift(field.x, sync.delay * sps);
  f.y = circular_shift(field.y, sync.delay * sps);
  for (auto& v : f.x) v /= sync.scale[0];
  for (auto& v : f.y) v /= sync.scale[1];
  return f;
}

SymbolFrame take_symbol_instants(const ComplexField& field, int sps) {
  require(sps >= 1, ErrorClass::Config, "samples per symbol must be positive");
  SymbolFrame s;
  const std::size_t n = field.length() / static_cast<std::size_t>(sps);
  s.x.resize(n);
  s.y.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    s.x[k] = field.x[k * sps];
    s.y[k] = field.y[k * sps];
  }
  return s;
}

double evm(std::span<const cplx> received, std::span<const cplx> reference) {
  require(received.size() == reference.size(), ErrorClass::Length, "evm inputs differ in length");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < received.size(); ++i) {
    err += std::norm(received[i] - reference[i]);
    ref += std::norm(reference[i]);
  }
  return ref > 0.0 ? std::sqrt(err / ref) : 0.0;
}

}  // namespace qfeq
