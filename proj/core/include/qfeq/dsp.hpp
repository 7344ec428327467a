#pragma once

#include <array>
#include <span>
#include <vector>

#include "qfeq/signal.hpp"

namespace qfeq {

struct DspConfig {
  double total_cd_ps_per_nm = 0.0;
  int cpe_block_len = 128;
  int cpe_test_phases = 64;
  int sps_out = 2;
  /// Number of leading known symbols used to resolve the pi/2 ambiguity.
  int pilot_len = 64;
  double center_wavelength_um = 1.55;

  void validate() const;
};

/// Exact inverse of the all-pass chromatic-dispersion response for the given
/// accumulated dispersion.
ComplexField cd_compensate(const ComplexField& field, double total_cd_ps_per_nm, double wavelength_um = 1.55);

struct DownsampleResult {
  ComplexField field;
  int sampling_phase = 0;  // input-sample offset of the first symbol instant
};

/// RRC matched filter at sps_in followed by decimation to sps_out. The
/// sampling phase is chosen to maximise energy at symbol-spaced instants.
DownsampleResult matched_filter_downsample(const ComplexField& field, double rolloff, int sps_in, int sps_out,
                                           int span_symbols = 65);

/// Per-symbol carrier phase estimate: blind phase search per block with
/// decision-directed refinement, unwrapped across blocks, with the pi/2
/// ambiguity resolved against a pilot prefix (if any pilots are given).
std::vector<double> estimate_carrier_phase(std::span<const cplx> symbols, std::span<const cplx> pilots,
                                           const DspConfig& cfg);

/// Symbols derotated by estimate_carrier_phase.
CVec carrier_phase_estimate(std::span<const cplx> symbols, std::span<const cplx> pilots, const DspConfig& cfg);

struct SyncResult {
  SymbolFrame aligned;
  long delay = 0;                      // rx[k] ~ scale * tx[k - delay]
  std::array<cplx, 2> scale{};         // least-squares complex gain per polarization
  double correlation = 0.0;            // normalized peak, in [0, 1]
};

/// Minimum normalized correlation accepted by synchronize_scale.
inline constexpr double kSyncThreshold = 0.5;

/// Find the delay of rx relative to tx by circular cross-correlation, then
/// remove it and the per-polarization complex gain.
SyncResult synchronize_scale(const SymbolFrame& rx, const SymbolFrame& tx);

/// Apply a symbol delay/gain found by synchronize_scale to a field sampled at
/// `sps` samples per symbol.
ComplexField apply_sync(const ComplexField& field, const SyncResult& sync, int sps);

/// Symbols at the symbol instants of a field at `sps` samples per symbol.
SymbolFrame take_symbol_instants(const ComplexField& field, int sps);

/// Error vector magnitude (RMS error / RMS reference), as a ratio.
double evm(std::span<const cplx> received, std::span<const cplx> reference);

}  // namespace qfeq
