#include "qfeq/pipeline.hpp"

#include <cmath>

#include "qfeq/errors.hpp"
#include "qfeq/fiber.hpp"
#include "qfeq/rng.hpp"

namespace qfeq {

std::uint64_t training_seed(const ExperimentConfig& cfg) { return derive_seed(cfg.train.seed, {stream::kTrainSet}); }

Transmission receive(const ExperimentConfig& cfg, const ComplexField& optical, const SymbolFrame& tx,
                     const BitVec& bits) {
  const int sps = cfg.link.oversampling;
  DspConfig dsp = cfg.dsp;
  dsp.total_cd_ps_per_nm = cfg.link.total_dispersion_ps_per_nm();
  dsp.center_wavelength_um = cfg.link.fiber.center_wavelength_um;
  dsp.sps_out = 2;

  const ComplexField cd = cd_compensate(optical, dsp.total_cd_ps_per_nm, dsp.center_wavelength_um);
  ComplexField f = matched_filter_downsample(cd, cfg.signal.rolloff, sps, 2, cfg.signal.rrc_span).field;

  // unit mean symbol energy per polarization, as the constellation slicer expects
  for (CVec* pol : {&f.x, &f.y}) {
    double e = 0.0;
    for (std::size_t k = 0; k < pol->size(); k += 2) e += std::norm((*pol)[k]);
    e /= static_cast<double>(pol->size() / 2);
    require(e > 0.0, ErrorClass::Sync, "received polarization carries no power");
    const double g = 1.0 / std::sqrt(e);
    for (auto& v : *pol) v *= g;
  }

  const SymbolFrame instants = take_symbol_instants(f, 2);
  const std::size_t pilots = std::min<std::size_t>(static_cast<std::size_t>(dsp.pilot_len), tx.x.size());
  for (int p = 0; p < 2; ++p) {
    CVec& pol = p == 0 ? f.x : f.y;
    const CVec& sym = p == 0 ? instants.x : instants.y;
    const CVec& ref = p == 0 ? tx.x : tx.y;
    const auto phase = estimate_carrier_phase(sym, std::span<const cplx>(ref.data(), pilots), dsp);
    for (std::size_t k = 0; k < phase.size(); ++k) {
      const cplx rot = std::polar(1.0, -phase[k]);
      pol[2 * k] *= rot;
      if (2 * k + 1 < pol.size()) pol[2 * k + 1] *= rot;
    }
  }

  Transmission out;
  out.bits = bits;
  out.tx = tx;
  out.sync = synchronize_scale(take_symbol_instants(f, 2), tx);
  out.rx = apply_sync(f, out.sync, 2);
  return out;
}

Transmission simulate_transmission(const ExperimentConfig& cfg, double launch_power_dbm, std::size_t symbols,
                                   std::uint64_t seed) {
  const int sps = cfg.link.oversampling;
  const double rs = cfg.signal.symbol_rate_hz();
  BitVec bits = random_bits(8 * symbols, derive_seed(seed, {stream::kBits}));
  SymbolFrame tx = map_bits_to_symbols(bits);

  ComplexField field = rrc_shape(tx, cfg.signal.rolloff, sps, cfg.signal.rrc_span, rs);
  field = set_power(std::move(field), dbm_to_mw(launch_power_dbm));
  if (cfg.link.laser_linewidth_hz > 0.0)
    field = apply_laser_phase_noise(field, cfg.link.laser_linewidth_hz, derive_seed(seed, {stream::kTxLaser}));
  field = transmit_link(field, cfg.link, derive_seed(seed, {stream::kEdfa}));
  if (cfg.link.transceiver_snr_db)
    field = add_awgn(field, *cfg.link.transceiver_snr_db, rs, derive_seed(seed, {stream::kTransceiver}));
  if (cfg.link.laser_linewidth_hz > 0.0)
    field = apply_laser_phase_noise(field, cfg.link.laser_linewidth_hz, derive_seed(seed, {stream::kRxLaser}));
  return receive(cfg, field, tx, bits);
}

}  // namespace qfeq
