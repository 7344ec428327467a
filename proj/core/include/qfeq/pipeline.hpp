#pragma once

#include <cstdint>

#include "qfeq/config.hpp"
#include "qfeq/dsp.hpp"
#include "qfeq/signal.hpp"

namespace qfeq {

/// One simulated transmission after the linear receiver chain.
struct Transmission {
  BitVec bits;
  SymbolFrame tx;
  /// Synchronized, phase-corrected 2-sps field; sample 2k is the instant of tx symbol k.
  ComplexField rx;
  SyncResult sync;
};

/// TX bits -> 16-QAM -> RRC -> launch power -> TX laser phase noise -> link
/// (fiber spans + EDFAs) -> transceiver noise -> LO phase noise -> CD
/// compensation -> matched filter to 2 sps -> CPE -> synchronization.
/// Every random stream is derived from `seed`; the same seed at two launch
/// powers reuses the same normalized noise realizations.
Transmission simulate_transmission(const ExperimentConfig& cfg, double launch_power_dbm, std::size_t symbols,
                                   std::uint64_t seed);

/// The linear receiver chain alone, applied to a received optical field at the
/// simulation rate.
Transmission receive(const ExperimentConfig& cfg, const ComplexField& optical, const SymbolFrame& tx,
                     const BitVec& bits);

/// Seed of the training transmission of an experiment.
std::uint64_t training_seed(const ExperimentConfig& cfg);

}  // namespace qfeq
