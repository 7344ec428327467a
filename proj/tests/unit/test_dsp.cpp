#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "qfeq/config.hpp"
#include "qfeq/dsp.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/fiber.hpp"
#include "qfeq/pipeline.hpp"
#include "qfeq/rng.hpp"

using namespace qfeq;

namespace {

constexpr double kRs = 34.4e9;

CVec rotate(const CVec& v, long shift) {
  // out[k] = v[k - shift]
  const long n = static_cast<long>(v.size());
  CVec out(v.size());
  for (long k = 0; k < n; ++k) out[k] = v[((k - shift) % n + n) % n];
  return out;
}

LinkConfig linear_noiseless_link() {
  LinkConfig link;
  link.fiber.loss_db_per_km = 0.0;
  link.fiber.gamma_per_w_km = 0.0;
  link.edfa_nf_db = 0.0;  // with 0 dB gain: no ASE
  link.step_km = 50.0;
  link.laser_linewidth_hz = 0.0;
  return link;
}

ErrorClass class_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.error_class();
  }
  return static_cast<ErrorClass>(0);
}

}  // namespace

TEST(CdCompensation, AccumulatedDispersionOfTheLink) {
  LinkConfig link;
  EXPECT_DOUBLE_EQ(link.total_dispersion_ps_per_nm(), 9 * 50 * 2.8);
  EXPECT_NEAR(link.total_dispersion_ps_per_nm(), 1260.0, 1e-9);
}

TEST(CdCompensation, InvertsADispersionOnlyLink) {
  const LinkConfig link = linear_noiseless_link();
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 2048, 1));
  const ComplexField in = set_power(rrc_shape(tx, 0.1, 8, 65, kRs), 1.0);
  const ComplexField out = transmit_link(in, link, 7);
  EXPECT_GT(test::field_rel_error(out, in), 0.1);  // the link does disperse
  const ComplexField back = cd_compensate(out, link.total_dispersion_ps_per_nm());
  EXPECT_LT(test::field_rel_error(back, in), 1e-6);
}

TEST(CdCompensation, InvertsArbitraryFieldsAndZeroIsIdentity) {
  const ComplexField in = test::random_field(3000, 200e9, 3);
  const ComplexField out = propagate_span(in, [] {
    FiberParams p;
    p.loss_db_per_km = 0.0;
    p.gamma_per_w_km = 0.0;
    p.length_km = 80.0;
    return p;
  }(), 10.0);
  EXPECT_LT(test::field_rel_error(cd_compensate(out, 80 * 2.8), in), 1e-6);
  const ComplexField same = cd_compensate(in, 0.0);
  EXPECT_EQ(same.x, in.x);
}

namespace {

// RMS inter-symbol interference of a truncated matched RRC pair, from the
// direct convolution of the two tap sequences.
double truncation_floor(int span) {
  const auto h = rrc_taps(0.1, 8, span);
  std::vector<double> g(2 * h.size() - 1, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) g[i + j] += h[i] * h[j];
  const std::size_t c = h.size() - 1;
  double isi = 0.0;
  for (std::size_t k = 8; k <= c; k += 8) isi += g[c + k] * g[c + k] + g[c - k] * g[c - k];
  return std::sqrt(isi) / g[c];
}

}  // namespace

TEST(MatchedFilter, BackToBackRecoversSymbols) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 4096, 2));
  for (int span : {65, 257}) {
    const ComplexField f = rrc_shape(tx, 0.1, 8, span, kRs);
    const DownsampleResult r = matched_filter_downsample(f, 0.1, 8, 1, span);
    EXPECT_EQ(r.sampling_phase, 0);
    const SymbolFrame rx = take_symbol_instants(r.field, 1);
    const double floor = truncation_floor(span);
    EXPECT_NEAR(evm(rx.x, tx.x) / floor, 1.0, 0.1) << span;
    EXPECT_NEAR(evm(rx.y, tx.y) / floor, 1.0, 0.1) << span;
    if (span == 257) EXPECT_LT(evm(rx.x, tx.x), 1e-4);
  }
}

TEST(MatchedFilter, EqualRatesFilterWithoutDecimation) {
  const ComplexField f = test::random_field(64 * 4, 4 * kRs, 4);
  const DownsampleResult r = matched_filter_downsample(f, 0.1, 4, 4, 9);
  EXPECT_EQ(r.field.length(), f.length());
  EXPECT_EQ(r.field.sample_rate, f.sample_rate);
}

TEST(MatchedFilter, SamplingPhaseRecoversConstructedShift) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 4096, 5));
  ComplexField f = rrc_shape(tx, 0.1, 8, 65, kRs);
  for (long shift : {1L, 3L, 6L}) {
    ComplexField s = f;
    s.x = rotate(f.x, shift);
    s.y = rotate(f.y, shift);
    const DownsampleResult r = matched_filter_downsample(s, 0.1, 8, 2);
    EXPECT_EQ(r.sampling_phase, shift);
    EXPECT_LT(evm(take_symbol_instants(r.field, 2).x, tx.x), 1.1 * truncation_floor(65));
  }
}

TEST(MatchedFilter, IndivisibleRatesAreConfigError) {
  const ComplexField f = test::random_field(8 * 16, 8 * kRs, 4);
  EXPECT_EQ(class_of([&] { matched_filter_downsample(f, 0.1, 8, 3); }), ErrorClass::Config);
}

TEST(Cpe, ConstantOffsetIsRecovered) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 4096, 6));
  const double offset = std::numbers::pi / 7.0;
  CVec rx = tx.x;
  for (auto& v : rx) v *= std::polar(1.0, offset);
  DspConfig cfg;
  const auto phase = estimate_carrier_phase(rx, std::span<const cplx>(tx.x.data(), 64), cfg);
  for (double p : phase) ASSERT_NEAR(p, offset, 0.01);
  const CVec out = carrier_phase_estimate(rx, std::span<const cplx>(tx.x.data(), 64), cfg);
  for (std::size_t i = 0; i < rx.size(); ++i) EXPECT_NEAR(std::abs(out[i]), std::abs(rx[i]), 1e-12);
  EXPECT_LT(evm(out, tx.x), 1e-3);
}

TEST(Cpe, ZeroOffsetLeavesSymbolsUnchanged) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 1024, 7));
  const CVec out = carrier_phase_estimate(tx.x, std::span<const cplx>(tx.x.data(), 64), DspConfig{});
  EXPECT_LT(test::max_abs_diff(out, tx.x), 1e-12);
}

TEST(Cpe, QuadrantAmbiguityIsResolvedByPilots) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 2048, 8));
  for (int q = 1; q < 4; ++q) {
    CVec rx = tx.x;
    const double offset = q * std::numbers::pi / 2.0 + 0.05;
    for (auto& v : rx) v *= std::polar(1.0, offset);
    const CVec out = carrier_phase_estimate(rx, std::span<const cplx>(tx.x.data(), 64), DspConfig{});
    EXPECT_LT(evm(out, tx.x), 1e-3) << q;
  }
}

TEST(Cpe, MagnitudesArePreservedUnderNoise) {
  CVec rx = test::random_complex(5000, 9);
  const CVec out = carrier_phase_estimate(rx, {}, DspConfig{});
  for (std::size_t i = 0; i < rx.size(); ++i) EXPECT_NEAR(std::abs(out[i]), std::abs(rx[i]), 1e-12);
}

TEST(Cpe, WienerPhaseNoisePenaltyIsSmallAtFifteenDb) {
  // genie: derotate by the true phase; penalty = EVM ratio in dB
  const std::size_t n = 1 << 16;
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * n, 10));
  Rng rng = make_rng(11);
  std::normal_distribution<double> walk(0.0, std::sqrt(2.0 * std::numbers::pi * 100e3 / kRs));
  const double sigma = std::sqrt(0.5 / std::pow(10.0, 1.5));
  std::normal_distribution<double> noise(0.0, sigma);
  CVec rx(n);
  CVec genie(n);
  double theta = 0.3;
  for (std::size_t i = 0; i < n; ++i) {
    theta += walk(rng);
    const cplx w(noise(rng), noise(rng));
    rx[i] = tx.x[i] * std::polar(1.0, theta) + w;
    genie[i] = rx[i] * std::polar(1.0, -theta);
  }
  const CVec out = carrier_phase_estimate(rx, std::span<const cplx>(tx.x.data(), 64), DspConfig{});
  const double penalty = 20.0 * std::log10(evm(out, tx.x) / evm(genie, tx.x));
  EXPECT_LT(penalty, 0.5);
  EXPECT_GE(penalty, -0.05);
}

TEST(Sync, RecoversDelayAndUnitScale) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 4096, 12));
  SymbolFrame rx{rotate(tx.x, 17), rotate(tx.y, 17)};
  const SyncResult s = synchronize_scale(rx, tx);
  EXPECT_EQ(s.delay, 17);
  for (const auto& g : s.scale) EXPECT_NEAR(std::abs(g - cplx(1.0)), 0.0, 1e-12);
  EXPECT_LT(test::max_abs_diff(s.aligned.x, tx.x), 1e-12);
  EXPECT_NEAR(s.correlation, 1.0, 1e-12);

  SymbolFrame early{rotate(tx.x, -5), rotate(tx.y, -5)};
  EXPECT_EQ(synchronize_scale(early, tx).delay, -5);
}

TEST(Sync, RecoversComplexScale) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 2048, 13));
  SymbolFrame rx = tx;
  for (auto& v : rx.x) v *= cplx(0.0, 0.5);
  for (auto& v : rx.y) v *= cplx(0.0, 0.5);
  const SyncResult s = synchronize_scale(rx, tx);
  EXPECT_EQ(s.delay, 0);
  EXPECT_NEAR(std::abs(s.scale[0] - cplx(0.0, 0.5)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(s.scale[1] - cplx(0.0, 0.5)), 0.0, 1e-12);
}

TEST(Sync, UnrelatedSequencesFail) {
  // independent QAM: normalized peak concentrates near sqrt(log n / n), far below 0.5
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SymbolFrame a = map_bits_to_symbols(random_bits(8 * 4096, 100 + seed));
    const SymbolFrame b = map_bits_to_symbols(random_bits(8 * 4096, 200 + seed));
    EXPECT_EQ(class_of([&] { synchronize_scale(a, b); }), ErrorClass::Sync);
  }
  const SymbolFrame a = map_bits_to_symbols(random_bits(8 * 100, 1));
  EXPECT_EQ(class_of([&] { synchronize_scale(a, a); }), ErrorClass::Length);
}

TEST(Sync, ApplySyncOnTwoSpsField) {
  const SymbolFrame tx = map_bits_to_symbols(random_bits(8 * 2048, 14));
  ComplexField f;
  f.sample_rate = 2 * kRs;
  f.x.resize(2 * tx.length());
  f.y.resize(2 * tx.length());
  for (std::size_t k = 0; k < tx.length(); ++k) {
    f.x[2 * k] = tx.x[k];
    f.y[2 * k] = tx.y[k];
    f.x[2 * k + 1] = f.y[2 * k + 1] = cplx(0.25);
  }
  f.x = rotate(f.x, 2 * 9);
  f.y = rotate(f.y, 2 * 9);
  const SyncResult s = synchronize_scale(take_symbol_instants(f, 2), tx);
  const ComplexField g = apply_sync(f, s, 2);
  EXPECT_LT(test::max_abs_diff(take_symbol_instants(g, 2).x, tx.x), 1e-12);
}

TEST(LinearChain, NoiselessLinearChannelHasZeroBitErrors) {
  ExperimentConfig cfg;
  cfg.link = linear_noiseless_link();
  const Transmission t = simulate_transmission(cfg, 0.0, 100000, 21);
  const SymbolFrame rx = take_symbol_instants(t.rx, 2);
  const BitVec bits = demap_frame(rx);
  ASSERT_EQ(bits.size(), t.bits.size());
  std::size_t errors = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) errors += bits[i] != t.bits[i];
  EXPECT_EQ(errors, 0u);
  EXPECT_EQ(t.sync.delay, 0);
}
