#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qfeq/metrics.hpp"
#include "qfeq/model.hpp"
#include "qfeq/signal.hpp"

namespace qfeq {

/// One (launch power, scheme, seed) cell.
struct ExperimentRecord {
  double launch_power_dbm = 0.0;
  std::string scheme;
  int b1 = 32;
  int b2 = 32;
  std::uint64_t seed = 0;
  std::size_t bits = 0;
  std::size_t errors = 0;
  double ber = 0.0;
  double q_db = 0.0;
  bool q_lower_bound = false;
  /// Q(UQ) - Q(this) at the same power and seed; NaN until filled in.
  double penalty_db = std::numeric_limits<double>::quiet_NaN();
  std::size_t model_bits = 0;

  bool low_confidence() const noexcept { return bits < kMinReportedBits; }
};

/// Fixed column order: launch_power_dbm, scheme, b1, b2, seed, bits, errors,
/// ber, q_db, q_lower_bound, penalty_db, model_bits, low_confidence.
std::string records_csv(const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> parse_records_csv(const std::string& text);

struct BitCount {
  std::size_t bits = 0;
  std::size_t errors = 0;
};

/// Bit errors of equalized symbols against tx symbols first .. first+count-1.
BitCount count_bit_errors(const SymbolFrame& equalized, const SymbolFrame& tx, std::size_t first);

/// Symbols scored by every method at a given frame length: the ones the
/// equalizer produces (window centres), so that all methods share them.
struct ScoredRange {
  std::size_t first = 0;
  std::size_t count = 0;
};
ScoredRange scored_range(std::size_t symbols, int window_len);

/// Slide the equalizer over the synchronized 2-sps field and count errors.
BitCount evaluate_equalizer(const ModelParams& params, const ComplexField& rx, const SymbolFrame& tx);
/// Hard decisions on the linear-DSP output over the same symbols as the equalizer.
BitCount evaluate_linear(const ComplexField& rx, const SymbolFrame& tx, int window_len);

ExperimentRecord make_record(double power_dbm, const std::string& scheme, int b1, int b2, std::uint64_t seed,
                             const BitCount& count, std::size_t model_bits);

/// penalty_db = Q(UQ) - Q(record) for records with a UQ baseline at the same
/// power and seed; others stay NaN.
void fill_penalties(std::vector<ExperimentRecord>& records);

/// Deterministic record order: power, scheme, seed.
void sort_records(std::vector<ExperimentRecord>& records);

struct TestCase {
  std::uint64_t seed = 0;
  SymbolFrame tx;
  ComplexField rx;
};

/// Inputs of a power sweep: the test transmissions of a power (shared by all
/// schemes, so penalties are paired) and the model of a scheme at a power.
/// `model` returns nullopt when the model does not exist.
struct SweepInputs {
  std::function<std::vector<TestCase>(double power_dbm)> test_cases;
  std::function<std::optional<ModelParams>(double power_dbm, const std::string& label)> model;
  int window_len = kDefaultWindow;
};

/// Records for every (power, scheme, seed). Labels are UQ, LDSP or quantized
/// scheme labels. A missing model raises a state error.
std::vector<ExperimentRecord> sweep_power(const std::vector<double>& powers, const std::vector<std::string>& labels,
                                          const SweepInputs& inputs);

struct ComparisonRow {
  std::string scheme;
  int b1 = 0;
  int b2 = 0;
  std::size_t model_bits = 0;
  double size_reduction = 0.0;  // 1 - bits / FP32 bits
  std::vector<double> q_db;     // per power, from errors pooled over seeds
  std::vector<bool> q_lower_bound;
  std::vector<DifferenceCi> penalty;  // per power, paired over seeds
};

struct Comparison {
  std::vector<double> powers;
  std::vector<std::uint64_t> seeds;
  std::size_t fp32_bits = 0;
  std::vector<ComparisonRow> rows;  // UQ first, then the order of first appearance
};

/// Table of Q per power and scheme with paired penalties against UQ. Raises a
/// pairing error unless every scheme has a record for every (power, seed) of
/// the UQ baseline, and no others.
Comparison compare_schemes(const std::vector<ExperimentRecord>& records, double confidence = 0.95);

std::string comparison_csv(const Comparison& cmp);

/// Outcome of one trend check on simulated data.
struct TrendCheck {
  std::string name;
  bool evaluated = false;  // false when the records lack the needed schemes/powers
  bool passed = false;
  std::string detail;
};

/// Unquantized NN beats linear DSP at every power >= 0 dBm, with a gain above
/// min_gain_db and a positive confidence bound at gain_power_dbm.
TrendCheck check_nn_gain(const std::vector<ExperimentRecord>& records, double confidence = 0.95,
                         double min_gain_db = 0.2, double gain_power_dbm = 2.0);
/// Penalty of `label` at high_dbm is at least its penalty at low_dbm, within CI.
TrendCheck check_penalty_growth(const std::vector<ExperimentRecord>& records, const std::string& label,
                                double low_dbm, double high_dbm, double confidence = 0.95);
/// Q(8) >= Q(6) >= Q(4) and penalty(7) <= penalty(6) for fixed-precision
/// uniform PTQ at every listed power, within paired CI.
TrendCheck check_bit_depth(const std::vector<ExperimentRecord>& records, const std::vector<double>& powers,
                           double confidence = 0.95);
/// Q(TAQ-6) >= Q(PTQ-6) and Q(APoT-8) >= Q(PTQ-8) at every listed power, within paired CI.
TrendCheck check_scheme_order(const std::vector<ExperimentRecord>& records, const std::vector<double>& powers,
                              double confidence = 0.95);
/// (Q7 - Q6) < (Q5 - Q4) for fixed-precision uniform PTQ, pooled over the
/// listed powers and seeds.
TrendCheck check_cutoff(const std::vector<ExperimentRecord>& records, const std::vector<double>& powers,
                        double confidence = 0.95);

/// All checks whose inputs are present, with the default test powers -2/+2 dBm.
std::vector<TrendCheck> trend_checks(const std::vector<ExperimentRecord>& records, double confidence = 0.95);

/// Human-readable summary: Q table, penalties, size reductions, trend checks.
std::string summary_text(const Comparison& cmp, const std::vector<TrendCheck>& checks);

/// True when two labels denote the same scheme (aliases resolve to their
/// generic form; UQ and LDSP compare by name).
bool same_scheme(const std::string& a, const std::string& b);

}  // namespace qfeq
