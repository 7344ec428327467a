#include "qfeq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "qfeq/dsp.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/model_io.hpp"
#include "qfeq/quantize_model.hpp"

namespace qfeq {
namespace {

constexpr const char* kCsvHeader =
    "launch_power_dbm,scheme,b1,b2,seed,bits,errors,ber,q_db,q_lower_bound,penalty_db,model_bits,low_confidence";

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::optional<QuantScheme> try_parse(const std::string& label) {
  if (label == kUnquantizedLabel || label == kLinearDspLabel) return std::nullopt;
  try {
    return QuantScheme::parse(label);
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool same_power(double a, double b) { return std::abs(a - b) < 1e-9; }

/// Per-seed Q of one (power, scheme), keyed by seed.
std::map<std::uint64_t, double> q_by_seed(const std::vector<ExperimentRecord>& records, double power,
                                          const std::string& label) {
  std::map<std::uint64_t, double> out;
  for (const auto& r : records)
    if (same_power(r.launch_power_dbm, power) && same_scheme(r.scheme, label)) out[r.seed] = r.q_db;
  return out;
}

/// Label present in the records matching a predicate on the parsed scheme.
std::optional<std::string> find_label(const std::vector<ExperimentRecord>& records,
                                      const std::function<bool(const QuantScheme&)>& pred) {
  for (const auto& r : records) {
    const auto s = try_parse(r.scheme);
    if (s && pred(*s)) return r.scheme;
  }
  return std::nullopt;
}

std::optional<std::string> fixed_ptq(const std::vector<ExperimentRecord>& records, int bits) {
  return find_label(records, [bits](const QuantScheme& s) {
    return s.scheme == Scheme::Uniform && s.mode == QuantMode::Ptq && s.b1 == bits && s.b2 == bits;
  });
}

/// Paired per-seed Q vectors of two cells; nullopt unless both exist with the same seeds.
std::optional<std::pair<std::vector<double>, std::vector<double>>> paired_q(
    const std::vector<ExperimentRecord>& records, double power_a, const std::string& a, double power_b,
    const std::string& b) {
  const auto qa = q_by_seed(records, power_a, a);
  const auto qb = q_by_seed(records, power_b, b);
  if (qa.empty() || qa.size() != qb.size()) return std::nullopt;
  std::pair<std::vector<double>, std::vector<double>> out;
  for (const auto& [seed, q] : qa) {
    const auto it = qb.find(seed);
    if (it == qb.end()) return std::nullopt;
    out.first.push_back(q);
    out.second.push_back(it->second);
  }
  return out;
}

std::string ci_text(const DifferenceCi& ci) {
  return fixed(ci.mean, 3) + " dB [" + fixed(ci.lower(), 3) + ", " + fixed(ci.upper(), 3) + "]";
}

std::string power_text(double p) { return (p > 0 ? "+" : "") + fixed(p, 1) + " dBm"; }

/// a - b >= 0 within the paired CI. Appends a line to the detail text.
bool not_worse(const std::vector<ExperimentRecord>& records, double power, const std::string& a,
               const std::string& b, double confidence, std::string& detail, bool& evaluated) {
  const auto pq = paired_q(records, power, a, power, b);
  if (!pq) {
    evaluated = false;
    return false;
  }
  const DifferenceCi ci = paired_difference(pq->first, pq->second, confidence);
  const bool ok = ci.upper() >= 0.0;
  detail += "  " + power_text(power) + ": Q(" + a + ") - Q(" + b + ") = " + ci_text(ci) + (ok ? "" : "  VIOLATION") + "\n";
  return ok;
}

}  // namespace

bool same_scheme(const std::string& a, const std::string& b) {
  if (a == b) return true;
  const auto sa = try_parse(a);
  const auto sb = try_parse(b);
  if (!sa || !sb) return false;
  return sa->scheme == sb->scheme && sa->mode == sb->mode && sa->b1 == sb->b1 && sa->b2 == sb->b2;
}

std::string records_csv(const std::vector<ExperimentRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    out += format_double(r.launch_power_dbm) + "," + r.scheme + "," + std::to_string(r.b1) + "," +
           std::to_string(r.b2) + "," + std::to_string(r.seed) + "," + std::to_string(r.bits) + "," +
           std::to_string(r.errors) + "," + format_double(r.ber) + "," + format_double(r.q_db) + "," +
           (r.q_lower_bound ? "1" : "0") + "," + format_double(r.penalty_db) + "," + std::to_string(r.model_bits) +
           "," + (r.low_confidence() ? "1" : "0") + "\n";
  }
  return out;
}

std::vector<ExperimentRecord> parse_records_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  do {
    require(static_cast<bool>(std::getline(is, line)), ErrorClass::NoData, "records file is empty");
  } while (line.starts_with("#"));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kCsvHeader, ErrorClass::Format, "unexpected records header");
  std::vector<ExperimentRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.starts_with("#")) continue;
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    require(c.size() == 13, ErrorClass::Format, "records line " + std::to_string(lineno) + " needs 13 columns");
    try {
      ExperimentRecord r;
      r.launch_power_dbm = parse_double(c[0]);
      r.scheme = c[1];
      r.b1 = std::stoi(c[2]);
      r.b2 = std::stoi(c[3]);
      r.seed = std::stoull(c[4]);
      r.bits = std::stoull(c[5]);
      r.errors = std::stoull(c[6]);
      r.ber = parse_double(c[7]);
      r.q_db = parse_double(c[8]);
      r.q_lower_bound = c[9] == "1";
      r.penalty_db = parse_double(c[10]);
      r.model_bits = std::stoull(c[11]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      raise(ErrorClass::Format, "bad value on records line " + std::to_string(lineno));
    }
  }
  return out;
}

BitCount count_bit_errors(const SymbolFrame& equalized, const SymbolFrame& tx, std::size_t first) {
  require(equalized.x.size() == equalized.y.size(), ErrorClass::Length, "equalized polarizations differ in length");
  const std::size_t n = equalized.x.size();
  require(first + n <= tx.x.size() && tx.x.size() == tx.y.size(), ErrorClass::Length,
          "equalized symbols extend past the transmitted frame");
  SymbolFrame ref;
  ref.x.assign(tx.x.begin() + static_cast<std::ptrdiff_t>(first), tx.x.begin() + static_cast<std::ptrdiff_t>(first + n));
  ref.y.assign(tx.y.begin() + static_cast<std::ptrdiff_t>(first), tx.y.begin() + static_cast<std::ptrdiff_t>(first + n));
  const BitVec a = demap_frame(equalized);
  const BitVec b = demap_frame(ref);
  return {a.size(), bit_errors(a, b)};
}

ScoredRange scored_range(std::size_t symbols, int window_len) {
  const auto w = static_cast<std::size_t>(window_len);
  require(2 * symbols >= w, ErrorClass::Length, "frame shorter than one window");
  return {static_cast<std::size_t>((window_len - 1) / 4), (2 * symbols - w) / 2 + 1};
}

BitCount evaluate_equalizer(const ModelParams& params, const ComplexField& rx, const SymbolFrame& tx) {
  require(rx.length() == 2 * tx.x.size(), ErrorClass::Length, "rx field must hold 2 samples per tx symbol");
  const SymbolFrame eq = slide_equalize(rx, params);
  return count_bit_errors(eq, tx, scored_range(tx.x.size(), params.window_len).first);
}

BitCount evaluate_linear(const ComplexField& rx, const SymbolFrame& tx, int window_len) {
  require(rx.length() == 2 * tx.x.size(), ErrorClass::Length, "rx field must hold 2 samples per tx symbol");
  const ScoredRange r = scored_range(tx.x.size(), window_len);
  const SymbolFrame all = take_symbol_instants(rx, 2);
  SymbolFrame s;
  s.x.assign(all.x.begin() + static_cast<std::ptrdiff_t>(r.first),
             all.x.begin() + static_cast<std::ptrdiff_t>(r.first + r.count));
  s.y.assign(all.y.begin() + static_cast<std::ptrdiff_t>(r.first),
             all.y.begin() + static_cast<std::ptrdiff_t>(r.first + r.count));
  return count_bit_errors(s, tx, r.first);
}

ExperimentRecord make_record(double power_dbm, const std::string& scheme, int b1, int b2, std::uint64_t seed,
                             const BitCount& count, std::size_t model_bits) {
  ExperimentRecord r;
  r.launch_power_dbm = power_dbm;
  r.scheme = scheme;
  r.b1 = b1;
  r.b2 = b2;
  r.seed = seed;
  r.bits = count.bits;
  r.errors = count.errors;
  r.ber = count.bits > 0 ? static_cast<double>(count.errors) / static_cast<double>(count.bits) : 0.0;
  const QEstimate q = q_estimate(count.errors, count.bits);
  r.q_db = q.db;
  r.q_lower_bound = q.lower_bound;
  r.model_bits = model_bits;
  return r;
}

void fill_penalties(std::vector<ExperimentRecord>& records) {
  for (auto& r : records) {
    r.penalty_db = std::numeric_limits<double>::quiet_NaN();
    for (const auto& base : records)
      if (base.scheme == kUnquantizedLabel && same_power(base.launch_power_dbm, r.launch_power_dbm) &&
          base.seed == r.seed) {
        r.penalty_db = base.q_db - r.q_db;
        break;
      }
  }
}

void sort_records(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    if (a.launch_power_dbm != b.launch_power_dbm) return a.launch_power_dbm < b.launch_power_dbm;
    if (a.scheme != b.scheme) return a.scheme < b.scheme;
    return a.seed < b.seed;
  });
}

std::vector<ExperimentRecord> sweep_power(const std::vector<double>& powers, const std::vector<std::string>& labels,
                                          const SweepInputs& inputs) {
  require(static_cast<bool>(inputs.test_cases), ErrorClass::State, "sweep needs a test-case provider");
  std::vector<ExperimentRecord> out;
  for (double p : powers) {
    const std::vector<TestCase> cases = inputs.test_cases(p);
    require(!cases.empty(), ErrorClass::State, "no test transmissions at " + power_text(p));
    for (const auto& label : labels) {
      if (label == kLinearDspLabel) {
        for (const auto& tc : cases)
          out.push_back(make_record(p, label, 0, 0, tc.seed, evaluate_linear(tc.rx, tc.tx, inputs.window_len), 0));
        continue;
      }
      std::optional<ModelParams> model = inputs.model ? inputs.model(p, label) : std::nullopt;
      require(model.has_value(), ErrorClass::State, "missing model for scheme " + label + " at " + power_text(p));
      int b1 = 32;
      int b2 = 32;
      if (model->quant) {
        b1 = model->quant->book(Layer::ConvX).bits();
        b2 = model->quant->book(Layer::Dense).bits();
      }
      const std::size_t bits = model_size_bits(*model);
      for (const auto& tc : cases)
        out.push_back(make_record(p, label, b1, b2, tc.seed, evaluate_equalizer(*model, tc.rx, tc.tx), bits));
    }
  }
  fill_penalties(out);
  sort_records(out);
  return out;
}

Comparison compare_schemes(const std::vector<ExperimentRecord>& records, double confidence) {
  require(!records.empty(), ErrorClass::NoData, "no records to compare");
  Comparison cmp;
  std::set<double> powers;
  std::set<std::uint64_t> seeds;
  std::vector<std::string> order = {kUnquantizedLabel};
  for (const auto& r : records) {
    if (r.scheme == kUnquantizedLabel) {
      powers.insert(r.launch_power_dbm);
      seeds.insert(r.seed);
      cmp.fp32_bits = r.model_bits;
    }
    if (std::find(order.begin(), order.end(), r.scheme) == order.end()) order.push_back(r.scheme);
  }
  require(!powers.empty(), ErrorClass::Pairing, "records hold no unquantized (UQ) baseline");
  cmp.powers.assign(powers.begin(), powers.end());
  cmp.seeds.assign(seeds.begin(), seeds.end());

  std::map<std::tuple<std::string, double, std::uint64_t>, const ExperimentRecord*> cell;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.scheme, r.launch_power_dbm, r.seed);
    require(!cell.count(key), ErrorClass::Pairing,
            "duplicate record for " + r.scheme + " at " + power_text(r.launch_power_dbm) + ", seed " + std::to_string(r.seed));
    require(powers.count(r.launch_power_dbm) && seeds.count(r.seed), ErrorClass::Pairing,
            "record for " + r.scheme + " at " + power_text(r.launch_power_dbm) + ", seed " + std::to_string(r.seed) +
                " has no UQ counterpart");
    cell[key] = &r;
  }

  for (const auto& label : order) {
    ComparisonRow row;
    row.scheme = label;
    for (double p : cmp.powers) {
      std::size_t bits = 0;
      std::size_t errors = 0;
      std::vector<double> q, base;
      for (auto s : cmp.seeds) {
        const auto it = cell.find({label, p, s});
        require(it != cell.end(), ErrorClass::Pairing,
                "scheme " + label + " lacks a record at " + power_text(p) + ", seed " + std::to_string(s));
        const ExperimentRecord& r = *it->second;
        row.b1 = r.b1;
        row.b2 = r.b2;
        row.model_bits = r.model_bits;
        bits += r.bits;
        errors += r.errors;
        q.push_back(r.q_db);
        base.push_back(cell.at({kUnquantizedLabel, p, s})->q_db);
      }
      const QEstimate pooled = q_estimate(errors, bits);
      row.q_db.push_back(pooled.db);
      row.q_lower_bound.push_back(pooled.lower_bound);
      row.penalty.push_back(paired_difference(base, q, confidence));
    }
    row.size_reduction = cmp.fp32_bits > 0 && row.model_bits > 0
                             ? 1.0 - static_cast<double>(row.model_bits) / static_cast<double>(cmp.fp32_bits)
                             : 0.0;
    cmp.rows.push_back(std::move(row));
  }
  return cmp;
}

std::string comparison_csv(const Comparison& cmp) {
  std::string out = "scheme,b1,b2,model_bits,size_reduction_pct";
  for (double p : cmp.powers) {
    const std::string tag = "p" + fixed(p, 1);
    out += ",q_db_" + tag + ",q_lower_bound_" + tag + ",penalty_db_" + tag + ",penalty_ci_" + tag;
  }
  out += "\n";
  for (const auto& r : cmp.rows) {
    out += r.scheme + "," + std::to_string(r.b1) + "," + std::to_string(r.b2) + "," + std::to_string(r.model_bits) +
           "," + fixed(100.0 * r.size_reduction, 2);
    for (std::size_t i = 0; i < cmp.powers.size(); ++i)
      out += "," + fixed(r.q_db[i], 3) + "," + (r.q_lower_bound[i] ? "1" : "0") + "," + fixed(r.penalty[i].mean, 3) +
             "," + fixed(r.penalty[i].half_width, 3);
    out += "\n";
  }
  return out;
}

TrendCheck check_nn_gain(const std::vector<ExperimentRecord>& records, double confidence, double min_gain_db,
                         double gain_power_dbm) {
  TrendCheck c{"unquantized NN beats linear DSP at every power >= 0 dBm", true, true, ""};
  std::set<double> powers;
  for (const auto& r : records)
    if (r.scheme == kUnquantizedLabel && r.launch_power_dbm >= 0.0) powers.insert(r.launch_power_dbm);
  bool saw_gain_power = false;
  for (double p : powers) {
    const auto pq = paired_q(records, p, kUnquantizedLabel, p, kLinearDspLabel);
    if (!pq) continue;
    const DifferenceCi ci = paired_difference(pq->first, pq->second, confidence);
    bool ok = ci.mean > 0.0;
    std::string note;
    if (same_power(p, gain_power_dbm)) {
      saw_gain_power = true;
      ok = ok && ci.mean > min_gain_db && ci.lower() > 0.0;
      note = " (needs > " + fixed(min_gain_db, 2) + " dB and a positive lower bound)";
    }
    c.passed = c.passed && ok;
    c.detail += "  " + power_text(p) + ": gain " + ci_text(ci) + note + (ok ? "" : "  VIOLATION") + "\n";
  }
  if (!saw_gain_power) {
    c.evaluated = false;
    c.passed = false;
    c.detail += "  no UQ/LDSP records at " + power_text(gain_power_dbm) + "\n";
  }
  return c;
}

TrendCheck check_penalty_growth(const std::vector<ExperimentRecord>& records, const std::string& label,
                                double low_dbm, double high_dbm, double confidence) {
  TrendCheck c{"penalty of " + label + " grows with launch power", false, false, ""};
  const auto hi_s = paired_q(records, high_dbm, kUnquantizedLabel, high_dbm, label);
  const auto lo_s = paired_q(records, low_dbm, kUnquantizedLabel, low_dbm, label);
  if (!hi_s || !lo_s || hi_s->first.size() != lo_s->first.size()) return c;
  std::vector<double> pen_hi, pen_lo;
  for (std::size_t i = 0; i < hi_s->first.size(); ++i) {
    pen_hi.push_back(hi_s->first[i] - hi_s->second[i]);
    pen_lo.push_back(lo_s->first[i] - lo_s->second[i]);
  }
  const DifferenceCi ci = paired_difference(pen_hi, pen_lo, confidence);
  c.evaluated = true;
  c.passed = ci.upper() >= 0.0;
  c.detail = "  penalty(" + power_text(high_dbm) + ") - penalty(" + power_text(low_dbm) + ") = " + ci_text(ci) +
             (c.passed ? "" : "  VIOLATION") + "\n";
  return c;
}

TrendCheck check_bit_depth(const std::vector<ExperimentRecord>& records, const std::vector<double>& powers,
                           double confidence) {
  TrendCheck c{"fixed-precision PTQ: Q(8) >= Q(6) >= Q(4), penalty(7) <= penalty(6)", true, true, ""};
  const auto b4 = fixed_ptq(records, 4), b6 = fixed_ptq(records, 6), b7 = fixed_ptq(records, 7),
             b8 = fixed_ptq(records, 8);
  if (!b4 || !b6 || !b7 || !b8) return {c.name, false, false, "  needs fixed-precision PTQ at 4, 6, 7 and 8 bits\n"};
  for (double p : powers) {
    bool ok = not_worse(records, p, *b8, *b6, confidence, c.detail, c.evaluated);
    ok = not_worse(records, p, *b6, *b4, confidence, c.detail, c.evaluated) && ok;
    ok = not_worse(records, p, *b7, *b6, confidence, c.detail, c.evaluated) && ok;
    c.passed = c.passed && ok;
  }
  c.passed = c.passed && c.evaluated;
  return c;
}

TrendCheck check_scheme_order(const std::vector<ExperimentRecord>& records, const std::vector<double>& powers,
                              double confidence) {
  TrendCheck c{"scheme ordering: Q(TAQ-6) >= Q(PTQ-6), Q(APoT-8) >= Q(PTQ-8)", true, true, ""};
  const auto taq6 = find_label(records, [](const QuantScheme& s) {
    return s.scheme == Scheme::Uniform && s.mode == QuantMode::Taq && s.b1 == 6 && s.b2 == 6;
  });
  const auto ptq6 = fixed_ptq(records, 6);
  const auto ptq8 = find_label(records, [](const QuantScheme& s) {
    return s.scheme == Scheme::Uniform && s.mode == QuantMode::Ptq && s.b1 == 6 && s.b2 == 8;
  });
  const auto apot8 = find_label(records, [](const QuantScheme& s) {
    return s.scheme == Scheme::Apot && s.mode == QuantMode::Ptq && s.b1 == 6 && s.b2 == 8;
  });
  if (!taq6 || !ptq6 || !ptq8 || !apot8) return {c.name, false, false, "  needs TAQ-6, PTQ-6, PTQ-8 and APoT-8\n"};
  for (double p : powers) {
    bool ok = not_worse(records, p, *taq6, *ptq6, confidence, c.detail, c.evaluated);
    ok = not_worse(records, p, *apot8, *ptq8, confidence, c.detail, c.evaluated) && ok;
    c.passed = c.passed && ok;
  }
  c.passed = c.passed && c.evaluated;
  return c;
}

TrendCheck check_cutoff(const std::vector<ExperimentRecord>& records, const std::vector<double>& powers,
                        double confidence) {
  TrendCheck c{"cut-off: Q drops more from 5 to 4 bits than from 7 to 6 bits", false, false, ""};
  const auto b4 = fixed_ptq(records, 4), b5 = fixed_ptq(records, 5), b6 = fixed_ptq(records, 6),
             b7 = fixed_ptq(records, 7);
  if (!b4 || !b5 || !b6 || !b7) {
    c.detail = "  needs fixed-precision PTQ at 4, 5, 6 and 7 bits\n";
    return c;
  }
  std::vector<double> drop_low, drop_high;
  for (double p : powers) {
    const auto q54 = paired_q(records, p, *b5, p, *b4);
    const auto q76 = paired_q(records, p, *b7, p, *b6);
    if (!q54 || !q76) return c;
    for (std::size_t i = 0; i < q54->first.size(); ++i) {
      drop_low.push_back(q54->first[i] - q54->second[i]);
      drop_high.push_back(q76->first[i] - q76->second[i]);
    }
  }
  const DifferenceCi ci = paired_difference(drop_low, drop_high, confidence);
  c.evaluated = true;
  c.passed = ci.mean > 0.0;
  c.detail = "  (Q5 - Q4) - (Q7 - Q6) = " + ci_text(ci) + (c.passed ? "" : "  VIOLATION") + "\n";
  return c;
}

std::vector<TrendCheck> trend_checks(const std::vector<ExperimentRecord>& records, double confidence) {
  const std::vector<double> test_powers = {-2.0, 2.0};
  std::vector<TrendCheck> out;
  out.push_back(check_nn_gain(records, confidence));
  if (const auto b6 = fixed_ptq(records, 6))
    out.push_back(check_penalty_growth(records, *b6, -2.0, 2.0, confidence));
  out.push_back(check_bit_depth(records, test_powers, confidence));
  out.push_back(check_scheme_order(records, test_powers, confidence));
  out.push_back(check_cutoff(records, test_powers, confidence));
  return out;
}

std::string summary_text(const Comparison& cmp, const std::vector<TrendCheck>& checks) {
  std::ostringstream os;
  os << "Q-factor [dB] per launch power (errors pooled over " << cmp.seeds.size() << " seeds)\n";
  os << "scheme";
  for (double p : cmp.powers) os << '\t' << power_text(p);
  os << "\n";
  for (const auto& r : cmp.rows) {
    os << r.scheme;
    for (std::size_t i = 0; i < cmp.powers.size(); ++i) os << '\t' << (r.q_lower_bound[i] ? ">" : "") << fixed(r.q_db[i], 2);
    os << "\n";
  }
  os << "\nPenalty vs UQ [dB], mean over seeds with " << "confidence interval half width\n";
  for (const auto& r : cmp.rows) {
    os << r.scheme;
    for (std::size_t i = 0; i < cmp.powers.size(); ++i)
      os << '\t' << fixed(r.penalty[i].mean, 2) << " +- " << fixed(r.penalty[i].half_width, 2);
    os << "\n";
  }
  os << "\nModel size (FP32 = " << cmp.fp32_bits << " bits)\n";
  for (const auto& r : cmp.rows) {
    if (r.scheme == kLinearDspLabel) continue;
    os << r.scheme << "\tb1=" << r.b1 << " b2=" << r.b2 << '\t' << r.model_bits << " bits\treduction "
       << fixed(100.0 * r.size_reduction, 2) << "%\n";
  }
  os << "\nTrend checks\n";
  for (const auto& c : checks) {
    os << (c.evaluated ? (c.passed ? "[ok]      " : "[VIOLATED]") : "[skipped] ") << ' ' << c.name << "\n" << c.detail;
  }
  return os.str();
}

}  // namespace qfeq
