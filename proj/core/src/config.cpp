#include "qfeq/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "qfeq/binary_io.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/model_io.hpp"

namespace qfeq {
namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw std::invalid_argument("expected an integer");
  return v;
}

double to_real(const std::string& s) {
  try {
    return parse_double(s);
  } catch (const Error&) {
    throw std::invalid_argument("expected a number");
  }
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false");
}

bool is_none(const std::string& s) { return s.empty() || s == "none"; }

std::string real_text(double v) { return format_double(v); }

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> f;
  auto real = [&](std::string s, std::string k, double& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = to_real(x); }, [&v] { return real_text(v); }});
  };
  auto integer = [&](std::string s, std::string k, int& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = to_int<int>(x); }, [&v] { return std::to_string(v); }});
  };
  auto count = [&](std::string s, std::string k, std::size_t& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = to_int<std::size_t>(x); }, [&v] { return std::to_string(v); }});
  };
  auto boolean = [&](std::string s, std::string k, bool& v) {
    f.push_back({s, k, [&v](const std::string& x) { v = to_bool(x); }, [&v] { return std::string(v ? "true" : "false"); }});
  };
  auto opt_real = [&](std::string s, std::string k, std::optional<double>& v) {
    f.push_back({s, k,
                 [&v](const std::string& x) {
                   if (is_none(x)) v.reset();
                   else v = to_real(x);
                 },
                 [&v] { return v ? real_text(*v) : std::string("none"); }});
  };

  real("link", "loss_db_per_km", c.link.fiber.loss_db_per_km);
  real("link", "dispersion_ps_per_nm_km", c.link.fiber.dispersion_ps_per_nm_km);
  real("link", "gamma_per_w_km", c.link.fiber.gamma_per_w_km);
  real("link", "span_length_km", c.link.fiber.length_km);
  real("link", "wavelength_um", c.link.fiber.center_wavelength_um);
  integer("link", "spans", c.link.spans);
  opt_real("link", "edfa_gain_db", c.link.edfa_gain_db);
  real("link", "edfa_nf_db", c.link.edfa_nf_db);
  real("link", "step_km", c.link.step_km);
  integer("link", "oversampling", c.link.oversampling);
  real("link", "laser_linewidth_hz", c.link.laser_linewidth_hz);
  opt_real("link", "transceiver_snr_db", c.link.transceiver_snr_db);

  real("signal", "symbol_rate_gbaud", c.signal.symbol_rate_gbaud);
  real("signal", "rolloff", c.signal.rolloff);
  integer("signal", "rrc_span", c.signal.rrc_span);
  count("signal", "train_symbols", c.signal.train_symbols);
  count("signal", "test_symbols", c.signal.test_symbols);
  real("signal", "split_train", c.signal.split.train);
  real("signal", "split_validation", c.signal.split.validation);
  real("signal", "split_test", c.signal.split.test);

  integer("dsp", "cpe_block_len", c.dsp.cpe_block_len);
  integer("dsp", "cpe_test_phases", c.dsp.cpe_test_phases);
  integer("dsp", "pilot_len", c.dsp.pilot_len);

  integer("model", "window_len", c.model.window_len);
  integer("model", "dense_units", c.model.dense_units);
  boolean("model", "share_filters", c.model.share_filters);

  integer("train", "epochs", c.train.epochs);
  integer("train", "taq_epochs", c.train.taq_epochs);
  integer("train", "batch_size", c.train.batch_size);
  real("train", "learning_rate", c.train.learning_rate);
  f.push_back({"train", "seed", [&c](const std::string& x) { c.train.seed = to_int<std::uint64_t>(x); },
               [&c] { return std::to_string(c.train.seed); }});
  integer("train", "patience", c.train.patience);
  f.push_back({"train", "taq_grad", [&c](const std::string& x) { c.train.taq_grad = parse_taq_grad(x); },
               [&c] { return to_string(c.train.taq_grad); }});
  integer("train", "calibration_windows", c.train.calibration_windows);

  f.push_back({"quant", "activation_bits",
               [&c](const std::string& x) {
                 if (is_none(x)) c.quant.activation_bits.reset();
                 else c.quant.activation_bits = to_int<int>(x);
               },
               [&c] { return c.quant.activation_bits ? std::to_string(*c.quant.activation_bits) : std::string("none"); }});
  f.push_back({"quant", "range",
               [&c](const std::string& x) {
                 if (x == "dynamic") c.quant.range.kind = RangeMode::Kind::Dynamic;
                 else if (x == "static") c.quant.range.kind = RangeMode::Kind::Static;
                 else throw std::invalid_argument("expected static or dynamic");
               },
               [&c] { return std::string(c.quant.range.kind == RangeMode::Kind::Dynamic ? "dynamic" : "static"); }});
  real("quant", "static_a", c.quant.range.a);
  real("quant", "static_c", c.quant.range.c);
  opt_real("quant", "percentile", c.quant.range.percentile);
  integer("quant", "apot_base_bits", c.quant.apot_base_bits);
  boolean("quant", "keep_biases_full_precision", c.quant.keep_biases_full_precision);
  boolean("quant", "strict_pot", c.quant.strict_pot);
  boolean("quant", "taq_from_fp32", c.quant.taq_from_fp32);

  f.push_back({"experiment", "schemes", [&c](const std::string& x) { c.schemes = split_list(x); },
               [&c] {
                 std::string s;
                 for (const auto& v : c.schemes) s += (s.empty() ? "" : ", ") + v;
                 return s;
               }});
  f.push_back({"experiment", "powers_dbm",
               [&c](const std::string& x) {
                 c.powers_dbm.clear();
                 for (const auto& v : split_list(x)) c.powers_dbm.push_back(to_real(v));
               },
               [&c] {
                 std::string s;
                 for (double v : c.powers_dbm) s += (s.empty() ? "" : ", ") + real_text(v);
                 return s;
               }});
  f.push_back({"experiment", "seeds",
               [&c](const std::string& x) {
                 c.seeds.clear();
                 for (const auto& v : split_list(x)) c.seeds.push_back(to_int<std::uint64_t>(v));
               },
               [&c] {
                 std::string s;
                 for (auto v : c.seeds) s += (s.empty() ? "" : ", ") + std::to_string(v);
                 return s;
               }});
  f.push_back({"experiment", "output_dir", [&c](const std::string& x) { c.output_dir = x; },
               [&c] { return c.output_dir.string(); }});
  real("experiment", "confidence", c.confidence);
  integer("experiment", "jobs", c.jobs);
  return f;
}

}  // namespace

void SignalConfig::validate() const {
  require(symbol_rate_gbaud > 0.0, ErrorClass::Config, "signal.symbol_rate_gbaud must be positive");
  require(rolloff >= 0.0 && rolloff <= 1.0, ErrorClass::Config, "signal.rolloff must lie in [0, 1]");
  require(rrc_span > 0 && rrc_span % 2 == 1, ErrorClass::Config, "signal.rrc_span must be odd and positive");
  require(train_symbols >= 1000 && test_symbols >= 1000, ErrorClass::Config,
          "signal.train_symbols and signal.test_symbols must be >= 1000 (synchronization needs them)");
  split.validate();
}

void ModelConfig::validate() const {
  require(window_len >= kConvTaps && window_len % 2 == 1, ErrorClass::Config, "model.window_len must be odd and >= 41");
  require(dense_units == kDenseUnits, ErrorClass::Config, "model.dense_units is fixed at 100 in this build");
}

void QuantConfig::validate() const {
  require(!activation_bits || (*activation_bits >= 2 && *activation_bits <= 16), ErrorClass::Config,
          "quant.activation_bits must lie in [2, 16] or be none");
  require(range.kind == RangeMode::Kind::Dynamic || range.a < range.c, ErrorClass::Config,
          "quant.static_a must be below quant.static_c");
  require(!range.percentile || (*range.percentile > 50.0 && *range.percentile <= 100.0), ErrorClass::Config,
          "quant.percentile must lie in (50, 100]");
  require(apot_base_bits >= 1, ErrorClass::Config, "quant.apot_base_bits must be >= 1");
}

void ExperimentConfig::validate() const {
  link.validate();
  signal.validate();
  model.validate();
  train.validate();
  quant.validate();
  require(!seeds.empty(), ErrorClass::Config, "experiment.seeds must not be empty");
  require(!powers_dbm.empty(), ErrorClass::Config, "experiment.powers_dbm must not be empty");
  require(confidence > 0.0 && confidence < 1.0, ErrorClass::Config, "experiment.confidence must lie in (0, 1)");
  require(jobs >= 0, ErrorClass::Config, "experiment.jobs must be >= 0");
  require(link.oversampling % 2 == 0, ErrorClass::Config, "link.oversampling must be even (receiver runs at 2 sps)");
  DspConfig d = dsp;
  d.total_cd_ps_per_nm = link.total_dispersion_ps_per_nm();
  d.validate();
  for (const auto& s : schemes) {
    require(s != kUnquantizedLabel && s != kLinearDspLabel, ErrorClass::Config,
            "experiment.schemes lists quantized schemes only; UQ and LDSP are always evaluated");
    scheme(s);
  }
}

QuantScheme ExperimentConfig::scheme(const std::string& label) const {
  QuantScheme s = QuantScheme::parse(label);
  s.activation_bits = quant.activation_bits;
  s.range = quant.range;
  s.apot_base_bits = quant.apot_base_bits;
  s.keep_biases_full_precision = quant.keep_biases_full_precision;
  s.strict_pot = quant.strict_pot;
  s.validate();
  return s;
}

std::string ExperimentConfig::canonical() const {
  auto& self = const_cast<ExperimentConfig&>(*this);
  std::vector<std::string> lines;
  for (const auto& f : fields(self)) {
    if (f.section == "experiment" && (f.key == "output_dir" || f.key == "jobs")) continue;
    lines.push_back(f.section + "." + f.key + "=" + f.get());
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t parse_hash_hex(const std::string& text) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  require(ec == std::errc() && p == text.data() + text.size() && text.size() == 16, ErrorClass::Format,
          "bad config hash '" + text + "'");
  return v;
}

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    raise(ErrorClass::Config, std::string("malformed config: ") + e.what());
  }
  ExperimentConfig c;
  auto table = fields(c);
  std::map<std::string, Field*> by_name;
  for (auto& f : table) by_name[f.section + "." + f.key] = &f;

  for (const auto& [section, body] : tree) {
    require(!(body.empty() && !body.data().empty()), ErrorClass::Config, "key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = by_name.find(name);
      require(it != by_name.end(), ErrorClass::Config, "unknown config key " + name);
      try {
        it->second->set(trim(value.data()));
      } catch (const std::invalid_argument& e) {
        raise(ErrorClass::Config, name + ": " + e.what() + ", got '" + value.data() + "'");
      } catch (const Error& e) {
        raise(ErrorClass::Config, name + ": " + e.what());
      }
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  require(std::filesystem::exists(path), ErrorClass::Prerequisite, "config file not found: " + path.string());
  return parse_config(read_file(path));
}

}  // namespace qfeq
