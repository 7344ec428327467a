#include "qfeq/commands.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <sstream>

#include "qfeq/binary_io.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/model_io.hpp"
#include "qfeq/parallel.hpp"
#include "qfeq/pipeline.hpp"

namespace qfeq {
namespace {

constexpr const char* kVersion = "qfeq 0.1.0";

class Logger {
 public:
  explicit Logger(std::ostream& os) : os_(os), start_(std::chrono::steady_clock::now()) {}

  void operator()(const std::string& line) {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "[%8.1fs] ", s);
    std::lock_guard lock(mutex_);
    os_ << stamp << line << "\n" << std::flush;
  }

 private:
  std::ostream& os_;
  std::chrono::steady_clock::time_point start_;
  std::mutex mutex_;
};

std::string header_line(std::uint64_t hash) { return "# config_hash " + hash_hex(hash) + "\n"; }

void require_file(const std::filesystem::path& p, const std::string& produced_by) {
  require(std::filesystem::exists(p), ErrorClass::Prerequisite,
          "missing " + p.string() + " (run '" + produced_by + "' first)");
}

void require_hash(std::uint64_t found, std::uint64_t expected, const std::filesystem::path& p) {
  require(found == expected, ErrorClass::State,
          p.string() + " was produced with config hash " + hash_hex(found) + " but the current config hashes to " +
              hash_hex(expected) + "; regenerate it with the current config");
}

/// Hash embedded in a dataset sidecar or model file, if the file exists.
std::optional<std::uint64_t> stored_hash(const std::filesystem::path& p) {
  auto text_path = p;
  if (p.extension() == ".qfeq") text_path += ".txt";
  if (!std::filesystem::exists(p) || !std::filesystem::exists(text_path)) return std::nullopt;
  std::istringstream is(read_file(text_path));
  std::string line;
  while (std::getline(is, line)) {
    if (line.starts_with("config_hash ")) {
      try {
        return parse_hash_hex(line.substr(12));
      } catch (const Error&) {
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

bool up_to_date(const std::filesystem::path& p, std::uint64_t hash, const CommandOptions& opt) {
  if (opt.force) return false;
  const auto h = stored_hash(p);
  return h && *h == hash;
}

void check_manifest(const ExperimentConfig& cfg, const Layout& layout) {
  require_file(layout.manifest(), "generate");
  std::istringstream is(read_file(layout.manifest()));
  std::string line;
  while (std::getline(is, line))
    if (line.starts_with("config_hash ")) {
      require_hash(parse_hash_hex(line.substr(12)), cfg.hash(), layout.manifest());
      return;
    }
  raise(ErrorClass::Format, layout.manifest().string() + " has no config_hash line");
}

std::vector<std::string> selected_schemes(const ExperimentConfig& cfg, const CommandOptions& opt) {
  if (!opt.scheme) return cfg.schemes;
  for (const auto& s : cfg.schemes)
    if (s == *opt.scheme) return {s};
  raise(ErrorClass::Config, "scheme " + *opt.scheme + " is not listed in experiment.schemes");
}

ModelParams load_checked_model(const std::filesystem::path& p, std::uint64_t hash, const std::string& produced_by) {
  require_file(p, produced_by);
  ModelFile m = load_model(p);
  require_hash(m.config_hash, hash, p);
  return std::move(m.params);
}

LoadedDataset load_checked_dataset(const std::filesystem::path& p, std::uint64_t hash) {
  require_file(p, "generate");
  LoadedDataset d = load_dataset(p);
  require_hash(d.config_hash, hash, p);
  return d;
}

}  // namespace

std::string Layout::power_tag(double power) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%+.1f", power);
  return buf;
}

std::string Layout::file_label(const std::string& label) {
  std::string s = label;
  for (char& ch : s)
    if (ch == '/' || ch == '\\' || ch == ' ') ch = '_';
  return s;
}

std::filesystem::path Layout::train_data(double power) const { return root_ / "data" / power_tag(power) / "train.qfeq"; }

std::filesystem::path Layout::test_data(double power, std::uint64_t seed) const {
  return root_ / "data" / power_tag(power) / ("test_s" + std::to_string(seed) + ".qfeq");
}

std::filesystem::path Layout::model(double power, const std::string& label) const {
  return root_ / "models" / power_tag(power) / (file_label(label) + ".model");
}

std::filesystem::path Layout::train_log(double power, const std::string& label) const {
  return root_ / "logs" / power_tag(power) / ("train_" + file_label(label) + ".csv");
}

void cmd_generate(const ExperimentConfig& cfg, std::ostream& out, const CommandOptions& opt) {
  cfg.validate();
  Logger log(out);
  const Layout layout(cfg.output_dir);
  const std::uint64_t hash = cfg.hash();
  try {
    std::filesystem::create_directories(layout.root());
  } catch (const std::filesystem::filesystem_error& e) {
    raise(ErrorClass::Io, "cannot create output directory " + layout.root().string() + ": " + e.what());
  }
  write_file_atomic(layout.manifest(), "qfeq-manifest 1\nversion " + std::string(kVersion) + "\nconfig_hash " +
                                           hash_hex(hash) + "\n\n" + cfg.canonical());

  struct Job {
    double power;
    std::optional<std::uint64_t> test_seed;
  };
  std::vector<Job> jobs;
  for (double p : cfg.powers_dbm) {
    jobs.push_back({p, std::nullopt});
    for (auto s : cfg.seeds) jobs.push_back({p, s});
  }
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    const bool is_train = !j.test_seed;
    const auto path = is_train ? layout.train_data(j.power) : layout.test_data(j.power, *j.test_seed);
    if (up_to_date(path, hash, opt)) {
      log("up to date: " + path.string());
      return;
    }
    const std::uint64_t seed = is_train ? training_seed(cfg) : *j.test_seed;
    const std::size_t n = is_train ? cfg.signal.train_symbols : cfg.signal.test_symbols;
    const Transmission t = simulate_transmission(cfg, j.power, n, seed);
    const SplitFractions split = is_train ? cfg.signal.split : SplitFractions{1.0, 0.0, 0.0};
    Dataset d = build_dataset(t.tx, t.rx, cfg.model.window_len, split);
    d.launch_power_dbm = j.power;
    d.seed = seed;
    save_dataset(path, d, t.tx, hash);
    log("wrote " + path.string() + " (sync delay " + std::to_string(t.sync.delay) + ", correlation " +
        format_double(std::round(t.sync.correlation * 1e4) / 1e4) + ")");
  });
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& out, const CommandOptions& opt) {
  cfg.validate();
  Logger log(out);
  const Layout layout(cfg.output_dir);
  const std::uint64_t hash = cfg.hash();
  check_manifest(cfg, layout);
  parallel_for(cfg.powers_dbm.size(), cfg.jobs, [&](std::size_t i) {
    const double p = cfg.powers_dbm[i];
    const auto model_path = layout.model(p, kUnquantizedLabel);
    if (!opt.force && std::filesystem::exists(model_path) && load_model(model_path).config_hash == hash) {
      log("up to date: " + model_path.string());
      return;
    }
    const LoadedDataset d = load_checked_dataset(layout.train_data(p), hash);
    const std::string tag = Layout::power_tag(p);
    const TrainResult r = train_fp32(d.data, cfg.train, cfg.model.share_filters, [&](const EpochLog& e) {
      if (e.epoch % 10 == 0 || e.epoch == 1)
        log(tag + " UQ epoch " + std::to_string(e.epoch) + " train " + format_double(e.train_mse) + " val " +
            format_double(e.validation_mse));
    });
    write_file_atomic(layout.train_log(p, kUnquantizedLabel), header_line(hash) + epoch_log_csv(r.log));
    save_model(model_path, r.params, hash, kUnquantizedLabel);
    log("wrote " + model_path.string() + " (best epoch " + std::to_string(r.best_epoch) + ")");
  });
}

void cmd_quantize(const ExperimentConfig& cfg, std::ostream& out, const CommandOptions& opt) {
  cfg.validate();
  Logger log(out);
  const Layout layout(cfg.output_dir);
  const std::uint64_t hash = cfg.hash();
  check_manifest(cfg, layout);
  const auto schemes = selected_schemes(cfg, opt);
  std::vector<std::pair<double, std::string>> cells;
  for (double p : cfg.powers_dbm)
    for (const auto& s : schemes) cells.emplace_back(p, s);

  parallel_for(cells.size(), cfg.jobs, [&](std::size_t i) {
    const auto& [p, label] = cells[i];
    const auto model_path = layout.model(p, label);
    if (!opt.force && std::filesystem::exists(model_path) && load_model(model_path).config_hash == hash) {
      log("up to date: " + model_path.string());
      return;
    }
    const QuantScheme scheme = cfg.scheme(label);
    const ModelParams fp = load_checked_model(layout.model(p, kUnquantizedLabel), hash, "train");
    const LoadedDataset d = load_checked_dataset(layout.train_data(p), hash);
    ModelParams q;
    if (scheme.mode == QuantMode::Ptq) {
      std::vector<std::size_t> starts;
      const std::size_t n = d.data.train.size();
      const std::size_t take = cfg.train.calibration_windows > 0
                                   ? std::min<std::size_t>(n, static_cast<std::size_t>(cfg.train.calibration_windows))
                                   : n;
      for (std::size_t k = 0; k < take; ++k) starts.push_back(d.data.start_of(d.data.train.begin + k * n / take));
      q = quantize_model_ptq(fp, scheme, d.data.streams, starts);
    } else {
      const std::string tag = Layout::power_tag(p);
      const auto init = cfg.quant.taq_from_fp32 ? std::optional<ModelParams>(fp) : std::nullopt;
      const TrainResult r = train_taq(d.data, scheme, cfg.train, init, cfg.model.share_filters, [&](const EpochLog& e) {
        if (e.epoch % 10 == 0 || e.epoch == 1)
          log(tag + " " + label + " epoch " + std::to_string(e.epoch) + " train " + format_double(e.train_mse) +
              " val " + format_double(e.validation_mse));
      });
      write_file_atomic(layout.train_log(p, label), header_line(hash) + epoch_log_csv(r.log));
      q = r.params;
    }
    save_model(model_path, q, hash, label);
    log("wrote " + model_path.string() + " (" + std::to_string(model_size_bits(q)) + " bits)");
  });
}

std::vector<ExperimentRecord> cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out, const CommandOptions& opt) {
  cfg.validate();
  Logger log(out);
  const Layout layout(cfg.output_dir);
  const std::uint64_t hash = cfg.hash();
  check_manifest(cfg, layout);
  std::vector<std::string> labels = {kUnquantizedLabel, kLinearDspLabel};
  for (const auto& s : selected_schemes(cfg, opt)) labels.push_back(s);

  SweepInputs inputs;
  inputs.window_len = cfg.model.window_len;
  inputs.test_cases = [&](double p) {
    std::vector<TestCase> cases;
    for (auto s : cfg.seeds) {
      const LoadedDataset d = load_checked_dataset(layout.test_data(p, s), hash);
      TestCase tc;
      tc.seed = s;
      tc.tx = d.tx;
      tc.rx.sample_rate = 2.0 * cfg.signal.symbol_rate_hz();
      const auto& st = d.data.streams;
      tc.rx.x.resize(st.length());
      tc.rx.y.resize(st.length());
      for (std::size_t k = 0; k < st.length(); ++k) {
        tc.rx.x[k] = {st.x_re[k], st.x_im[k]};
        tc.rx.y[k] = {st.y_re[k], st.y_im[k]};
      }
      cases.push_back(std::move(tc));
    }
    return cases;
  };
  inputs.model = [&](double p, const std::string& label) -> std::optional<ModelParams> {
    const auto path = layout.model(p, label);
    require_file(path, label == kUnquantizedLabel ? "train" : "quantize");
    return load_checked_model(path, hash, label == kUnquantizedLabel ? "train" : "quantize");
  };

  std::vector<std::vector<ExperimentRecord>> per_power(cfg.powers_dbm.size());
  parallel_for(cfg.powers_dbm.size(), cfg.jobs, [&](std::size_t i) {
    per_power[i] = sweep_power({cfg.powers_dbm[i]}, labels, inputs);
    log("evaluated " + Layout::power_tag(cfg.powers_dbm[i]));
  });
  std::vector<ExperimentRecord> records;
  for (auto& v : per_power) records.insert(records.end(), v.begin(), v.end());
  fill_penalties(records);
  sort_records(records);
  write_file_atomic(layout.records(), header_line(hash) + records_csv(records));
  log("wrote " + layout.records().string() + " (" + std::to_string(records.size()) + " records)");
  return records;
}

std::string cmd_sweep(const ExperimentConfig& cfg, std::ostream& log, const CommandOptions& opt) {
  cmd_generate(cfg, log, opt);
  cmd_train(cfg, log, opt);
  cmd_quantize(cfg, log, opt);
  cmd_evaluate(cfg, log, opt);
  return cmd_report(cfg.output_dir, log);
}

std::string cmd_report(const std::filesystem::path& root, std::ostream& out) {
  const Layout layout(root);
  require(std::filesystem::exists(layout.records()), ErrorClass::NoData,
          "no records under " + root.string() + " (run 'evaluate' first)");
  const std::string text = read_file(layout.records());
  std::string header;
  if (text.starts_with("# config_hash ")) header = text.substr(0, text.find('\n') + 1);
  const auto records = parse_records_csv(text);
  require(!records.empty(), ErrorClass::NoData, layout.records().string() + " holds no records");
  double confidence = 0.95;
  const Comparison cmp = compare_schemes(records, confidence);
  const auto checks = trend_checks(records, confidence);
  const std::string summary = summary_text(cmp, checks);
  write_file_atomic(layout.summary(), header + summary);
  write_file_atomic(layout.comparison(), header + comparison_csv(cmp));
  Logger log(out);
  log("wrote " + layout.summary().string() + " and " + layout.comparison().string());
  return summary;
}

std::string cmd_dump_codebook(const std::filesystem::path& model, const std::string& layer) {
  require_file(model, "quantize");
  const ModelFile m = load_model(model);
  require(m.params.quant.has_value(), ErrorClass::State, model.string() + " is not a quantized model");
  const QuantState& q = *m.params.quant;
  if (layer == "input" || layer == "conv_out" || layer == "hidden") {
    require(q.activations.has_value(), ErrorClass::State, model.string() + " has no activation codebooks");
    const auto& a = *q.activations;
    const auto& book = layer == "input" ? a.input : layer == "conv_out" ? a.conv_out : a.hidden;
    require(book.has_value(), ErrorClass::State, "activation codebook " + layer + " is missing");
    return codebook_csv(*book);
  }
  return codebook_csv(q.book(parse_layer(layer)));
}

}  // namespace qfeq
