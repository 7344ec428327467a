#include "qfeq/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "qfeq/binary_io.hpp"
#include "qfeq/dsp.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/model_io.hpp"
#include "qfeq/rng.hpp"

namespace qfeq {
namespace {

std::vector<double> flatten(const Weights& w) {
  std::vector<double> out;
  out.reserve(w.count());
  w.for_each([&](std::string_view, std::span<const double> v) { out.insert(out.end(), v.begin(), v.end()); });
  return out;
}

void unflatten(Weights& w, std::span<const double> flat) {
  std::size_t pos = 0;
  w.for_each([&](std::string_view, std::span<double> v) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos), flat.begin() + static_cast<std::ptrdiff_t>(pos + v.size()),
              v.begin());
    pos += v.size();
  });
}

class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

Layer layer_of(std::string_view tensor) {
  return parse_layer(tensor.substr(0, tensor.find('.')));
}

bool is_bias(std::string_view tensor) { return tensor.ends_with(".b"); }

std::vector<std::span<double>> spans_of(Weights& w) {
  std::vector<std::span<double>> out;
  w.for_each([&](std::string_view, std::span<double> v) { out.push_back(v); });
  return out;
}

std::vector<std::string> names_of(const Weights& w) {
  std::vector<std::string> out;
  w.for_each([&](std::string_view n, std::span<const double>) { out.emplace_back(n); });
  return out;
}

std::vector<std::size_t> all_windows(const IndexRange& r) {
  std::vector<std::size_t> out(r.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r.begin + i;
  return out;
}

std::vector<std::size_t> calibration_starts(const Dataset& data, int limit) {
  const std::size_t n = data.train.size();
  const std::size_t take = limit <= 0 ? n : std::min<std::size_t>(n, static_cast<std::size_t>(limit));
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(data.start_of(data.train.begin + i * n / take));
  return out;
}

void check_finite(double loss, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "loss became non-finite (" << loss << ") at epoch " << epoch << ", batch " << batch
       << "; try a smaller learning rate";
    raise(ErrorClass::Training, os.str());
  }
}

struct EarlyStop {
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since = 0;

  /// True when this epoch is the new best.
  bool update(double val, int epoch) {
    if (val < best) {
      best = val;
      best_epoch = epoch;
      since = 0;
      return true;
    }
    ++since;
    return false;
  }
};

}  // namespace

std::string to_string(TaqGrad g) { return g == TaqGrad::Ste ? "ste" : "clipped-ste"; }

TaqGrad parse_taq_grad(const std::string& text) {
  if (text == "ste") return TaqGrad::Ste;
  if (text == "clipped-ste") return TaqGrad::ClippedSte;
  raise(ErrorClass::Config, "taq_grad must be 'ste' or 'clipped-ste', got '" + text + "'");
}

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorClass::Config, "train.epochs must be >= 1");
  require(taq_epochs >= 0, ErrorClass::Config, "train.taq_epochs must be >= 0");
  require(batch_size >= 1, ErrorClass::Config, "train.batch_size must be >= 1");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorClass::Config,
          "train.learning_rate must be positive");
  require(patience >= 1, ErrorClass::Config, "train.patience must be >= 1");
  require(calibration_windows >= 0, ErrorClass::Config, "train.calibration_windows must be >= 0");
}

void SplitFractions::validate() const {
  require(train > 0.0 && validation >= 0.0 && test >= 0.0, ErrorClass::Config,
          "split fractions must be non-negative with a positive training share");
  require(std::abs(train + validation + test - 1.0) < 1e-9, ErrorClass::Config, "split fractions must sum to 1");
}

void Dataset::validate() const {
  require(window_len >= kConvTaps, ErrorClass::Shape, "dataset window_len must be >= 41");
  require(windows() == 0 || streams.length() >= 2 * (windows() - 1) + static_cast<std::size_t>(window_len),
          ErrorClass::Length, "dataset streams too short for its windows");
  for (const IndexRange* r : {&train, &validation, &test})
    require(r->begin <= r->end && r->end <= windows(), ErrorClass::Length, "dataset split out of range");
  require(train.end <= validation.begin || validation.size() == 0, ErrorClass::State, "train/validation overlap");
  require(validation.end <= test.begin || test.size() == 0, ErrorClass::State, "validation/test overlap");
}

Dataset build_dataset(const SymbolFrame& tx, const ComplexField& rx, int window_len, const SplitFractions& split) {
  split.validate();
  rx.validate();
  require(window_len >= kConvTaps && window_len % 2 == 1, ErrorClass::Shape, "window_len must be odd and >= 41");
  require(tx.x.size() == tx.y.size(), ErrorClass::Length, "tx polarizations differ in length");
  const std::size_t n = tx.x.size();
  require(rx.length() == 2 * n, ErrorClass::Length, "rx field must hold exactly 2 samples per tx symbol");
  const auto w = static_cast<std::size_t>(window_len);
  require(2 * n >= w, ErrorClass::Length, "frame shorter than one window");

  const SymbolFrame instants = take_symbol_instants(rx, 2);
  for (int p = 0; p < 2; ++p) {
    const CVec& r = p == 0 ? instants.x : instants.y;
    const CVec& t = p == 0 ? tx.x : tx.y;
    cplx acc{};
    double er = 0.0;
    double et = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += r[k] * std::conj(t[k]);
      er += std::norm(r[k]);
      et += std::norm(t[k]);
    }
    const double corr = er > 0.0 && et > 0.0 ? std::abs(acc) / std::sqrt(er * et) : 0.0;
    require(corr >= kSyncThreshold, ErrorClass::State,
            "received field is not synchronized to the transmitted frame (run synchronize_scale first)");
  }

  Dataset d;
  d.window_len = window_len;
  d.streams = SampleStreams::from_field(rx);
  const std::size_t count = (2 * n - w) / 2 + 1;
  const auto off = static_cast<std::size_t>(center_offset(window_len));
  d.targets.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const cplx a = tx.x[k + off];
    const cplx b = tx.y[k + off];
    d.targets[k] = {a.real(), a.imag(), b.real(), b.imag()};
  }

  // symbol blocks [s0, s1), [s1, s2), [s2, n); window k fits block [lo, hi)
  // when k >= lo and 2k + w <= 2 hi
  const auto s1 = static_cast<std::size_t>(std::llround(split.train * static_cast<double>(n)));
  const auto s2 = static_cast<std::size_t>(std::llround((split.train + split.validation) * static_cast<double>(n)));
  auto block = [&](std::size_t lo, std::size_t hi) {
    IndexRange r;
    r.begin = std::min(lo, count);
    const std::size_t last_plus = 2 * hi >= w ? (2 * hi - w) / 2 + 1 : 0;
    r.end = std::max(r.begin, std::min(last_plus, count));
    return r;
  };
  d.train = block(0, s1);
  d.validation = block(s1, s2);
  d.test = block(s2, n);
  require(d.train.size() > 0, ErrorClass::Length, "training split holds no complete window");
  return d;
}

std::vector<std::size_t> window_starts(const Dataset& data, const IndexRange& range) {
  std::vector<std::size_t> out(range.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = data.start_of(range.begin + i);
  return out;
}

double mean_squared_error(const ModelParams& params, const Dataset& data, const IndexRange& range) {
  require(range.size() > 0, ErrorClass::Length, "empty evaluation range");
  constexpr std::size_t kChunk = 4096;
  double sum = 0.0;
  std::vector<std::size_t> starts;
  for (std::size_t b = range.begin; b < range.end; b += kChunk) {
    const std::size_t e = std::min(range.end, b + kChunk);
    starts.clear();
    for (std::size_t k = b; k < e; ++k) starts.push_back(data.start_of(k));
    const RowMatrix out = forward_batch(data.streams, starts, params);
    for (std::size_t i = 0; i < starts.size(); ++i)
      for (int o = 0; o < kOutputs; ++o) {
        const double r = out(static_cast<Eigen::Index>(i), o) - data.targets[b + i][static_cast<std::size_t>(o)];
        sum += r * r;
      }
  }
  return sum / static_cast<double>(range.size() * kOutputs);
}

std::pair<double, Weights> loss_and_gradient(const ModelParams& params, const Dataset& data,
                                             std::span<const std::size_t> windows) {
  require(!windows.empty(), ErrorClass::Length, "empty batch");
  std::vector<std::size_t> starts(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) starts[i] = data.start_of(windows[i]);
  ForwardCache cache;
  const RowMatrix out = forward_batch(data.streams, starts, params, &cache);
  RowMatrix grad(out.rows(), out.cols());
  const double norm = 1.0 / static_cast<double>(windows.size() * kOutputs);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (int o = 0; o < kOutputs; ++o) {
      const double r = out(i, o) - data.targets[windows[static_cast<std::size_t>(i)]][static_cast<std::size_t>(o)];
      loss += r * r;
      grad(i, o) = 2.0 * r * norm;
    }
  return {loss * norm, backward_batch(cache, grad, params)};
}

TrainResult train_fp32(const Dataset& data, const TrainConfig& cfg, bool share_filters, const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  require(data.train.size() > 0, ErrorClass::Length, "training split is empty");

  ModelParams params = init_model(data.window_len, share_filters, derive_seed(cfg.seed, {stream::kInit}));
  std::vector<double> flat = flatten(params.w);
  Adam adam(flat.size(), cfg.learning_rate);

  TrainResult result;
  result.params = params;
  EarlyStop stop;
  std::vector<std::size_t> order = all_windows(data.train);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, derive_seed(cfg.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)}));
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(batch, order.size() - b));
      auto [loss, grad] = loss_and_gradient(params, data, idx);
      check_finite(loss, epoch, b / batch);
      sum += loss * static_cast<double>(idx.size());
      const std::vector<double> g = flatten(grad);
      adam.step(flat, g);
      unflatten(params.w, flat);
      if (share_filters) params.w.conv_y = params.w.conv_x;
    }
    EpochLog log{epoch, sum / static_cast<double>(order.size()), 0.0};
    log.validation_mse =
        data.validation.size() > 0 ? mean_squared_error(params, data, data.validation) : log.train_mse;
    check_finite(log.validation_mse, epoch, 0);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stop.update(log.validation_mse, epoch)) result.params = params;
    if (stop.since >= cfg.patience) break;
  }
  result.best_epoch = stop.best_epoch;
  return result;
}

TaqGradient taq_gradient(const ModelParams& latent, const QuantState& state, TaqGrad mode, const Dataset& data,
                         std::span<const std::size_t> windows) {
  const ModelParams q = apply_quant_state(latent, state);
  auto [loss, g] = loss_and_gradient(q, data, windows);

  TaqGradient out;
  out.loss = loss;
  out.scale.assign(kLayers.size(), 0.0);
  out.shift.assign(kLayers.size(), 0.0);

  Weights lat = latent.w;
  Weights qw = q.w;
  const auto names = names_of(g);
  const auto gs = spans_of(g);
  const auto ls = spans_of(lat);
  const auto qs = spans_of(qw);
  for (std::size_t t = 0; t < names.size(); ++t) {
    if (is_bias(names[t]) && !state.biases_quantized) continue;
    const Layer l = layer_of(names[t]);
    const Codebook& book = state.book(l);
    const double lo = book.symbols().front();
    const double hi = book.symbols().back();
    const bool scaled = book.scheme() != Scheme::Uniform;
    const auto li = static_cast<std::size_t>(l);
    for (std::size_t i = 0; i < gs[t].size(); ++i) {
      if (scaled) {
        const double m = (qs[t][i] - book.term_shift()) / book.term_scale();
        out.scale[li] += gs[t][i] * m;
        out.shift[li] += gs[t][i];
      }
      if (mode == TaqGrad::ClippedSte && (ls[t][i] < lo || ls[t][i] > hi)) gs[t][i] = 0.0;
    }
  }
  out.latent = std::move(g);
  return out;
}

TrainResult train_taq(const Dataset& data, const QuantScheme& scheme, const TrainConfig& cfg,
                      const std::optional<ModelParams>& init, bool share_filters, const EpochCallback& on_epoch) {
  require(scheme.mode == QuantMode::Taq, ErrorClass::Mode, "train_taq needs a taq scheme, got " + scheme.label);
  scheme.validate();
  cfg.validate();
  data.validate();
  require(data.train.size() > 0, ErrorClass::Length, "training split is empty");

  ModelParams latent;
  if (init) {
    latent = *init;
    latent.quant.reset();
    require(latent.window_len == data.window_len, ErrorClass::Shape, "initial model window does not match dataset");
  } else {
    latent = init_model(data.window_len, share_filters, derive_seed(cfg.seed, {stream::kInit}));
  }
  const bool shared = latent.share_filters;

  QuantState state;
  state.biases_quantized = !scheme.keep_biases_full_precision;
  state.layer_books = build_weight_books(latent, scheme);
  const std::vector<Codebook> base_books = state.layer_books;
  std::vector<double> scale(kLayers.size()), shift(kLayers.size()), floor_scale(kLayers.size());
  for (std::size_t l = 0; l < kLayers.size(); ++l) {
    scale[l] = base_books[l].term_scale();
    shift[l] = base_books[l].term_shift();
    floor_scale[l] = 1e-6 * scale[l];
  }
  const bool learn_scales = scheme.scheme != Scheme::Uniform;
  auto refresh_books = [&]() {
    for (std::size_t l = 0; l < kLayers.size(); ++l) state.layer_books[l] = base_books[l].rescaled(scale[l], shift[l]);
    if (shared) state.layer_books[static_cast<std::size_t>(Layer::ConvY)] = state.layer_books[0];
  };

  std::vector<double> flat = flatten(latent.w);
  Adam adam(flat.size(), cfg.learning_rate);
  std::vector<double> scale_params(2 * kLayers.size());
  Adam scale_adam(scale_params.size(), cfg.learning_rate);
  const auto cal = calibration_starts(data, cfg.calibration_windows);

  TrainResult result;
  EarlyStop stop;
  std::vector<std::size_t> order = all_windows(data.train);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  const int epochs = cfg.taq_epochs > 0 ? cfg.taq_epochs : cfg.epochs;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    if (learn_scales) {
      refresh_books();
    } else {
      state.layer_books = build_weight_books(latent, scheme);
    }
    state.activations.reset();
    if (scheme.activation_bits)
      state.activations =
          calibrate_activations(apply_quant_state(latent, state), *scheme.activation_bits, scheme.range, data.streams, cal);

    shuffle(order, derive_seed(cfg.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)}));
    double sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(batch, order.size() - b));
      TaqGradient tg = taq_gradient(latent, state, cfg.taq_grad, data, idx);
      check_finite(tg.loss, epoch, b / batch);
      sum += tg.loss * static_cast<double>(idx.size());
      adam.step(flat, flatten(tg.latent));
      unflatten(latent.w, flat);
      if (shared) latent.w.conv_y = latent.w.conv_x;
      if (learn_scales) {
        std::vector<double> g(scale_params.size(), 0.0);
        for (std::size_t l = 0; l < kLayers.size(); ++l) {
          scale_params[2 * l] = scale[l];
          scale_params[2 * l + 1] = shift[l];
          g[2 * l] = tg.scale[l];
          if (scheme.scheme == Scheme::Apot) g[2 * l + 1] = tg.shift[l];
        }
        scale_adam.step(scale_params, g);
        for (std::size_t l = 0; l < kLayers.size(); ++l) {
          scale[l] = std::max(scale_params[2 * l], floor_scale[l]);
          shift[l] = scale_params[2 * l + 1];
        }
        refresh_books();
      }
    }

    const ModelParams q = apply_quant_state(latent, state);
    EpochLog log{epoch, sum / static_cast<double>(order.size()), 0.0};
    log.validation_mse = data.validation.size() > 0 ? mean_squared_error(q, data, data.validation) : log.train_mse;
    check_finite(log.validation_mse, epoch, 0);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stop.update(log.validation_mse, epoch)) result.params = q;
    if (stop.since >= cfg.patience) break;
  }
  result.best_epoch = stop.best_epoch;
  return result;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, const SymbolFrame& tx,
                  std::uint64_t config_hash) {
  data.validate();
  std::vector<std::uint8_t> ids(16);
  for (int i = 0; i < 8; ++i) {
    ids[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(config_hash >> (8 * i));
    ids[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>(data.seed >> (8 * i));
  }
  const std::vector<double> meta = {static_cast<double>(data.window_len), data.launch_power_dbm,
                                    static_cast<double>(data.train.begin), static_cast<double>(data.train.end),
                                    static_cast<double>(data.validation.begin), static_cast<double>(data.validation.end),
                                    static_cast<double>(data.test.begin), static_cast<double>(data.test.end)};
  const std::size_t n = data.streams.length();
  CVec rx_x(n), rx_y(n);
  for (std::size_t i = 0; i < n; ++i) {
    rx_x[i] = {data.streams.x_re[i], data.streams.x_im[i]};
    rx_y[i] = {data.streams.y_re[i], data.streams.y_im[i]};
  }
  BinaryWriter w(FileKind::Dataset);
  w.add(std::span<const std::uint8_t>(ids)).add(std::span<const double>(meta));
  w.add(std::span<const cplx>(rx_x)).add(std::span<const cplx>(rx_y));
  w.add(std::span<const cplx>(tx.x)).add(std::span<const cplx>(tx.y));
  write_file_atomic(path, w.bytes());

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  std::ostringstream os;
  os << "config_hash " << hash << "\n"
     << "launch_power_dbm " << format_double(data.launch_power_dbm) << "\n"
     << "seed " << data.seed << "\n"
     << "window_len " << data.window_len << "\n"
     << "symbols " << tx.x.size() << "\n"
     << "samples " << n << "\n"
     << "windows " << data.windows() << "\n"
     << "train " << data.train.begin << " " << data.train.end << "\n"
     << "validation " << data.validation.begin << " " << data.validation.end << "\n"
     << "test " << data.test.begin << " " << data.test.end << "\n";
  auto sidecar = path;
  sidecar += ".txt";
  write_file_atomic(sidecar, os.str());
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), FileKind::Dataset);
  const auto ids = r.next_u8();
  const auto meta = r.next_f64();
  require(ids.size() == 16 && meta.size() == 8, ErrorClass::Format, "malformed dataset header in " + path.string());
  LoadedDataset out;
  for (int i = 0; i < 8; ++i) {
    out.config_hash |= static_cast<std::uint64_t>(ids[static_cast<std::size_t>(i)]) << (8 * i);
    out.data.seed |= static_cast<std::uint64_t>(ids[static_cast<std::size_t>(8 + i)]) << (8 * i);
  }
  ComplexField rx;
  rx.x = r.next_complex();
  rx.y = r.next_complex();
  out.tx.x = r.next_complex();
  out.tx.y = r.next_complex();
  require(r.done(), ErrorClass::Format, "trailing data in " + path.string());
  require(rx.x.size() == rx.y.size() && out.tx.x.size() == out.tx.y.size(), ErrorClass::Format,
          "polarization lengths differ in " + path.string());

  Dataset& d = out.data;
  d.window_len = static_cast<int>(meta[0]);
  d.launch_power_dbm = meta[1];
  d.streams = SampleStreams::from_field(rx);
  const std::size_t w = static_cast<std::size_t>(d.window_len);
  require(d.window_len >= kConvTaps && rx.x.size() >= w && rx.x.size() == 2 * out.tx.x.size(), ErrorClass::Format,
          "inconsistent dataset sizes in " + path.string());
  const std::size_t count = (rx.x.size() - w) / 2 + 1;
  const auto off = static_cast<std::size_t>(center_offset(d.window_len));
  d.targets.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const cplx a = out.tx.x[k + off];
    const cplx b = out.tx.y[k + off];
    d.targets[k] = {a.real(), a.imag(), b.real(), b.imag()};
  }
  d.train = {static_cast<std::size_t>(meta[2]), static_cast<std::size_t>(meta[3])};
  d.validation = {static_cast<std::size_t>(meta[4]), static_cast<std::size_t>(meta[5])};
  d.test = {static_cast<std::size_t>(meta[6]), static_cast<std::size_t>(meta[7])};
  try {
    d.validate();
  } catch (const Error& e) {
    raise(ErrorClass::Format, "inconsistent dataset " + path.string() + ": " + e.what());
  }
  return out;
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_mse,val_mse\n";
  for (const auto& e : log)
    out += std::to_string(e.epoch) + "," + format_double(e.train_mse) + "," + format_double(e.validation_mse) + "\n";
  return out;
}

}  // namespace qfeq
