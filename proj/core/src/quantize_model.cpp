#include "qfeq/quantize_model.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

template <typename M>
void append(std::vector<double>& out, const M& m) {
  out.insert(out.end(), m.data(), m.data() + m.size());
}

std::vector<double> layer_values(const ModelParams& p, Layer l, bool with_biases) {
  std::vector<double> v;
  switch (l) {
    case Layer::ConvX:
      append(v, p.w.conv_x.re);
      append(v, p.w.conv_x.im);
      break;
    case Layer::ConvY: {
      const FilterPair& f = p.share_filters ? p.w.conv_x : p.w.conv_y;
      append(v, f.re);
      append(v, f.im);
      break;
    }
    case Layer::Dense:
      append(v, p.w.dense_w);
      if (with_biases) append(v, p.w.dense_b);
      break;
    case Layer::Head:
      append(v, p.w.head_w);
      if (with_biases) append(v, p.w.head_b);
      break;
  }
  return v;
}

std::pair<double, double> non_degenerate(std::pair<double, double> r) {
  if (r.first < r.second) return r;
  const double pad = 1e-12 * std::max(1.0, std::abs(r.first));
  return {r.first - pad, r.second + pad};
}

template <typename M>
void project(M& m, const Codebook& book) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = book.quantize(m.data()[i]).value;
}

}  // namespace

std::string to_string(QuantMode m) { return m == QuantMode::Ptq ? "ptq" : "taq"; }

void QuantScheme::validate() const {
  require(b1 >= 2 && b1 <= 16 && b2 >= 2 && b2 <= 16, ErrorClass::Config,
          "scheme '" + label + "': b1 and b2 must lie in [2, 16]");
  if (activation_bits)
    require(*activation_bits >= 2 && *activation_bits <= 16, ErrorClass::Config,
            "scheme '" + label + "': activation_bits must lie in [2, 16]");
  if (scheme == Scheme::Apot) {
    require(apot_base_bits >= 1, ErrorClass::Config, "scheme '" + label + "': apot_base_bits must be >= 1");
    require(b1 % apot_base_bits == 0 && b2 % apot_base_bits == 0, ErrorClass::Config,
            "scheme '" + label + "': b1 and b2 must be multiples of apot_base_bits");
  }
  if (range.kind == RangeMode::Kind::Static)
    require(range.a < range.c, ErrorClass::Config, "scheme '" + label + "': static range needs a < c");
}

QuantScheme QuantScheme::parse(const std::string& label) {
  QuantScheme s;
  s.label = label;
  std::string lower = label;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  static const std::regex alias(R"((taq|ptq|apot)-(\d+))");
  static const std::regex generic(R"((ptq|taq)-(uniform|pot|apot)-(\d+)(?:/(\d+))?)");
  std::smatch m;
  if (std::regex_match(lower, m, generic)) {
    s.mode = m[1] == "ptq" ? QuantMode::Ptq : QuantMode::Taq;
    s.scheme = parse_scheme(m[2]);
    s.b1 = std::stoi(m[3]);
    s.b2 = m[4].matched ? std::stoi(m[4]) : s.b1;
  } else if (std::regex_match(lower, m, alias)) {
    const int b = std::stoi(m[2]);
    if (m[1] == "taq") {
      s.mode = QuantMode::Taq;
      s.b1 = s.b2 = b;
    } else {
      s.mode = QuantMode::Ptq;
      s.scheme = m[1] == "apot" ? Scheme::Apot : Scheme::Uniform;
      s.b1 = 6;
      s.b2 = b;
    }
  } else {
    raise(ErrorClass::Config, "unrecognised scheme label '" + label + "'");
  }
  s.validate();
  return s;
}

std::vector<Codebook> build_weight_books(const ModelParams& params, const QuantScheme& scheme) {
  scheme.validate();
  std::vector<Codebook> books;
  for (Layer l : kLayers) {
    const auto values = layer_values(params, l, !scheme.keep_biases_full_precision);
    const auto [a, c] = non_degenerate(calibrate_range(values, scheme.range));
    const int bits = scheme.bits_for(l);
    const double peak = std::max({std::abs(a), std::abs(c), 1e-12});
    switch (scheme.scheme) {
      case Scheme::Uniform: books.push_back(Codebook::uniform(a, c, bits)); break;
      case Scheme::Pot: books.push_back(Codebook::pot(peak, bits, scheme.strict_pot)); break;
      case Scheme::Apot:
        books.push_back(
            Codebook::apot(peak / apot_max_magnitude(bits, scheme.apot_base_bits), 0.0, bits, scheme.apot_base_bits));
        break;
    }
  }
  if (params.share_filters) books[static_cast<std::size_t>(Layer::ConvY)] = books[static_cast<std::size_t>(Layer::ConvX)];
  return books;
}

ModelParams apply_quant_state(const ModelParams& params, const QuantState& state) {
  require(state.layer_books.size() == kLayers.size(), ErrorClass::State, "quant state needs four layer books");
  ModelParams q = params;
  q.quant = state;
  project(q.w.conv_x.re, state.book(Layer::ConvX));
  project(q.w.conv_x.im, state.book(Layer::ConvX));
  if (q.share_filters) {
    q.w.conv_y = q.w.conv_x;
  } else {
    project(q.w.conv_y.re, state.book(Layer::ConvY));
    project(q.w.conv_y.im, state.book(Layer::ConvY));
  }
  project(q.w.dense_w, state.book(Layer::Dense));
  project(q.w.head_w, state.book(Layer::Head));
  if (state.biases_quantized) {
    project(q.w.dense_b, state.book(Layer::Dense));
    project(q.w.head_b, state.book(Layer::Head));
  }
  return q;
}

ActivationBooks calibrate_activations(const ModelParams& quantized_weights, int activation_bits,
                                      const RangeMode& range, const SampleStreams& streams,
                                      std::span<const std::size_t> starts) {
  require(!starts.empty(), ErrorClass::Length, "activation calibration needs at least one window");
  const RangeMode mode = RangeMode::dynamic(range.kind == RangeMode::Kind::Dynamic ? range.percentile : std::nullopt);
  auto book_from = [&](std::span<const double> v) {
    const auto [a, c] = non_degenerate(calibrate_range(v, mode));
    return Codebook::uniform(a, c, activation_bits);
  };

  ModelParams p = quantized_weights;
  if (!p.quant) p.quant = QuantState{};
  ActivationBooks books;

  std::vector<double> inputs;
  const auto w = static_cast<std::size_t>(p.window_len);
  std::size_t covered = 0;  // windows overlap; visit each sample once
  for (std::size_t s : starts) {
    const std::size_t from = std::max(s, covered);
    for (std::size_t i = from; i < s + w && i < streams.length(); ++i) {
      inputs.push_back(streams.x_re[i]);
      inputs.push_back(streams.x_im[i]);
      inputs.push_back(streams.y_re[i]);
      inputs.push_back(streams.y_im[i]);
    }
    covered = std::max(covered, s + w);
  }
  books.input = book_from(inputs);

  ForwardCache cache;
  p.quant->activations = books;
  forward_batch(streams, starts, p, &cache);
  books.conv_out = book_from({cache.conv.data(), static_cast<std::size_t>(cache.conv.size())});

  p.quant->activations = books;
  forward_batch(streams, starts, p, &cache);
  books.hidden = book_from({cache.hidden.data(), static_cast<std::size_t>(cache.hidden.size())});
  return books;
}

ModelParams quantize_model_ptq(const ModelParams& params, const QuantScheme& scheme, const SampleStreams& streams,
                               std::span<const std::size_t> calibration_starts) {
  require(scheme.mode == QuantMode::Ptq, ErrorClass::Mode,
          "scheme '" + scheme.label + "' is training-aware; use train_taq");
  params.validate();
  QuantState state;
  state.layer_books = build_weight_books(params, scheme);
  state.biases_quantized = !scheme.keep_biases_full_precision;
  ModelParams q = apply_quant_state(params, state);
  if (scheme.activation_bits) {
    q.quant->activations =
        calibrate_activations(q, *scheme.activation_bits, scheme.range, streams, calibration_starts);
  }
  return q;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = params.w.count();
  if (params.share_filters) n -= static_cast<std::size_t>(2 * kConvTaps);
  return n;
}

std::size_t model_size_bits(const ModelParams& params) {
  if (!params.quant) return 32 * parameter_count(params);
  const QuantState& q = *params.quant;
  std::size_t bits = 0;
  auto layer = [&](Layer l, std::size_t weights, std::size_t biases) {
    const Codebook& book = q.book(l);
    const auto b = static_cast<std::size_t>(book.bits());
    bits += b * weights;
    bits += q.biases_quantized ? b * biases : 32 * biases;
    bits += 32 * static_cast<std::size_t>(book.stored_scalars());
  };
  layer(Layer::ConvX, 2 * kConvTaps, 0);
  if (!params.share_filters) layer(Layer::ConvY, 2 * kConvTaps, 0);
  layer(Layer::Dense, static_cast<std::size_t>(params.w.dense_w.size()), static_cast<std::size_t>(params.w.dense_b.size()));
  layer(Layer::Head, static_cast<std::size_t>(params.w.head_w.size()), static_cast<std::size_t>(params.w.head_b.size()));
  return bits;
}

}  // namespace qfeq
