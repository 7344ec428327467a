#include "qfeq/model.hpp"

#include <cmath>
#include <string>

#include "qfeq/errors.hpp"
#include "qfeq/rng.hpp"

namespace qfeq {
namespace {

template <typename Derived>
void quantize_in_place(Eigen::MatrixBase<Derived>& m, const Codebook& book) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = book.quantize(m(i, j)).value;
}

void quantize_vector(std::vector<double>& v, const Codebook& book) {
  for (auto& x : v) x = book.quantize(x).value;
}

const FilterPair& filters_y(const ModelParams& p) { return p.share_filters ? p.w.conv_x : p.w.conv_y; }

// Hankel matrix of one stream: row (b*L + j), column t holds u[start_b + j + 40 - t].
void build_hankel(RowMatrix& h, const std::vector<double>& u, std::span<const std::size_t> starts, int out_len,
                  const Codebook* input_book) {
  const auto batch = static_cast<Eigen::Index>(starts.size());
  const std::size_t span_len = static_cast<std::size_t>(out_len + kConvTaps - 1);
  h.resize(batch * out_len, kConvTaps);
  std::vector<double> window(span_len);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const std::size_t s = starts[static_cast<std::size_t>(b)];
    std::copy_n(u.begin() + static_cast<long>(s), span_len, window.begin());
    if (input_book != nullptr) quantize_vector(window, *input_book);
    for (int j = 0; j < out_len; ++j) {
      double* row = h.row(b * out_len + j).data();
      const double* base = window.data() + j;
      for (int t = 0; t < kConvTaps; ++t) row[t] = base[kConvTaps - 1 - t];
    }
  }
}

}  // namespace

void InputWindow::validate() const {
  require(x_im.size() == x_re.size() && y_re.size() == x_re.size() && y_im.size() == x_re.size(), ErrorClass::Shape,
          "input window vectors differ in length");
  require(x_re.size() >= static_cast<std::size_t>(kConvTaps), ErrorClass::Shape,
          "input window shorter than " + std::to_string(kConvTaps) + " samples");
}

Weights Weights::zeros(int dense_in) {
  Weights w;
  w.dense_w = RowMatrix::Zero(kDenseUnits, dense_in);
  w.dense_b = Eigen::VectorXd::Zero(kDenseUnits);
  w.head_w = RowMatrix::Zero(kOutputs, kDenseUnits);
  w.head_b = Eigen::VectorXd::Zero(kOutputs);
  return w;
}

void Weights::for_each(const std::function<void(std::string_view, std::span<double>)>& fn) {
  fn("conv_x.re", {conv_x.re.data(), static_cast<std::size_t>(conv_x.re.size())});
  fn("conv_x.im", {conv_x.im.data(), static_cast<std::size_t>(conv_x.im.size())});
  fn("conv_y.re", {conv_y.re.data(), static_cast<std::size_t>(conv_y.re.size())});
  fn("conv_y.im", {conv_y.im.data(), static_cast<std::size_t>(conv_y.im.size())});
  fn("dense.w", {dense_w.data(), static_cast<std::size_t>(dense_w.size())});
  fn("dense.b", {dense_b.data(), static_cast<std::size_t>(dense_b.size())});
  fn("head.w", {head_w.data(), static_cast<std::size_t>(head_w.size())});
  fn("head.b", {head_b.data(), static_cast<std::size_t>(head_b.size())});
}

void Weights::for_each(const std::function<void(std::string_view, std::span<const double>)>& fn) const {
  const_cast<Weights*>(this)->for_each(
      [&](std::string_view name, std::span<double> v) { fn(name, std::span<const double>(v.data(), v.size())); });
}

std::size_t Weights::count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, std::span<const double> v) { n += v.size(); });
  return n;
}

std::string_view to_string(Layer layer) {
  switch (layer) {
    case Layer::ConvX: return "conv_x";
    case Layer::ConvY: return "conv_y";
    case Layer::Dense: return "dense";
    case Layer::Head: return "head";
  }
  return "?";
}

Layer parse_layer(std::string_view name) {
  for (Layer l : kLayers)
    if (to_string(l) == name) return l;
  raise(ErrorClass::Config, "unknown layer '" + std::string(name) + "'");
}

void ModelParams::validate() const {
  require(window_len >= kConvTaps, ErrorClass::Shape, "window_len must be >= 41");
  auto check_filter = [](const FilterPair& f) {
    require(f.re.size() == kConvTaps && f.im.size() == kConvTaps, ErrorClass::Shape, "conv filters need 41 taps");
  };
  check_filter(w.conv_x);
  check_filter(w.conv_y);
  require(w.dense_w.rows() == kDenseUnits && w.dense_w.cols() == dense_in(), ErrorClass::Shape,
          "dense weight shape does not match window_len");
  require(w.dense_b.size() == kDenseUnits, ErrorClass::Shape, "dense bias shape");
  require(w.head_w.rows() == kOutputs && w.head_w.cols() == kDenseUnits, ErrorClass::Shape, "head weight shape");
  require(w.head_b.size() == kOutputs, ErrorClass::Shape, "head bias shape");
  if (!quant) return;
  require(quant->layer_books.size() == kLayers.size(), ErrorClass::State, "quantized model needs four layer books");
  auto members = [](std::span<const double> v, const Codebook& book, std::string_view what) {
    for (double x : v)
      require(book.contains(x), ErrorClass::State, std::string(what) + " weight is not a codebook member");
  };
  auto span_of = [](const auto& m) { return std::span<const double>(m.data(), static_cast<std::size_t>(m.size())); };
  members(span_of(w.conv_x.re), quant->book(Layer::ConvX), "conv_x");
  members(span_of(w.conv_x.im), quant->book(Layer::ConvX), "conv_x");
  if (!share_filters) {
    members(span_of(w.conv_y.re), quant->book(Layer::ConvY), "conv_y");
    members(span_of(w.conv_y.im), quant->book(Layer::ConvY), "conv_y");
  }
  members(span_of(w.dense_w), quant->book(Layer::Dense), "dense");
  members(span_of(w.head_w), quant->book(Layer::Head), "head");
  if (quant->biases_quantized) {
    members(span_of(w.dense_b), quant->book(Layer::Dense), "dense bias");
    members(span_of(w.head_b), quant->book(Layer::Head), "head bias");
  }
}

ModelParams init_model(int window_len, bool share_filters, std::uint64_t seed) {
  require(window_len >= kConvTaps, ErrorClass::Shape, "window_len must be >= 41");
  ModelParams p;
  p.window_len = window_len;
  p.share_filters = share_filters;
  p.w = Weights::zeros(p.dense_in());
  Rng rng = make_rng(derive_seed(seed, {stream::kInit}));
  std::normal_distribution<double> small(0.0, 0.01);
  for (FilterPair* f : {&p.w.conv_x, &p.w.conv_y}) {
    for (int t = 0; t < kConvTaps; ++t) {
      f->re[t] = small(rng);
      f->im[t] = small(rng);
    }
    f->re[kConvTaps / 2] += 1.0;
  }
  if (share_filters) p.w.conv_y = p.w.conv_x;
  auto xavier = [&](RowMatrix& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  xavier(p.w.dense_w);
  xavier(p.w.head_w);
  return p;
}

ComplexSeq complex_conv(std::span<const double> u_re, std::span<const double> u_im, const FilterPair& filters) {
  require(u_re.size() == u_im.size(), ErrorClass::Shape, "real and imaginary inputs differ in length");
  require(u_re.size() >= static_cast<std::size_t>(kConvTaps), ErrorClass::Shape,
          "window shorter than " + std::to_string(kConvTaps) + " samples");
  require(filters.re.size() == kConvTaps && filters.im.size() == kConvTaps, ErrorClass::Shape,
          "conv filters need 41 taps");
  const std::size_t out_len = u_re.size() - kConvTaps + 1;
  ComplexSeq out{std::vector<double>(out_len), std::vector<double>(out_len)};
  for (std::size_t j = 0; j < out_len; ++j) {
    double rr = 0.0, ii = 0.0, ri = 0.0, ir = 0.0;
    for (int t = 0; t < kConvTaps; ++t) {
      const std::size_t k = j + kConvTaps - 1 - static_cast<std::size_t>(t);
      rr += filters.re[t] * u_re[k];
      ii += filters.im[t] * u_im[k];
      ri += filters.re[t] * u_im[k];
      ir += filters.im[t] * u_re[k];
    }
    out.re[j] = rr - ii;
    out.im[j] = ri + ir;
  }
  return out;
}

Output forward(const InputWindow& window, const ModelParams& params) {
  window.validate();
  require(window.length() == static_cast<std::size_t>(params.window_len), ErrorClass::Shape,
          "window length does not match the model");
  const ActivationBooks* act =
      params.quant && params.quant->activations ? &*params.quant->activations : nullptr;

  InputWindow in = window;
  if (act != nullptr) {
    if (act->input)
      for (auto* v : {&in.x_re, &in.x_im, &in.y_re, &in.y_im}) quantize_vector(*v, *act->input);
  }
  const ComplexSeq cx = complex_conv(in.x_re, in.x_im, params.w.conv_x);
  const ComplexSeq cy = complex_conv(in.y_re, in.y_im, filters_y(params));
  const int l = params.conv_out_len();
  Eigen::VectorXd x(params.dense_in());
  for (int j = 0; j < l; ++j) {
    x[j] = cx.re[static_cast<std::size_t>(j)];
    x[l + j] = cx.im[static_cast<std::size_t>(j)];
    x[2 * l + j] = cy.re[static_cast<std::size_t>(j)];
    x[3 * l + j] = cy.im[static_cast<std::size_t>(j)];
  }
  if (act != nullptr && act->conv_out) quantize_in_place(x, *act->conv_out);
  Eigen::VectorXd h = (params.w.dense_w * x + params.w.dense_b).array().tanh().matrix();
  if (act != nullptr && act->hidden) quantize_in_place(h, *act->hidden);
  const Eigen::VectorXd y = params.w.head_w * h + params.w.head_b;
  return {y[0], y[1], y[2], y[3]};
}

SampleStreams SampleStreams::from_field(const ComplexField& field) {
  SampleStreams s;
  const std::size_t n = field.length();
  s.x_re.resize(n);
  s.x_im.resize(n);
  s.y_re.resize(n);
  s.y_im.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.x_re[i] = field.x[i].real();
    s.x_im[i] = field.x[i].imag();
    s.y_re[i] = field.y[i].real();
    s.y_im[i] = field.y[i].imag();
  }
  return s;
}

InputWindow SampleStreams::window(std::size_t start, int window_len) const {
  const auto len = static_cast<std::size_t>(window_len);
  require(start + len <= length(), ErrorClass::Length, "window extends past the end of the stream");
  auto slice = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<long>(start), v.begin() + static_cast<long>(start + len));
  };
  return {slice(x_re), slice(x_im), slice(y_re), slice(y_im)};
}

RowMatrix forward_batch(const SampleStreams& streams, std::span<const std::size_t> starts, const ModelParams& params,
                        ForwardCache* cache) {
  const int l = params.conv_out_len();
  const auto batch = static_cast<Eigen::Index>(starts.size());
  for (std::size_t s : starts)
    require(s + static_cast<std::size_t>(params.window_len) <= streams.length(), ErrorClass::Length,
            "window extends past the end of the stream");
  const ActivationBooks* act =
      params.quant && params.quant->activations ? &*params.quant->activations : nullptr;

  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  const Codebook* in_book = act != nullptr && act->input ? &*act->input : nullptr;
  build_hankel(c.hankel[0], streams.x_re, starts, l, in_book);
  build_hankel(c.hankel[1], streams.x_im, starts, l, in_book);
  build_hankel(c.hankel[2], streams.y_re, starts, l, in_book);
  build_hankel(c.hankel[3], streams.y_im, starts, l, in_book);

  const FilterPair& fx = params.w.conv_x;
  const FilterPair& fy = filters_y(params);
  c.conv.resize(batch, params.dense_in());
  auto place = [&](int block, const Eigen::VectorXd& flat) {
    c.conv.middleCols(block * l, l) = Eigen::Map<const RowMatrix>(flat.data(), batch, l);
  };
  place(0, c.hankel[0] * fx.re - c.hankel[1] * fx.im);
  place(1, c.hankel[0] * fx.im + c.hankel[1] * fx.re);
  place(2, c.hankel[2] * fy.re - c.hankel[3] * fy.im);
  place(3, c.hankel[2] * fy.im + c.hankel[3] * fy.re);

  c.dense_in = c.conv;
  if (act != nullptr && act->conv_out) quantize_in_place(c.dense_in, *act->conv_out);
  c.hidden = ((c.dense_in * params.w.dense_w.transpose()).rowwise() + params.w.dense_b.transpose()).array().tanh();
  c.hidden_q = c.hidden;
  if (act != nullptr && act->hidden) quantize_in_place(c.hidden_q, *act->hidden);
  c.output = (c.hidden_q * params.w.head_w.transpose()).rowwise() + params.w.head_b.transpose();
  return c.output;
}

Weights backward_batch(const ForwardCache& cache, const RowMatrix& grad_output, const ModelParams& params) {
  const int l = params.conv_out_len();
  const Eigen::Index batch = grad_output.rows();
  Weights g = Weights::zeros(params.dense_in());

  g.head_w = grad_output.transpose() * cache.hidden_q;
  g.head_b = grad_output.colwise().sum().transpose();
  const RowMatrix grad_h = grad_output * params.w.head_w;
  const RowMatrix grad_z = grad_h.array() * (1.0 - cache.hidden.array().square());
  g.dense_w = grad_z.transpose() * cache.dense_in;
  g.dense_b = grad_z.colwise().sum().transpose();
  const RowMatrix grad_x = grad_z * params.w.dense_w;

  auto block = [&](int k) {
    const RowMatrix part = grad_x.middleCols(k * l, l);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(part.data(), batch * l));
  };
  const Eigen::VectorXd gx_re = block(0), gx_im = block(1), gy_re = block(2), gy_im = block(3);
  g.conv_x.re = cache.hankel[0].transpose() * gx_re + cache.hankel[1].transpose() * gx_im;
  g.conv_x.im = cache.hankel[0].transpose() * gx_im - cache.hankel[1].transpose() * gx_re;
  FilterPair gy;
  gy.re = cache.hankel[2].transpose() * gy_re + cache.hankel[3].transpose() * gy_im;
  gy.im = cache.hankel[2].transpose() * gy_im - cache.hankel[3].transpose() * gy_re;
  if (params.share_filters) {
    g.conv_x.re += gy.re;
    g.conv_x.im += gy.im;
  } else {
    g.conv_y = gy;
  }
  return g;
}

SymbolFrame slide_equalize(const ComplexField& field, const ModelParams& params) {
  field.validate();
  const auto w = static_cast<std::size_t>(params.window_len);
  require(field.length() >= w, ErrorClass::Length, "field shorter than one input window");
  const std::size_t count = (field.length() - w) / 2 + 1;
  const SampleStreams streams = SampleStreams::from_field(field);
  SymbolFrame out;
  out.x.resize(count);
  out.y.resize(count);
  constexpr std::size_t kChunk = 1024;
  std::vector<std::size_t> starts;
  for (std::size_t lo = 0; lo < count; lo += kChunk) {
    const std::size_t hi = std::min(count, lo + kChunk);
    starts.clear();
    for (std::size_t k = lo; k < hi; ++k) starts.push_back(2 * k);
    const RowMatrix y = forward_batch(streams, starts, params);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto r = static_cast<Eigen::Index>(k - lo);
      out.x[k] = {y(r, 0), y(r, 1)};
      out.y[k] = {y(r, 2), y(r, 3)};
    }
  }
  return out;
}

}  // namespace qfeq
