#include "qfeq/int_inference.hpp"

#include <climits>
#include <cmath>

#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

std::int32_t checked_add(std::int32_t a, std::int32_t b) {
  std::int32_t out;
  if (__builtin_add_overflow(a, b, &out)) raise(ErrorClass::Overflow, "32-bit accumulator overflow");
  return out;
}

std::int32_t checked_mul(std::int32_t a, std::int32_t b) {
  std::int32_t out;
  if (__builtin_mul_overflow(a, b, &out)) raise(ErrorClass::Overflow, "32-bit product overflow");
  return out;
}

std::int32_t checked_shift(std::int32_t r, int shift) {
  if (shift <= 0) return r >> (-shift);
  if (shift >= 31 || r > (INT32_MAX >> shift)) raise(ErrorClass::Overflow, "32-bit shift overflow");
  return r << shift;
}

struct ActCodes {
  std::vector<std::int32_t> r;
  double a = 0.0;
  double s = 0.0;
  std::int32_t max_r = 0;
};

ActCodes encode(std::span<const double> values, const Codebook& book) {
  ActCodes out;
  out.a = book.a();
  out.s = book.step();
  out.max_r = static_cast<std::int32_t>(book.size() - 1);
  out.r.reserve(values.size());
  for (double v : values) out.r.push_back(static_cast<std::int32_t>(book.quantize(v).index));
  return out;
}

/// One row of quantized weights in integer form.
class WeightRow {
 public:
  WeightRow(std::span<const double> weights, const Codebook& book) : book_(&book), k_(weights.size()) {
    idx_.reserve(weights.size());
    for (double w : weights) idx_.push_back(book.quantize(w).index);
    if (book.scheme() == Scheme::Uniform) {
      for (auto i : idx_) sum_rw_ += static_cast<std::int64_t>(i);
    } else {
      for (auto i : idx_) {
        for (const auto& t : book.terms(i)) {
          sum_m_ += t.sign * std::ldexp(1.0, -t.exponent);
          max_e_ = std::max(max_e_, t.exponent);
          ++terms_;
        }
      }
    }
  }

  double dot(const std::vector<std::int32_t>& rx, std::size_t offset, bool reversed, const ActCodes& act,
             IntOpCounter* ctr) const {
    auto x_at = [&](std::size_t k) { return reversed ? rx[offset + k_ - 1 - k] : rx[offset + k]; };
    const double kk = static_cast<double>(k_);
    std::int32_t acc_x = 0;
    for (std::size_t k = 0; k < k_; ++k) acc_x = checked_add(acc_x, x_at(k));
    if (ctr) ctr->adds += k_;

    if (book_->scheme() == Scheme::Uniform) {
      std::int32_t acc = 0;
      for (std::size_t k = 0; k < k_; ++k)
        acc = checked_add(acc, checked_mul(static_cast<std::int32_t>(idx_[k]), x_at(k)));
      if (ctr) {
        ctr->multiplies += k_;
        ctr->adds += k_;
      }
      const double aw = book_->a();
      const double sw = book_->step();
      return kk * aw * act.a + aw * act.s * acc_x + sw * act.a * static_cast<double>(sum_rw_) +
             sw * act.s * static_cast<double>(acc);
    }

    // fractional bits: as many as the largest exponent needs, bounded so the
    // worst-case sum fits in 32 bits
    const double bound = static_cast<double>(std::max<std::int32_t>(act.max_r, 1)) *
                         static_cast<double>(std::max<std::size_t>(terms_, 1));
    const int cap = std::max(0, static_cast<int>(std::floor(std::log2(static_cast<double>(INT32_MAX) / bound))));
    const int frac = std::min(max_e_, cap);
    std::int32_t acc = 0;
    for (std::size_t k = 0; k < k_; ++k) {
      const std::int32_t r = x_at(k);
      for (const auto& t : book_->terms(idx_[k])) {
        const std::int32_t v = checked_shift(r, frac - t.exponent);
        acc = checked_add(acc, t.sign > 0 ? v : -v);
        if (ctr) {
          ++ctr->shifts;
          ++ctr->adds;
        }
      }
    }
    const double scale = book_->term_scale();
    const double shift = book_->term_shift();
    return scale * act.a * sum_m_ + scale * act.s * std::ldexp(static_cast<double>(acc), -frac) +
           shift * act.a * kk + shift * act.s * acc_x;
  }

 private:
  const Codebook* book_;
  std::size_t k_;
  std::vector<std::size_t> idx_;
  std::int64_t sum_rw_ = 0;
  double sum_m_ = 0.0;
  int max_e_ = 0;
  std::size_t terms_ = 0;
};

template <typename V>
std::span<const double> as_span(const V& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

Output forward_quantized_int(const InputWindow& window, const ModelParams& params, IntOpCounter* counter) {
  require(params.quant.has_value(), ErrorClass::State, "integer inference needs a quantized model");
  require(params.quant->activations && params.quant->activations->complete(), ErrorClass::State,
          "integer inference needs input and activation codebooks");
  window.validate();
  require(window.length() == static_cast<std::size_t>(params.window_len), ErrorClass::Shape,
          "window length does not match the model");
  const QuantState& q = *params.quant;
  const ActivationBooks& act = *q.activations;
  const int l = params.conv_out_len();

  const ActCodes ux_re = encode(window.x_re, *act.input);
  const ActCodes ux_im = encode(window.x_im, *act.input);
  const ActCodes uy_re = encode(window.y_re, *act.input);
  const ActCodes uy_im = encode(window.y_im, *act.input);

  std::vector<double> conv(static_cast<std::size_t>(params.dense_in()));
  auto run_conv = [&](const FilterPair& f, const Codebook& book, const ActCodes& u_re, const ActCodes& u_im,
                      int block) {
    const WeightRow h_re(as_span(f.re), book);
    const WeightRow h_im(as_span(f.im), book);
    for (int j = 0; j < l; ++j) {
      const auto off = static_cast<std::size_t>(j);
      const double rr = h_re.dot(u_re.r, off, true, u_re, counter);
      const double ii = h_im.dot(u_im.r, off, true, u_im, counter);
      const double ri = h_re.dot(u_im.r, off, true, u_im, counter);
      const double ir = h_im.dot(u_re.r, off, true, u_re, counter);
      conv[static_cast<std::size_t>(block * l + j)] = rr - ii;
      conv[static_cast<std::size_t>((block + 1) * l + j)] = ri + ir;
    }
  };
  run_conv(params.w.conv_x, q.book(Layer::ConvX), ux_re, ux_im, 0);
  run_conv(params.share_filters ? params.w.conv_x : params.w.conv_y, q.book(Layer::ConvY), uy_re, uy_im, 2);

  const ActCodes x = encode(conv, *act.conv_out);
  std::vector<double> hidden(kDenseUnits);
  for (int i = 0; i < kDenseUnits; ++i) {
    const WeightRow row(as_span(params.w.dense_w.row(i)), q.book(Layer::Dense));
    hidden[static_cast<std::size_t>(i)] = std::tanh(row.dot(x.r, 0, false, x, counter) + params.w.dense_b[i]);
  }

  const ActCodes h = encode(hidden, *act.hidden);
  Output out{};
  for (int o = 0; o < kOutputs; ++o) {
    const WeightRow row(as_span(params.w.head_w.row(o)), q.book(Layer::Head));
    out[static_cast<std::size_t>(o)] = row.dot(h.r, 0, false, h, counter) + params.w.head_b[o];
  }
  return out;
}

}  // namespace qfeq
