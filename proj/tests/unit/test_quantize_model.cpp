#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/quantize_model.hpp"

using namespace qfeq;

namespace {

ErrorClass class_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.error_class();
  }
  return static_cast<ErrorClass>(0);
}

struct Calibration {
  SampleStreams streams = test::random_streams(3000, 77);
  std::vector<std::size_t> starts;
  Calibration() {
    for (std::size_t k = 0; k + 81 <= 3000; k += 2) starts.push_back(k);
  }
};

template <typename M>
std::span<const double> flat(const M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

// Default model: 2 x 2 x 41 conv taps, 100 x 164 dense, 100 dense biases, 4 x 100 head, 4 head biases.
constexpr std::size_t kConv = 2 * 2 * 41;
constexpr std::size_t kDense = 100 * 164 + 100;
constexpr std::size_t kHead = 4 * 100 + 4;

}  // namespace

TEST(SchemeLabels, AliasesAndGenericForms) {
  const QuantScheme ptq8 = QuantScheme::parse("PTQ-8");
  EXPECT_EQ(ptq8.scheme, Scheme::Uniform);
  EXPECT_EQ(ptq8.mode, QuantMode::Ptq);
  EXPECT_EQ(ptq8.b1, 6);
  EXPECT_EQ(ptq8.b2, 8);
  const QuantScheme apot8 = QuantScheme::parse("APoT-8");
  EXPECT_EQ(apot8.scheme, Scheme::Apot);
  EXPECT_EQ(apot8.b1, 6);
  EXPECT_EQ(apot8.b2, 8);
  const QuantScheme taq6 = QuantScheme::parse("TAQ-6");
  EXPECT_EQ(taq6.mode, QuantMode::Taq);
  EXPECT_EQ(taq6.scheme, Scheme::Uniform);
  EXPECT_TRUE(taq6.fixed_precision());
  const QuantScheme mixed = QuantScheme::parse("ptq-pot-5/7");
  EXPECT_EQ(mixed.scheme, Scheme::Pot);
  EXPECT_EQ(mixed.bits_for(Layer::ConvY), 5);
  EXPECT_EQ(mixed.bits_for(Layer::Head), 7);
  for (const char* bad : {"foo", "ptq-uniform-17", "ptq-uniform-1", "ptq-apot-7", "taq-magic-4"})
    EXPECT_EQ(class_of([&] { QuantScheme::parse(bad); }), ErrorClass::Config) << bad;
}

TEST(Ptq, MixedPrecisionBookMembership) {
  const Calibration cal;
  const ModelParams q =
      quantize_model_ptq(test::random_model(1), QuantScheme::parse("PTQ-8"), cal.streams, cal.starts);
  ASSERT_TRUE(q.quantized());
  EXPECT_EQ(q.quant->book(Layer::ConvX).size(), 64u);
  EXPECT_EQ(q.quant->book(Layer::ConvY).size(), 64u);
  EXPECT_EQ(q.quant->book(Layer::Dense).size(), 256u);
  EXPECT_EQ(q.quant->book(Layer::Head).size(), 256u);
  for (double v : flat(q.w.conv_x.re)) EXPECT_TRUE(q.quant->book(Layer::ConvX).contains(v));
  for (double v : flat(q.w.conv_y.im)) EXPECT_TRUE(q.quant->book(Layer::ConvY).contains(v));
  for (double v : flat(q.w.dense_w)) ASSERT_TRUE(q.quant->book(Layer::Dense).contains(v));
  for (double v : flat(q.w.head_b)) EXPECT_TRUE(q.quant->book(Layer::Head).contains(v));
  EXPECT_NO_THROW(q.validate());
  ASSERT_TRUE(q.quant->activations);
  EXPECT_TRUE(q.quant->activations->complete());
}

TEST(Ptq, DynamicRangeSpansEachLayer) {
  const Calibration cal;
  const ModelParams p = test::random_model(2);
  const ModelParams q = quantize_model_ptq(p, QuantScheme::parse("ptq-uniform-6"), cal.streams, cal.starts);
  const auto [lo, hi] = std::minmax_element(p.w.dense_w.data(), p.w.dense_w.data() + p.w.dense_w.size());
  const Codebook& dense = q.quant->book(Layer::Dense);
  EXPECT_LE(dense.a(), *lo);
  EXPECT_GE(dense.c(), *hi);
}

TEST(Ptq, RequantizingWithTheSameBooksChangesNothing) {
  const Calibration cal;
  for (const char* label : {"PTQ-8", "APoT-8", "ptq-pot-5"}) {
    const ModelParams q =
        quantize_model_ptq(test::random_model(3), QuantScheme::parse(label), cal.streams, cal.starts);
    const ModelParams again = apply_quant_state(q, *q.quant);
    EXPECT_EQ(again.w.dense_w, q.w.dense_w) << label;
    EXPECT_EQ(again.w.conv_x.re, q.w.conv_x.re) << label;
    EXPECT_EQ(again.w.head_b, q.w.head_b) << label;
  }
}

TEST(Ptq, TrainingAwareSchemeIsModeError) {
  const Calibration cal;
  EXPECT_EQ(class_of([&] {
              quantize_model_ptq(test::random_model(4), QuantScheme::parse("TAQ-6"), cal.streams, cal.starts);
            }),
            ErrorClass::Mode);
}

TEST(Ptq, KeepBiasesFullPrecision) {
  const Calibration cal;
  const ModelParams p = test::random_model(5);
  QuantScheme s = QuantScheme::parse("ptq-uniform-4");
  s.keep_biases_full_precision = true;
  const ModelParams q = quantize_model_ptq(p, s, cal.streams, cal.starts);
  EXPECT_EQ(q.w.dense_b, p.w.dense_b);
  EXPECT_EQ(q.w.head_b, p.w.head_b);
  EXPECT_FALSE(q.quant->biases_quantized);
  EXPECT_EQ(model_size_bits(q), 4 * (kConv + 100 * 164 + 400) + 32 * 104 + 32 * 2 * 4);
}

TEST(Ptq, SharedFiltersStayShared) {
  const Calibration cal;
  const ModelParams q =
      quantize_model_ptq(test::random_model(6, 81, true), QuantScheme::parse("PTQ-8"), cal.streams, cal.starts);
  EXPECT_EQ(q.w.conv_y.re, q.w.conv_x.re);
  EXPECT_EQ(parameter_count(q), kConv / 2 + kDense + kHead);
}

TEST(Ptq, SixteenBitUniformIsNearLossless) {
  // first-order bound: |dy_o| <= sum_w |dy_o/dw| s_layer / 2, with 10 % slack for curvature
  const Calibration cal;
  const ModelParams p = test::random_model(7);
  QuantScheme s = QuantScheme::parse("ptq-uniform-16");
  s.activation_bits = std::nullopt;
  const ModelParams q = quantize_model_ptq(p, s, cal.streams, cal.starts);
  const auto step = [&](Layer l) { return 0.5 * q.quant->book(l).step(); };
  for (std::size_t i = 0; i < 50; ++i) {
    const std::vector<std::size_t> one = {cal.starts[i * 13]};
    ForwardCache cache;
    const RowMatrix y = forward_batch(cal.streams, one, p, &cache);
    const RowMatrix yq = forward_batch(cal.streams, one, q);
    for (int o = 0; o < kOutputs; ++o) {
      RowMatrix dy = RowMatrix::Zero(1, kOutputs);
      dy(0, o) = 1.0;
      const Weights g = backward_batch(cache, dy, p);
      double bound = step(Layer::ConvX) * (g.conv_x.re.cwiseAbs().sum() + g.conv_x.im.cwiseAbs().sum()) +
                     step(Layer::ConvY) * (g.conv_y.re.cwiseAbs().sum() + g.conv_y.im.cwiseAbs().sum()) +
                     step(Layer::Dense) * (g.dense_w.cwiseAbs().sum() + g.dense_b.cwiseAbs().sum()) +
                     step(Layer::Head) * (g.head_w.cwiseAbs().sum() + g.head_b.cwiseAbs().sum());
      EXPECT_LE(std::abs(yq(0, o) - y(0, o)), 1.1 * bound);
      EXPECT_LT(std::abs(yq(0, o) - y(0, o)), 1e-3);
    }
  }
}

TEST(ModelSize, FullPrecisionIsThirtyTwoBitsPerWeight) {
  const ModelParams p = test::random_model(8);
  EXPECT_EQ(parameter_count(p), kConv + kDense + kHead);
  EXPECT_EQ(model_size_bits(p), 32 * (kConv + kDense + kHead));
}

TEST(ModelSize, FiveBitReductionIncludesScaleOverheads) {
  const Calibration cal;
  const ModelParams p = test::random_model(9);
  const ModelParams q = quantize_model_ptq(p, QuantScheme::parse("ptq-uniform-5"), cal.streams, cal.starts);
  const std::size_t w = kConv + kDense + kHead;  // 17068
  ASSERT_EQ(w, 17068u);
  const std::size_t expect = 5 * w + 4 * 2 * 32;  // a, c per layer
  EXPECT_EQ(model_size_bits(q), expect);
  const double reduction = 1.0 - static_cast<double>(model_size_bits(q)) / static_cast<double>(model_size_bits(p));
  EXPECT_GE(reduction, 0.843);
  EXPECT_NEAR(reduction, 1.0 - (5.0 * 17068 + 256) / (32.0 * 17068), 1e-15);
}

TEST(ModelSize, MixedPrecisionFormula) {
  const Calibration cal;
  const ModelParams q =
      quantize_model_ptq(test::random_model(10), QuantScheme::parse("PTQ-8"), cal.streams, cal.starts);
  EXPECT_EQ(model_size_bits(q), 6 * kConv + 8 * (kDense + kHead) + 4 * 2 * 32);
  const ModelParams a =
      quantize_model_ptq(test::random_model(10), QuantScheme::parse("APoT-8"), cal.streams, cal.starts);
  EXPECT_EQ(model_size_bits(a), 6 * kConv + 8 * (kDense + kHead) + 4 * 2 * 32);  // gamma, beta
  const ModelParams pot =
      quantize_model_ptq(test::random_model(10), QuantScheme::parse("ptq-pot-6/8"), cal.streams, cal.starts);
  EXPECT_EQ(model_size_bits(pot), 6 * kConv + 8 * (kDense + kHead) + 4 * 32);  // alpha
}
