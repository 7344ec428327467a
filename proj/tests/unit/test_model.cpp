#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "qfeq/errors.hpp"
#include "qfeq/model.hpp"
#include "qfeq/model_io.hpp"

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

// Valid complex convolution in complex arithmetic: y[j] = sum_t h[t] u[j + 40 - t].
CVec naive_conv(const CVec& u, const FilterPair& f) {
  CVec y(u.size() - kConvTaps + 1);
  for (std::size_t j = 0; j < y.size(); ++j)
    for (int t = 0; t < kConvTaps; ++t) y[j] += cplx(f.re[t], f.im[t]) * u[j + kConvTaps - 1 - t];
  return y;
}

CVec as_complex(const std::vector<double>& re, const std::vector<double>& im) {
  CVec out(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) out[i] = {re[i], im[i]};
  return out;
}

Output naive_forward(const InputWindow& w, const ModelParams& p) {
  const CVec cx = naive_conv(as_complex(w.x_re, w.x_im), p.w.conv_x);
  const CVec cy = naive_conv(as_complex(w.y_re, w.y_im), p.share_filters ? p.w.conv_x : p.w.conv_y);
  std::vector<double> x;
  for (auto v : cx) x.push_back(v.real());
  for (auto v : cx) x.push_back(v.imag());
  for (auto v : cy) x.push_back(v.real());
  for (auto v : cy) x.push_back(v.imag());
  std::vector<double> h(kDenseUnits);
  for (int i = 0; i < kDenseUnits; ++i) {
    double z = p.w.dense_b[i];
    for (std::size_t j = 0; j < x.size(); ++j) z += p.w.dense_w(i, static_cast<Eigen::Index>(j)) * x[j];
    h[i] = std::tanh(z);
  }
  Output out{};
  for (int o = 0; o < kOutputs; ++o) {
    double z = p.w.head_b[o];
    for (int i = 0; i < kDenseUnits; ++i) z += p.w.head_w(o, i) * h[i];
    out[o] = z;
  }
  return out;
}

double loss_of(const ModelParams& p, const SampleStreams& s, std::span<const std::size_t> starts, const RowMatrix& dy) {
  const RowMatrix y = forward_batch(s, starts, p);
  return (y.array() * dy.array()).sum();
}

}  // namespace

TEST(ComplexConv, UnitImpulseIsIdentityOnValidRegion) {
  const SampleStreams s = test::random_streams(81, 1);
  FilterPair f;
  f.re[0] = 1.0;
  const ComplexSeq y = complex_conv(s.x_re, s.x_im, f);
  ASSERT_EQ(y.re.size(), 41u);
  for (std::size_t j = 0; j < y.re.size(); ++j) {
    EXPECT_EQ(y.re[j], s.x_re[j + 40]);
    EXPECT_EQ(y.im[j], s.x_im[j + 40]);
  }
}

TEST(ComplexConv, ImaginaryFilterMultipliesByI) {
  const SampleStreams s = test::random_streams(60, 2);
  FilterPair real_part;
  FilterPair imag_part;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < kConvTaps; ++t) real_part.re[t] = imag_part.im[t] = g(rng);
  const ComplexSeq a = complex_conv(s.x_re, s.x_im, real_part);
  const ComplexSeq b = complex_conv(s.x_re, s.x_im, imag_part);
  for (std::size_t j = 0; j < a.re.size(); ++j) {
    EXPECT_NEAR(b.re[j], -a.im[j], 1e-14);
    EXPECT_NEAR(b.im[j], a.re[j], 1e-14);
  }
}

TEST(ComplexConv, MatchesComplexArithmeticOracle) {
  const ModelParams p = test::random_model(4);
  const SampleStreams s = test::random_streams(100, 5);
  const ComplexSeq y = complex_conv(s.x_re, s.x_im, p.w.conv_x);
  const CVec ref = naive_conv(as_complex(s.x_re, s.x_im), p.w.conv_x);
  for (std::size_t j = 0; j < ref.size(); ++j) {
    EXPECT_NEAR(y.re[j], ref[j].real(), 1e-12);
    EXPECT_NEAR(y.im[j], ref[j].imag(), 1e-12);
  }
}

TEST(ComplexConv, ShortWindowIsShapeError) {
  const SampleStreams s = test::random_streams(40, 6);
  EXPECT_EQ(class_of([&] { complex_conv(s.x_re, s.x_im, FilterPair{}); }), ErrorClass::Shape);
}

TEST(Forward, ZeroModelOutputsZero) {
  ModelParams p;
  const SampleStreams s = test::random_streams(81, 7);
  for (double v : forward(s.window(0, 81), p)) EXPECT_EQ(v, 0.0);
}

TEST(Forward, ZeroConvDecouplesLayers) {
  ModelParams p = test::random_model(8);
  p.w.conv_x = FilterPair{};
  p.w.conv_y = FilterPair{};
  const SampleStreams s = test::random_streams(81, 9);
  const Output y = forward(s.window(0, 81), p);
  const Eigen::VectorXd expect = p.w.head_w * p.w.dense_b.array().tanh().matrix() + p.w.head_b;
  for (int o = 0; o < kOutputs; ++o) EXPECT_NEAR(y[o], expect[o], 1e-14);
}

TEST(Forward, MatchesNaiveOracleAndBatchPath) {
  for (bool share : {false, true}) {
    const ModelParams p = test::random_model(10, 81, share);
    const SampleStreams s = test::random_streams(400, 11);
    std::vector<std::size_t> starts;
    for (std::size_t k = 0; k + 81 <= 400; k += 7) starts.push_back(k);
    const RowMatrix batch = forward_batch(s, starts, p);
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const Output a = forward(s.window(starts[i], 81), p);
      const Output ref = naive_forward(s.window(starts[i], 81), p);
      for (int o = 0; o < kOutputs; ++o) {
        EXPECT_NEAR(a[o], ref[o], 1e-12);
        EXPECT_NEAR(batch(static_cast<Eigen::Index>(i), o), ref[o], 1e-12);
      }
    }
  }
}

TEST(Forward, WindowLengthMismatchIsShapeError) {
  const ModelParams p = test::random_model(12);
  const SampleStreams s = test::random_streams(100, 13);
  EXPECT_EQ(class_of([&] { forward(s.window(0, 83), p); }), ErrorClass::Shape);
}

TEST(Forward, HiddenActivationsLieInsideUnitInterval) {
  ModelParams p = test::random_model(14);
  const SampleStreams s = test::random_streams(2000, 15, 1.0);
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k + 81 <= 2000; k += 2) starts.push_back(k);
  ForwardCache cache;
  forward_batch(s, starts, p, &cache);
  EXPECT_LT(cache.hidden.array().abs().maxCoeff(), 1.0);
  // in double precision tanh rounds to +-1 once |z| > ~19; the closed bound still holds
  p.w.dense_w *= 50.0;
  forward_batch(s, starts, p, &cache);
  EXPECT_LE(cache.hidden.array().abs().maxCoeff(), 1.0);
}

TEST(Slide, OutputCountFollowsTwoSampleStep) {
  const ModelParams p = test::random_model(16);
  ComplexField f;
  f.sample_rate = 68.8e9;
  f.x = test::random_complex(81, 17);
  f.y = test::random_complex(81, 18);
  EXPECT_EQ(slide_equalize(f, p).length(), 1u);
  f.x = test::random_complex(83, 17);
  f.y = test::random_complex(83, 18);
  EXPECT_EQ(slide_equalize(f, p).length(), 2u);
  f.x = test::random_complex(84, 17);
  f.y = test::random_complex(84, 18);
  EXPECT_EQ(slide_equalize(f, p).length(), 2u);
  f.x.resize(80);
  f.y.resize(80);
  EXPECT_EQ(class_of([&] { slide_equalize(f, p); }), ErrorClass::Length);
}

TEST(Slide, EqualsMaterializedWindows) {
  const ModelParams p = test::random_model(19);
  ComplexField f;
  f.sample_rate = 68.8e9;
  f.x = test::random_complex(2 * 1500, 20, 0.7);
  f.y = test::random_complex(2 * 1500, 21, 0.7);
  const SymbolFrame out = slide_equalize(f, p);
  const SampleStreams s = SampleStreams::from_field(f);
  ASSERT_EQ(out.length(), (f.length() - 81) / 2 + 1);
  for (std::size_t k = 0; k < out.length(); k += 37) {
    const Output ref = naive_forward(s.window(2 * k, 81), p);
    EXPECT_NEAR(out.x[k].real(), ref[0], 1e-12);
    EXPECT_NEAR(out.x[k].imag(), ref[1], 1e-12);
    EXPECT_NEAR(out.y[k].real(), ref[2], 1e-12);
    EXPECT_NEAR(out.y[k].imag(), ref[3], 1e-12);
  }
}

TEST(Slide, OutputDependsOnlyOnItsWindow) {
  const ModelParams p = test::random_model(22);
  ComplexField f;
  f.sample_rate = 68.8e9;
  f.x = test::random_complex(400, 23, 0.7);
  f.y = test::random_complex(400, 24, 0.7);
  const SymbolFrame base = slide_equalize(f, p);
  const std::size_t k = 50;  // window [100, 181)
  for (std::size_t i : {99UL, 181UL, 0UL, 399UL}) {
    ComplexField g = f;
    g.x[i] += cplx(3.0, -2.0);
    g.y[i] += cplx(-1.0, 4.0);
    const SymbolFrame out = slide_equalize(g, p);
    EXPECT_EQ(out.x[k], base.x[k]) << i;
    EXPECT_EQ(out.y[k], base.y[k]) << i;
  }
  ComplexField g = f;
  g.x[140] += 1.0;
  EXPECT_NE(slide_equalize(g, p).x[k], base.x[k]);
}

TEST(Gradient, MatchesCentralFiniteDifferences) {
  // ten random parameter points; loss = sum over the batch of dy . y
  for (std::uint64_t point = 0; point < 10; ++point) {
    const bool share = point % 3 == 2;
    ModelParams p = test::random_model(100 + point, 81, share);
    const SampleStreams s = test::random_streams(600, 200 + point);
    std::vector<std::size_t> starts;
    for (std::size_t k = 0; k + 81 <= 600; k += 53) starts.push_back(k);
    std::mt19937_64 rng(300 + point);
    std::normal_distribution<double> g;
    RowMatrix dy(static_cast<Eigen::Index>(starts.size()), kOutputs);
    for (Eigen::Index i = 0; i < dy.size(); ++i) dy.data()[i] = g(rng);

    ForwardCache cache;
    forward_batch(s, starts, p, &cache);
    const Weights grad = backward_batch(cache, dy, p);

    std::vector<std::pair<std::string, std::span<const double>>> gv;
    grad.for_each([&](std::string_view name, std::span<const double> v) { gv.emplace_back(name, v); });
    std::size_t tensor = 0;
    p.w.for_each([&](std::string_view name, std::span<double> v) {
      const auto analytic = gv[tensor++].second;
      if (share && name.starts_with("conv_y")) return;
      for (int trial = 0; trial < 6; ++trial) {
        const std::size_t i = rng() % v.size();
        const double keep = v[i];
        const double h = 1e-6 * std::max(1.0, std::abs(keep));
        auto sync_shared = [&] {
          if (share) p.w.conv_y = p.w.conv_x;
        };
        v[i] = keep + h;
        sync_shared();
        const double up = loss_of(p, s, starts, dy);
        v[i] = keep - h;
        sync_shared();
        const double down = loss_of(p, s, starts, dy);
        v[i] = keep;
        sync_shared();
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-4});
        EXPECT_LT(std::abs(fd - analytic[i]) / denom, 1e-5) << name << "[" << i << "] point " << point;
      }
    });
  }
}

TEST(ModelIo, RoundTripIsExact) {
  const ModelParams p = test::random_model(30, 81, false);
  const std::string text = serialize_model(p, 0x0123456789abcdefULL, "UQ");
  const ModelFile back = parse_model(text);
  EXPECT_EQ(back.config_hash, 0x0123456789abcdefULL);
  EXPECT_EQ(back.label, "UQ");
  EXPECT_EQ(serialize_model(back.params, back.config_hash, back.label), text);
  EXPECT_EQ(back.params.w.dense_w, p.w.dense_w);
  EXPECT_EQ(back.params.w.conv_y.im, p.w.conv_y.im);
  EXPECT_NE(text.find("tensor head.b 4 "), std::string::npos);
}

TEST(ModelIo, MalformedDocumentsAreFormatErrors) {
  const std::string text = serialize_model(test::random_model(31), 1, "UQ");
  EXPECT_EQ(class_of([&] { parse_model("garbage\n"); }), ErrorClass::Format);
  std::string truncated = text.substr(0, text.size() / 2);
  EXPECT_EQ(class_of([&] { parse_model(truncated); }), ErrorClass::Format);
  std::string bad = text;
  bad.replace(bad.find("tensor head.b 4 ") + 16, 1, "z");
  EXPECT_EQ(class_of([&] { parse_model(bad); }), ErrorClass::Format);
  EXPECT_EQ(parse_hex(format_hex(-0.1)), -0.1);
  EXPECT_EQ(parse_double(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(ModelIo, CodebookFieldsRoundTrip) {
  for (const Codebook& book : {Codebook::uniform(-0.3, 0.71, 6), Codebook::pot(0.4, 5, true),
                               Codebook::apot(0.9, -0.05, 8, 2)}) {
    EXPECT_TRUE(parse_codebook_fields(codebook_fields(book)) == book);
    const std::string csv = codebook_csv(book);
    EXPECT_EQ(csv.rfind("symbol\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), book.size() + 1);
  }
}
