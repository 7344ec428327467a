#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "qfeq/model.hpp"
#include "qfeq/signal.hpp"

namespace qfeq::test {

inline CVec random_complex(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  CVec v(n);
  for (auto& z : v) z = {g(rng), g(rng)};
  return v;
}

inline ComplexField random_field(std::size_t n, double sample_rate, std::uint64_t seed, double sigma = 1e-2) {
  ComplexField f;
  f.x = random_complex(n, seed, sigma);
  f.y = random_complex(n, seed + 1, sigma);
  f.sample_rate = sample_rate;
  return f;
}

inline double max_abs_diff(const CVec& a, const CVec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double rel_error(const CVec& a, const CVec& ref) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return std::sqrt(num / den);
}

inline double field_rel_error(const ComplexField& a, const ComplexField& ref) {
  CVec x = a.x;
  x.insert(x.end(), a.y.begin(), a.y.end());
  CVec r = ref.x;
  r.insert(r.end(), ref.y.begin(), ref.y.end());
  return rel_error(x, r);
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("qfeq_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Full-precision model with every weight drawn at random, biases included.
inline ModelParams random_model(std::uint64_t seed, int window_len = kDefaultWindow, bool share = false) {
  ModelParams p;
  p.window_len = window_len;
  p.share_filters = share;
  p.w = Weights::zeros(p.dense_in());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const double dense_scale = 1.0 / std::sqrt(static_cast<double>(p.dense_in()));
  p.w.for_each([&](std::string_view name, std::span<double> v) {
    double scale = 0.2;
    if (name.starts_with("dense")) scale = dense_scale;
    if (name.starts_with("head")) scale = 0.1;
    for (auto& x : v) x = scale * g(rng);
  });
  if (share) p.w.conv_y = p.w.conv_x;
  return p;
}

inline SampleStreams random_streams(std::size_t n, std::uint64_t seed, double sigma = 0.7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  SampleStreams s;
  for (auto* v : {&s.x_re, &s.x_im, &s.y_re, &s.y_im}) {
    v->resize(n);
    for (auto& x : *v) x = g(rng);
  }
  return s;
}

}  // namespace qfeq::test
