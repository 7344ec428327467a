#include <benchmark/benchmark.h>

#include <random>

#include "qfeq/codebook.hpp"
#include "qfeq/fiber.hpp"
#include "qfeq/int_inference.hpp"
#include "qfeq/quantize_model.hpp"

using namespace qfeq;

namespace {

SampleStreams streams(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 0.7);
  SampleStreams s;
  for (auto* v : {&s.x_re, &s.x_im, &s.y_re, &s.y_im}) {
    v->resize(n);
    for (auto& x : *v) x = g(rng);
  }
  return s;
}

std::vector<std::size_t> starts(std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k + kDefaultWindow <= n; k += 2) out.push_back(k);
  return out;
}

ModelParams quantized(const std::string& label) {
  const SampleStreams s = streams(4096);
  return quantize_model_ptq(init_model(kDefaultWindow, false, 3), QuantScheme::parse(label), s, starts(4096));
}

void BM_SplitStepSpan(benchmark::State& state) {
  const auto symbols = static_cast<std::size_t>(state.range(0));
  const SymbolFrame f = map_bits_to_symbols(random_bits(8 * symbols, 2));
  const ComplexField in = set_power(rrc_shape(f, 0.1, 8, 65, 34.4e9), dbm_to_mw(2.0));
  FiberParams p;
  for (auto _ : state) benchmark::DoNotOptimize(propagate_span(in, p, 1.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(symbols));
}
BENCHMARK(BM_SplitStepSpan)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);

void BM_ForwardFloat(benchmark::State& state) {
  const SampleStreams s = streams(4096);
  const ModelParams p = init_model(kDefaultWindow, false, 3);
  const InputWindow w = s.window(0, kDefaultWindow);
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, p));
}
BENCHMARK(BM_ForwardFloat);

void BM_ForwardBatch(benchmark::State& state) {
  const SampleStreams s = streams(4096);
  const ModelParams p = init_model(kDefaultWindow, false, 3);
  const auto st = starts(4096);
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(s, st, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(st.size()));
}
BENCHMARK(BM_ForwardBatch)->Unit(benchmark::kMillisecond);

void BM_ForwardInt(benchmark::State& state, const char* label) {
  const SampleStreams s = streams(4096);
  const ModelParams q = quantized(label);
  const InputWindow w = s.window(0, kDefaultWindow);
  for (auto _ : state) benchmark::DoNotOptimize(forward_quantized_int(w, q));
}
BENCHMARK_CAPTURE(BM_ForwardInt, uniform8, "ptq-uniform-8");
BENCHMARK_CAPTURE(BM_ForwardInt, apot8, "APoT-8");

void BM_Quantize(benchmark::State& state, Scheme scheme) {
  const Codebook book = scheme == Scheme::Uniform ? Codebook::uniform(-1.0, 1.0, 8)
                        : scheme == Scheme::Pot   ? Codebook::pot(1.0, 8)
                                                  : Codebook::apot(1.0, 0.0, 8, 2);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  std::vector<double> w(4096);
  for (auto& x : w) x = u(rng);
  for (auto _ : state)
    for (double x : w) benchmark::DoNotOptimize(book.quantize(x));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}
BENCHMARK_CAPTURE(BM_Quantize, uniform, Scheme::Uniform);
BENCHMARK_CAPTURE(BM_Quantize, pot, Scheme::Pot);
BENCHMARK_CAPTURE(BM_Quantize, apot, Scheme::Apot);

}  // namespace
BENCHMARK_MAIN();
