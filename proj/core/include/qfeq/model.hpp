#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qfeq/codebook.hpp"
#include "qfeq/signal.hpp"

namespace qfeq {

inline constexpr int kConvTaps = 41;
inline constexpr int kDenseUnits = 100;
inline constexpr int kOutputs = 4;
inline constexpr int kDefaultWindow = 81;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Four real input vectors of one sliding window.
struct InputWindow {
  std::vector<double> x_re, x_im, y_re, y_im;

  std::size_t length() const noexcept { return x_re.size(); }
  void validate() const;
};

/// Real and imaginary 41-tap filters of one complex convolution.
struct FilterPair {
  Eigen::VectorXd re = Eigen::VectorXd::Zero(kConvTaps);
  Eigen::VectorXd im = Eigen::VectorXd::Zero(kConvTaps);
};

struct Weights {
  FilterPair conv_x;
  FilterPair conv_y;
  RowMatrix dense_w;        // kDenseUnits x dense_in
  Eigen::VectorXd dense_b;  // kDenseUnits
  RowMatrix head_w;         // kOutputs x kDenseUnits
  Eigen::VectorXd head_b;   // kOutputs

  static Weights zeros(int dense_in);
  /// Visit every tensor as (name, flat storage).
  void for_each(const std::function<void(std::string_view, std::span<double>)>& fn);
  void for_each(const std::function<void(std::string_view, std::span<const double>)>& fn) const;
  std::size_t count() const;
};

enum class Layer : std::uint8_t { ConvX = 0, ConvY = 1, Dense = 2, Head = 3 };
inline constexpr std::array<Layer, 4> kLayers = {Layer::ConvX, Layer::ConvY, Layer::Dense, Layer::Head};
std::string_view to_string(Layer layer);
Layer parse_layer(std::string_view name);
inline bool is_conv(Layer l) { return l == Layer::ConvX || l == Layer::ConvY; }

/// Uniform dynamic-range books for the quantized activations: the input
/// samples, the convolution outputs (dense input) and the tanh outputs.
/// Books are filled in one stage at a time during calibration.
struct ActivationBooks {
  std::optional<Codebook> input;
  std::optional<Codebook> conv_out;
  std::optional<Codebook> hidden;

  bool complete() const noexcept { return input && conv_out && hidden; }
};

struct QuantState {
  std::vector<Codebook> layer_books;  // indexed by Layer
  std::optional<ActivationBooks> activations;
  bool biases_quantized = true;

  const Codebook& book(Layer l) const { return layer_books.at(static_cast<std::size_t>(l)); }
};

struct ModelParams {
  int window_len = kDefaultWindow;
  bool share_filters = false;
  Weights w = Weights::zeros(4 * (kDefaultWindow - kConvTaps + 1));
  std::optional<QuantState> quant;

  int conv_out_len() const noexcept { return window_len - kConvTaps + 1; }
  int dense_in() const noexcept { return 4 * conv_out_len(); }
  bool quantized() const noexcept { return quant.has_value(); }
  /// Shapes, and codebook membership of every quantized weight.
  void validate() const;
};

/// Random initialisation: conv filters start near a centred unit impulse,
/// dense/head layers Xavier-uniform, biases zero.
ModelParams init_model(int window_len, bool share_filters, std::uint64_t seed);

struct ComplexSeq {
  std::vector<double> re, im;
};

/// Valid complex convolution (h_re + i h_im) * (u_re + i u_im) of length
/// window - 40, built from four real convolutions.
ComplexSeq complex_conv(std::span<const double> u_re, std::span<const double> u_im, const FilterPair& filters);

using Output = std::array<double, kOutputs>;

/// Float forward pass of one window. For quantized models with activation
/// books the activations are quantized, so this is the dequantized reference.
Output forward(const InputWindow& window, const ModelParams& params);

/// Real sample streams of a 2-samples-per-symbol field, for batched evaluation.
struct SampleStreams {
  std::vector<double> x_re, x_im, y_re, y_im;

  static SampleStreams from_field(const ComplexField& field);
  std::size_t length() const noexcept { return x_re.size(); }
  InputWindow window(std::size_t start, int window_len) const;
};

/// Intermediate tensors kept for backpropagation.
struct ForwardCache {
  std::array<RowMatrix, 4> hankel;  // (B*L) x 41 for x_re, x_im, y_re, y_im
  RowMatrix conv;                   // B x dense_in, before activation quantization
  RowMatrix dense_in;               // B x dense_in, after activation quantization
  RowMatrix hidden;                 // B x 100, tanh output (before quantization)
  RowMatrix hidden_q;               // B x 100, after activation quantization
  RowMatrix output;                 // B x 4
};

/// Batched forward pass over windows starting at the given sample offsets.
/// Weights are used as stored; activation books are applied when present.
RowMatrix forward_batch(const SampleStreams& streams, std::span<const std::size_t> starts, const ModelParams& params,
                        ForwardCache* cache = nullptr);

/// Gradient of sum over the batch of dOutput . output with respect to every
/// weight, using the cache of the preceding forward_batch call. Activation
/// quantizers pass gradients straight through.
Weights backward_batch(const ForwardCache& cache, const RowMatrix& grad_output, const ModelParams& params);

/// Slide the network over a 2-sps field: window k starts at sample 2k and
/// yields one symbol per polarization; floor((len - W)/2) + 1 outputs.
SymbolFrame slide_equalize(const ComplexField& field, const ModelParams& params);

}  // namespace qfeq
