#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfeq/codebook.hpp"
#include "qfeq/model.hpp"

namespace qfeq {

enum class QuantMode : std::uint8_t { Ptq, Taq };

std::string to_string(QuantMode m);

/// Scheme x mode x range x precisions. Convolution layers use b1 bits, the
/// dense and output layers b2 bits (fixed precision when b1 == b2).
struct QuantScheme {
  std::string label;
  Scheme scheme = Scheme::Uniform;
  QuantMode mode = QuantMode::Ptq;
  RangeMode range = RangeMode::dynamic();
  int b1 = 8;
  int b2 = 8;
  /// Uniform activation/input quantization width; unset keeps activations in float.
  std::optional<int> activation_bits = 8;
  int apot_base_bits = 2;
  bool keep_biases_full_precision = false;
  bool strict_pot = false;

  bool fixed_precision() const noexcept { return b1 == b2; }
  int bits_for(Layer l) const noexcept { return is_conv(l) ? b1 : b2; }
  void validate() const;

  /// Parse a scheme label. Accepted forms:
  ///   TAQ-6   uniform TAQ, b1 = b2 = 6
  ///   PTQ-8   uniform PTQ, b1 = 6, b2 = 8 (PTQ-b: b1 = 6, b2 = b)
  ///   APoT-8  APoT PTQ,    b1 = 6, b2 = 8 (APoT-b: b1 = 6, b2 = b)
  ///   <ptq|taq>-<uniform|pot|apot>-<b1>[/<b2>]   e.g. ptq-uniform-6, taq-apot-6/8
  static QuantScheme parse(const std::string& label);
};

/// Label of the unquantized baseline model.
inline constexpr const char* kUnquantizedLabel = "UQ";
/// Label of the linear-DSP-only baseline (no equalizer).
inline constexpr const char* kLinearDspLabel = "LDSP";

/// Build one codebook per layer from the current weights.
std::vector<Codebook> build_weight_books(const ModelParams& params, const QuantScheme& scheme);

/// Project every weight onto its layer's book. Idempotent.
ModelParams apply_quant_state(const ModelParams& params, const QuantState& state);

/// Calibrate activation books (input, convolution output, tanh output) with
/// staged forward passes over the calibration windows.
ActivationBooks calibrate_activations(const ModelParams& quantized_weights, int activation_bits,
                                      const RangeMode& range, const SampleStreams& streams,
                                      std::span<const std::size_t> starts);

/// Post-training quantization of a full-precision model.
ModelParams quantize_model_ptq(const ModelParams& params, const QuantScheme& scheme, const SampleStreams& streams,
                               std::span<const std::size_t> calibration_starts);

/// Storage size: 32 bits per full-precision parameter; for quantized models
/// b bits per quantized parameter plus 32 bits per stored layer scale/shift.
/// Activation codebook ranges are not weights and are not counted.
std::size_t model_size_bits(const ModelParams& params);
/// Parameter count as stored (shared conv filters are counted once).
std::size_t parameter_count(const ModelParams& params);

}  // namespace qfeq
