#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qfeq/dsp.hpp"
#include "qfeq/fiber.hpp"
#include "qfeq/quantize_model.hpp"
#include "qfeq/training.hpp"

namespace qfeq {

struct SignalConfig {
  double symbol_rate_gbaud = 34.4;
  double rolloff = 0.1;
  int rrc_span = 65;
  std::size_t train_symbols = 1u << 17;
  std::size_t test_symbols = 1u << 16;
  SplitFractions split;

  double symbol_rate_hz() const noexcept { return symbol_rate_gbaud * 1e9; }
  void validate() const;
};

struct ModelConfig {
  int window_len = kDefaultWindow;
  int dense_units = kDenseUnits;
  bool share_filters = false;

  void validate() const;
};

/// Settings applied to every quantized scheme of the experiment.
struct QuantConfig {
  std::optional<int> activation_bits = 8;
  RangeMode range = RangeMode::dynamic();
  int apot_base_bits = 2;
  bool keep_biases_full_precision = false;
  bool strict_pot = false;
  /// TAQ starts from the trained full-precision model of the same power.
  bool taq_from_fp32 = true;

  void validate() const;
};

struct ExperimentConfig {
  LinkConfig link;
  SignalConfig signal;
  DspConfig dsp;
  ModelConfig model;
  TrainConfig train;
  QuantConfig quant;
  std::vector<std::string> schemes;  // quantized scheme labels
  std::vector<double> powers_dbm = {-2.0, 2.0};
  std::vector<std::uint64_t> seeds = {1, 2, 3};  // test-set noise seeds
  std::filesystem::path output_dir = "runs/default";
  double confidence = 0.95;
  /// Worker threads for independent simulations and cells (0 = hardware).
  int jobs = 0;

  void validate() const;
  /// Scheme with the experiment-wide quantization settings applied.
  QuantScheme scheme(const std::string& label) const;
  /// Canonical text (sorted keys, output_dir excluded); the config hash is
  /// computed over it.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// FNV-1a 64.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hash_hex(std::uint64_t h);
std::uint64_t parse_hash_hex(const std::string& text);

/// Parse the INI text; unknown sections/keys and malformed values raise a
/// config error naming the field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace qfeq
