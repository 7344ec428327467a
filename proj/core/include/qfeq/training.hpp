#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qfeq/model.hpp"
#include "qfeq/quantize_model.hpp"
#include "qfeq/signal.hpp"

namespace qfeq {

enum class TaqGrad : std::uint8_t { Ste, ClippedSte };

std::string to_string(TaqGrad g);
TaqGrad parse_taq_grad(const std::string& text);

struct TrainConfig {
  int epochs = 200;
  /// Epoch budget of training-aware quantization; 0 uses `epochs`.
  int taq_epochs = 0;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  /// Early stopping: stop after this many epochs without a validation improvement.
  int patience = 20;
  TaqGrad taq_grad = TaqGrad::Ste;
  /// Windows used to recalibrate activation books in TAQ (0 = all training windows).
  int calibration_windows = 4096;

  void validate() const;
};

struct SplitFractions {
  double train = 0.9;
  double validation = 0.1;
  double test = 0.0;

  void validate() const;
};

/// Half-open range of window indices.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
};

/// Supervised pairs. Window k covers samples [2k, 2k + window_len) of the
/// 2-sps streams; its target is transmitted symbol k + window_len/4 (the
/// centre symbol), as (x_re, x_im, y_re, y_im).
struct Dataset {
  SampleStreams streams;
  std::vector<Output> targets;
  int window_len = kDefaultWindow;
  IndexRange train, validation, test;
  double launch_power_dbm = 0.0;
  std::uint64_t seed = 0;

  std::size_t windows() const noexcept { return targets.size(); }
  std::size_t start_of(std::size_t k) const noexcept { return 2 * k; }
  void validate() const;
};

/// Symbol offset between a window's first symbol and its target symbol.
inline int center_offset(int window_len) { return (window_len - 1) / 4; }

/// Build windows and targets from a transmitted frame and a synchronized
/// 2-sps received field (sample 2k is the instant of symbol k). Splits are
/// contiguous symbol blocks; a window belongs to a split only when all its
/// samples lie inside that block, so no window straddles a boundary.
/// Throws a state error if the received field is not aligned with tx.
Dataset build_dataset(const SymbolFrame& tx, const ComplexField& rx, int window_len, const SplitFractions& split);

/// Window start offsets (in samples) of an index range.
std::vector<std::size_t> window_starts(const Dataset& data, const IndexRange& range);

/// Mean squared error over all four outputs of the windows in `range`.
double mean_squared_error(const ModelParams& params, const Dataset& data, const IndexRange& range);

struct EpochLog {
  int epoch = 0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on the MSE loss, minibatches from a seeded shuffle, early stopping on
/// validation MSE; returns the parameters of the best validation epoch.
/// A non-finite loss raises a training error.
TrainResult train_fp32(const Dataset& data, const TrainConfig& cfg, bool share_filters = false,
                       const EpochCallback& on_epoch = {});

/// Training-aware quantization. The forward pass uses quantized weights and
/// activations; weight gradients pass the quantizer unchanged (STE) or are
/// zeroed outside the codebook range (clipped STE). PoT alpha and APoT
/// gamma/beta are trained with their analytic gradients; uniform ranges and
/// activation books are recalibrated every epoch. Starts from `init` when
/// given, otherwise from a fresh initialisation.
TrainResult train_taq(const Dataset& data, const QuantScheme& scheme, const TrainConfig& cfg,
                      const std::optional<ModelParams>& init = std::nullopt, bool share_filters = false,
                      const EpochCallback& on_epoch = {});

/// Gradient of the MSE over the given windows with respect to every weight;
/// also returns the loss.
std::pair<double, Weights> loss_and_gradient(const ModelParams& params, const Dataset& data,
                                             std::span<const std::size_t> windows);

struct TaqGradient {
  Weights latent;                 // gradient reaching the full-precision weights
  std::vector<double> scale;      // per layer, d loss / d alpha or gamma (zero for uniform)
  std::vector<double> shift;      // per layer, d loss / d beta (APoT only)
  double loss = 0.0;
};

/// One TAQ gradient evaluation: project `latent` onto `state`, run forward and
/// backward on the quantized model, then map gradients back through the
/// quantizer.
TaqGradient taq_gradient(const ModelParams& latent, const QuantState& state, TaqGrad mode, const Dataset& data,
                         std::span<const std::size_t> windows);

/// Binary dataset plus a human-readable sidecar (`<path>.txt`).
void save_dataset(const std::filesystem::path& path, const Dataset& data, const SymbolFrame& tx,
                  std::uint64_t config_hash);
struct LoadedDataset {
  Dataset data;
  SymbolFrame tx;
  std::uint64_t config_hash = 0;
};
LoadedDataset load_dataset(const std::filesystem::path& path);

std::string epoch_log_csv(const std::vector<EpochLog>& log);

}  // namespace qfeq
