#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qfeq/config.hpp"
#include "qfeq/evaluation.hpp"

namespace qfeq {

/// Artifact layout under the output directory:
///   manifest.txt
///   data/p<power>/train.qfeq (+ .txt sidecar), test_s<seed>.qfeq (+ .txt)
///   models/p<power>/<label>.model
///   logs/p<power>/train_<label>.csv
///   records/records.csv
///   report/summary.txt, report/comparison.csv
class Layout {
 public:
  explicit Layout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path manifest() const { return root_ / "manifest.txt"; }
  std::filesystem::path train_data(double power) const;
  std::filesystem::path test_data(double power, std::uint64_t seed) const;
  std::filesystem::path model(double power, const std::string& label) const;
  std::filesystem::path train_log(double power, const std::string& label) const;
  std::filesystem::path records() const { return root_ / "records" / "records.csv"; }
  std::filesystem::path summary() const { return root_ / "report" / "summary.txt"; }
  std::filesystem::path comparison() const { return root_ / "report" / "comparison.csv"; }

  static std::string power_tag(double power);
  static std::string file_label(const std::string& label);

 private:
  std::filesystem::path root_;
};

struct CommandOptions {
  /// Restrict quantize/evaluate to one quantized scheme label.
  std::optional<std::string> scheme;
  /// Recompute artifacts that already exist with a matching config hash.
  bool force = false;
};

/// Simulate the training and test transmissions of every power.
void cmd_generate(const ExperimentConfig& cfg, std::ostream& log, const CommandOptions& opt = {});
/// Train the unquantized model of every power.
void cmd_train(const ExperimentConfig& cfg, std::ostream& log, const CommandOptions& opt = {});
/// PTQ from the trained model, or TAQ, for every configured scheme and power.
void cmd_quantize(const ExperimentConfig& cfg, std::ostream& log, const CommandOptions& opt = {});
/// Evaluate UQ, LDSP and the quantized schemes on the test transmissions.
std::vector<ExperimentRecord> cmd_evaluate(const ExperimentConfig& cfg, std::ostream& log,
                                           const CommandOptions& opt = {});
/// generate -> train -> quantize -> evaluate -> report.
std::string cmd_sweep(const ExperimentConfig& cfg, std::ostream& log, const CommandOptions& opt = {});
/// Summary text and comparison CSV from the records under `root`; returns the summary.
std::string cmd_report(const std::filesystem::path& root, std::ostream& log);
/// Sorted symbols of one layer's codebook ("input", "conv_out", "hidden" for activations).
std::string cmd_dump_codebook(const std::filesystem::path& model, const std::string& layer);

}  // namespace qfeq
