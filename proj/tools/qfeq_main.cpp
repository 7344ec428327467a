#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "qfeq/commands.hpp"
#include "qfeq/config.hpp"
#include "qfeq/errors.hpp"

namespace {

struct Common {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheme;
  bool force = false;
};

qfeq::ExperimentConfig load(const Common& c) {
  qfeq::ExperimentConfig cfg = qfeq::load_config(c.config);
  if (!c.output.empty()) cfg.output_dir = c.output;
  if (c.seed) cfg.train.seed = *c.seed;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, Common& c, bool with_scheme) {
  cmd->add_option("--config", c.config, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output", c.output, "Output directory (overrides experiment.output_dir)");
  cmd->add_option("--seed", c.seed, "Override train.seed (training data, initialisation, shuffling)");
  cmd->add_flag("--force", c.force, "Recompute artifacts that are already up to date");
  if (with_scheme) cmd->add_option("--scheme", c.scheme, "Restrict to one scheme label from experiment.schemes");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantized fiber-nonlinearity equalizer experiments"};
  app.require_subcommand(1);

  Common common;
  auto* generate = app.add_subcommand("generate", "Simulate training and test transmissions");
  auto* train = app.add_subcommand("train", "Train the unquantized equalizer per launch power");
  auto* quantize = app.add_subcommand("quantize", "Post-training or training-aware quantization");
  auto* evaluate = app.add_subcommand("evaluate", "Score all models on the test transmissions");
  auto* sweep = app.add_subcommand("sweep", "generate, train, quantize, evaluate and report");
  add_common(generate, common, false);
  add_common(train, common, false);
  add_common(quantize, common, true);
  add_common(evaluate, common, true);
  add_common(sweep, common, false);

  std::string report_dir;
  std::string report_config;
  auto* report = app.add_subcommand("report", "Summarize records into a Q table and comparison CSV");
  report->add_option("--output", report_dir, "Output directory holding records/");
  report->add_option("--config", report_config, "Config whose experiment.output_dir holds the records");

  std::string model_path;
  std::string layer;
  auto* dump = app.add_subcommand("dump-codebook", "Print one layer's codebook as a sorted CSV column");
  dump->add_option("--model", model_path, "Quantized model file")->required();
  dump->add_option("--layer", layer, "conv_x, conv_y, dense, head, input, conv_out or hidden")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    qfeq::CommandOptions opt;
    opt.scheme = common.scheme;
    opt.force = common.force;
    if (*generate) qfeq::cmd_generate(load(common), std::cerr, opt);
    if (*train) qfeq::cmd_train(load(common), std::cerr, opt);
    if (*quantize) qfeq::cmd_quantize(load(common), std::cerr, opt);
    if (*evaluate) qfeq::cmd_evaluate(load(common), std::cerr, opt);
    if (*sweep) std::cout << qfeq::cmd_sweep(load(common), std::cerr, opt);
    if (*report) {
      std::string dir = report_dir;
      if (dir.empty() && !report_config.empty()) dir = qfeq::load_config(report_config).output_dir.string();
      qfeq::require(!dir.empty(), qfeq::ErrorClass::Config, "report needs --output or --config");
      std::cout << qfeq::cmd_report(dir, std::cerr);
    }
    if (*dump) std::cout << qfeq::cmd_dump_codebook(model_path, layer);
  } catch (const qfeq::Error& e) {
    std::cerr << "qfeq: " << e.what() << "\n";
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    std::cerr << "qfeq: internal error: " << e.what() << "\n";
    return 100;
  }
  return 0;
}
