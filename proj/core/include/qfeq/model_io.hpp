#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "qfeq/codebook.hpp"
#include "qfeq/model.hpp"

namespace qfeq {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Strict parse of a whole token; format error otherwise.
double parse_double(std::string_view text);
/// Hexadecimal floating-point text (exact), used for tensor payloads.
std::string format_hex(double v);
double parse_hex(std::string_view text);

struct ModelFile {
  ModelParams params;
  std::uint64_t config_hash = 0;
  std::string label;
};

/// Line-oriented text format:
///   qfeq-model 1
///   config_hash <16 hex digits>
///   label <text>
///   window_len <n>
///   share_filters <0|1>
///   biases_quantized <0|1>              (quantized models only)
///   book <layer> <codebook fields>      (one per layer, quantized only)
///   act <input|conv_out|hidden> <codebook fields>
///   tensor <name> <count> <hex-float values...>
///   end
/// Codebook fields: "uniform <bits> <a> <c>", "pot <bits> <alpha> <strict>",
/// "apot <bits> <base_bits> <gamma> <beta>".
std::string serialize_model(const ModelParams& params, std::uint64_t config_hash, const std::string& label);
ModelFile parse_model(std::string_view text);

void save_model(const std::filesystem::path& path, const ModelParams& params, std::uint64_t config_hash,
                const std::string& label);
ModelFile load_model(const std::filesystem::path& path);

std::string codebook_fields(const Codebook& book);
Codebook parse_codebook_fields(std::string_view fields);

/// One sorted symbol per line under a "symbol" header.
std::string codebook_csv(const Codebook& book);

}  // namespace qfeq
