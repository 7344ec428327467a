#include "qfeq/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <vector>

#include "qfeq/binary_io.hpp"
#include "qfeq/errors.hpp"

namespace qfeq {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t j = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

long parse_int(std::string_view text) {
  long v = 0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) raise(ErrorClass::Format, "bad integer '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_hex64(std::string_view text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v, 16);
  if (ec != std::errc() || p != end) raise(ErrorClass::Format, "bad hash '" + std::string(text) + "'");
  return v;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) raise(ErrorClass::Format, "cannot format value");
  return std::string(buf, p);
}

std::string format_hex(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  if (ec != std::errc()) raise(ErrorClass::Format, "cannot format value");
  return std::string(buf, p);
}

double parse_hex(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v, std::chars_format::hex);
  if (ec != std::errc() || p != end) raise(ErrorClass::Format, "bad hex number '" + std::string(text) + "'");
  return v;
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) raise(ErrorClass::Format, "bad number '" + std::string(text) + "'");
  return v;
}

std::string codebook_fields(const Codebook& book) {
  std::ostringstream os;
  switch (book.scheme()) {
    case Scheme::Uniform:
      os << "uniform " << book.bits() << ' ' << format_double(book.a()) << ' ' << format_double(book.c());
      break;
    case Scheme::Pot:
      os << "pot " << book.bits() << ' ' << format_double(book.alpha()) << ' ' << (book.strict() ? 1 : 0);
      break;
    case Scheme::Apot:
      os << "apot " << book.bits() << ' ' << book.base_bits() << ' ' << format_double(book.gamma()) << ' '
         << format_double(book.beta());
      break;
  }
  return os.str();
}

Codebook parse_codebook_fields(std::string_view fields) {
  const auto t = split_ws(fields);
  require(!t.empty(), ErrorClass::Format, "empty codebook description");
  const Scheme s = parse_scheme(std::string(t[0]));
  switch (s) {
    case Scheme::Uniform:
      require(t.size() == 4, ErrorClass::Format, "uniform codebook needs bits a c");
      return Codebook::uniform(parse_double(t[2]), parse_double(t[3]), static_cast<int>(parse_int(t[1])));
    case Scheme::Pot:
      require(t.size() == 4, ErrorClass::Format, "pot codebook needs bits alpha strict");
      return Codebook::pot(parse_double(t[2]), static_cast<int>(parse_int(t[1])), parse_int(t[3]) != 0);
    case Scheme::Apot:
      require(t.size() == 5, ErrorClass::Format, "apot codebook needs bits base_bits gamma beta");
      return Codebook::apot(parse_double(t[3]), parse_double(t[4]), static_cast<int>(parse_int(t[1])),
                            static_cast<int>(parse_int(t[2])));
  }
  raise(ErrorClass::Format, "unknown codebook scheme");
}

std::string codebook_csv(const Codebook& book) {
  std::string out = "symbol\n";
  for (double v : book.symbols()) out += format_double(v) + "\n";
  return out;
}

std::string serialize_model(const ModelParams& params, std::uint64_t config_hash, const std::string& label) {
  params.validate();
  std::ostringstream os;
  os << "qfeq-model 1\n";
  os << "config_hash " << hex64(config_hash) << "\n";
  os << "label " << (label.empty() ? "-" : label) << "\n";
  os << "window_len " << params.window_len << "\n";
  os << "share_filters " << (params.share_filters ? 1 : 0) << "\n";
  if (params.quant) {
    const QuantState& q = *params.quant;
    os << "biases_quantized " << (q.biases_quantized ? 1 : 0) << "\n";
    for (Layer l : kLayers) os << "book " << to_string(l) << ' ' << codebook_fields(q.book(l)) << "\n";
    if (q.activations) {
      const ActivationBooks& a = *q.activations;
      if (a.input) os << "act input " << codebook_fields(*a.input) << "\n";
      if (a.conv_out) os << "act conv_out " << codebook_fields(*a.conv_out) << "\n";
      if (a.hidden) os << "act hidden " << codebook_fields(*a.hidden) << "\n";
    }
  }
  params.w.for_each([&](std::string_view name, std::span<const double> v) {
    os << "tensor " << name << ' ' << v.size();
    for (double x : v) os << ' ' << format_hex(x);
    os << "\n";
  });
  os << "end\n";
  return os.str();
}

ModelFile parse_model(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t i = 0; i < text.size();) {
    const std::size_t j = std::min(text.find('\n', i), text.size());
    lines.push_back(text.substr(i, j - i));
    i = j + 1;
  }
  require(!lines.empty() && split_ws(lines[0]).size() == 2 && split_ws(lines[0])[0] == "qfeq-model",
          ErrorClass::Format, "not a model file");
  require(split_ws(lines[0])[1] == "1", ErrorClass::Format, "unsupported model file version");

  ModelFile out;
  std::optional<bool> biases_quantized;
  std::map<Layer, Codebook> books;
  ActivationBooks acts;
  bool has_acts = false;
  std::map<std::string, std::vector<double>> tensors;
  bool ended = false;

  for (std::size_t n = 1; n < lines.size() && !ended; ++n) {
    const auto t = split_ws(lines[n]);
    if (t.empty()) continue;
    const std::string_view key = t[0];
    auto rest = [&]() {
      std::string joined;
      for (std::size_t i = 2; i < t.size(); ++i) joined.append(t[i]).append(" ");
      return joined;
    };
    if (key == "end") {
      ended = true;
    } else if (key == "config_hash" && t.size() == 2) {
      out.config_hash = parse_hex64(t[1]);
    } else if (key == "label" && t.size() == 2) {
      out.label = t[1] == "-" ? "" : std::string(t[1]);
    } else if (key == "window_len" && t.size() == 2) {
      out.params.window_len = static_cast<int>(parse_int(t[1]));
    } else if (key == "share_filters" && t.size() == 2) {
      out.params.share_filters = parse_int(t[1]) != 0;
    } else if (key == "biases_quantized" && t.size() == 2) {
      biases_quantized = parse_int(t[1]) != 0;
    } else if (key == "book" && t.size() >= 3) {
      const Layer l = parse_layer(t[1]);
      books.insert_or_assign(l, parse_codebook_fields(rest()));
    } else if (key == "act" && t.size() >= 3) {
      Codebook b = parse_codebook_fields(rest());
      has_acts = true;
      if (t[1] == "input") acts.input = b;
      else if (t[1] == "conv_out") acts.conv_out = b;
      else if (t[1] == "hidden") acts.hidden = b;
      else raise(ErrorClass::Format, "unknown activation book '" + std::string(t[1]) + "'");
    } else if (key == "tensor" && t.size() >= 3) {
      const auto count = static_cast<std::size_t>(parse_int(t[2]));
      require(t.size() == 3 + count, ErrorClass::Format, "tensor " + std::string(t[1]) + " has wrong value count");
      std::vector<double> v;
      v.reserve(count);
      for (std::size_t i = 0; i < count; ++i) v.push_back(parse_hex(t[3 + i]));
      tensors[std::string(t[1])] = std::move(v);
    } else {
      raise(ErrorClass::Format, "unrecognized model line " + std::to_string(n + 1));
    }
  }
  require(ended, ErrorClass::Format, "model file is truncated");

  ModelParams& p = out.params;
  require(p.window_len >= kConvTaps, ErrorClass::Format, "window_len below filter length");
  p.w = Weights::zeros(p.dense_in());
  p.w.for_each([&](std::string_view name, std::span<double> dst) {
    const auto it = tensors.find(std::string(name));
    require(it != tensors.end(), ErrorClass::Format, "missing tensor " + std::string(name));
    require(it->second.size() == dst.size(), ErrorClass::Format, "tensor " + std::string(name) + " has wrong size");
    std::copy(it->second.begin(), it->second.end(), dst.begin());
  });
  if (!books.empty()) {
    require(books.size() == kLayers.size(), ErrorClass::Format, "quantized model needs a book per layer");
    QuantState q;
    for (Layer l : kLayers) q.layer_books.push_back(books.at(l));
    q.biases_quantized = biases_quantized.value_or(true);
    if (has_acts) q.activations = acts;
    p.quant = std::move(q);
  }
  try {
    p.validate();
  } catch (const Error& e) {
    raise(ErrorClass::Format, std::string("inconsistent model file: ") + e.what());
  }
  return out;
}

void save_model(const std::filesystem::path& path, const ModelParams& params, std::uint64_t config_hash,
                const std::string& label) {
  write_file_atomic(path, serialize_model(params, config_hash, label));
}

ModelFile load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace qfeq
