#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "stisnn/error.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/network.hpp"

namespace stisnn {

/// Neuron parameters applied to every layer the grammar creates. Weight
/// files override threshold and leak per layer.
struct LayerDefaults {
  std::int32_t threshold = 64;
  std::int16_t leak = kLeakOne;
  int vmem_width = kDefaultVmemWidth;
  std::size_t fc_classes = 10;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

inline std::size_t to_count(const std::string& digits, const std::string& token) {
  try {
    const unsigned long v = std::stoul(digits);
    require(v >= 1, ErrorKind::Config, "token '" + token + "': counts must be positive");
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorKind::Config, "token '" + token + "': bad number");
  }
}

inline LayerSpec make_layer(LayerMode mode, std::size_t in, std::size_t out, std::size_t kernel,
                            const LayerDefaults& d) {
  LayerSpec s;
  s.mode = mode;
  s.in_channels = in;
  s.out_channels = out;
  s.kernel_h = s.kernel_w = kernel;
  s.padding = (mode == LayerMode::Pool || mode == LayerMode::FullyConnected) ? 0 : (kernel - 1) / 2;
  s.threshold = d.threshold;
  s.leak = d.leak;
  s.vmem_width = d.vmem_width;
  return s;
}

// Appends the layer(s) described by one '-' separated token, tracking dims.
inline void append_token(const std::string& token, std::size_t index, Dims& dims,
                         std::vector<LayerSpec>& layers, const LayerDefaults& d) {
  static const std::regex conv_re(R"((\d+)c(\d+))");
  static const std::regex dw_re(R"((\d+)dwc(\d+))");
  static const std::regex pool_re(R"(p(\d+))");
  static const std::regex fc_re(R"(fc(\d*))");

  const auto parts = split(token, '/');
  for (std::size_t part = 0; part < parts.size(); ++part) {
    const std::string& t = parts[part];
    const std::string where = "layer token " + std::to_string(index) + " '" + t + "'";
    std::smatch m;
    LayerSpec spec;
    if (std::regex_match(t, m, dw_re)) {
      const std::size_t c = to_count(m[1], t);
      require(c == dims.channels, ErrorKind::Config,
              where + ": depthwise width " + std::to_string(c) + " != input channels " +
                  std::to_string(dims.channels));
      spec = make_layer(LayerMode::Depthwise, c, c, to_count(m[2], t), d);
    } else if (std::regex_match(t, m, conv_re)) {
      const std::size_t k = to_count(m[2], t);
      // "c1" following '/' completes a depthwise separable pair.
      const LayerMode mode = (part > 0 && k == 1) ? LayerMode::Pointwise : LayerMode::Standard;
      spec = make_layer(mode, dims.channels, to_count(m[1], t), k, d);
    } else if (std::regex_match(t, m, pool_re)) {
      const std::size_t w = to_count(m[1], t);
      require(dims.height % w == 0 && dims.width % w == 0, ErrorKind::Shape,
              where + ": pooling window " + std::to_string(w) + " does not divide " +
                  std::to_string(dims.height) + "x" + std::to_string(dims.width));
      spec = make_layer(LayerMode::Pool, dims.channels, dims.channels, w, d);
    } else if (std::regex_match(t, m, fc_re)) {
      const std::size_t classes = m[1].length() > 0 ? to_count(m[1], t) : d.fc_classes;
      spec = make_layer(LayerMode::FullyConnected, dims.size(), classes, 1, d);
    } else {
      fail(ErrorKind::Config, where + ": unrecognized layer");
    }
    try {
      dims = check_link(where, spec, dims);
    } catch (const Error& e) {
      fail(ErrorKind::Config, e.what());
    }
    layers.push_back(spec);
  }
}

}  // namespace detail

/// Parses a compact model string such as
/// "28x28 16c3-32c3-p2-32c3-p2-fc" or "28x28x16 32c3-p2-32c3-p2-fc10".
///
/// A two-field input ("HxW") is a raw single-channel image and the first
/// layer becomes the spike encoder; a three-field input ("HxWxC") is a
/// spike map fed straight to the accelerator. "Ndwc K" is depthwise, and a
/// "Nc1" after '/' is pointwise ("16dwc3/32c1").
inline NetworkConfig parse_architecture(std::string_view text, const LayerDefaults& d = {}) {
  const std::string s = detail::trim(text);
  const auto space = s.find_first_of(" \t");
  require(space != std::string::npos, ErrorKind::Config,
          "model string needs an input size and a layer list");
  const std::string input = s.substr(0, space);
  const std::string body = detail::trim(std::string_view(s).substr(space));

  static const std::regex dims_re(R"((\d+)[xX](\d+)(?:[xX](\d+))?)");
  std::smatch m;
  require(std::regex_match(input, m, dims_re), ErrorKind::Config,
          "bad input size '" + input + "'");
  NetworkConfig config;
  config.input.height = detail::to_count(m[1], input);
  config.input.width = detail::to_count(m[2], input);
  const bool raw_image = m[3].length() == 0;
  config.input.channels = raw_image ? 1 : detail::to_count(m[3], input);

  Dims dims = config.input;
  std::vector<LayerSpec> layers;
  const auto tokens = detail::split(body, '-');
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string token = detail::trim(tokens[i]);
    require(!token.empty(), ErrorKind::Config, "empty layer token at position " + std::to_string(i));
    detail::append_token(token, i, dims, layers, d);
  }
  if (raw_image) {
    require(!layers.empty() && layers.front().mode == LayerMode::Standard, ErrorKind::Config,
            "an image input needs a standard convolution as its encoder");
    config.encoder = layers.front();
    layers.erase(layers.begin());
  }
  config.layers = std::move(layers);
  layer_shapes(config);
  return config;
}

namespace detail {

using nlohmann::json;

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("field '") + key + "': " + e.what());
  }
}

inline std::int16_t leak_from_json(const json& j, std::int16_t fallback) {
  if (!j.contains("leak")) return fallback;
  const double v = get_or<double>(j, "leak", 1.0);
  require(v >= 0.0 && v < 128.0, ErrorKind::Config, "leak must lie in [0, 128)");
  return static_cast<std::int16_t>(v * kLeakOne + (v >= 0 ? 0.5 : -0.5));
}

inline LayerSpec layer_from_json(const json& j, std::size_t index, const Dims& in,
                                 const LayerDefaults& d) {
  const std::string where = "layer " + std::to_string(index);
  require(j.is_object(), ErrorKind::Config, where + ": expected an object");
  const std::string type = get_or<std::string>(j, "type", "");
  LayerSpec s;
  if (type == "conv") {
    s = make_layer(LayerMode::Standard, in.channels, get_or<std::size_t>(j, "out", 0),
                   get_or<std::size_t>(j, "kernel", 3), d);
  } else if (type == "dwconv") {
    s = make_layer(LayerMode::Depthwise, in.channels, in.channels,
                   get_or<std::size_t>(j, "kernel", 3), d);
  } else if (type == "pwconv") {
    s = make_layer(LayerMode::Pointwise, in.channels, get_or<std::size_t>(j, "out", 0), 1, d);
  } else if (type == "pool") {
    s = make_layer(LayerMode::Pool, in.channels, in.channels, get_or<std::size_t>(j, "window", 2), d);
  } else if (type == "fc") {
    s = make_layer(LayerMode::FullyConnected, in.size(),
                   get_or<std::size_t>(j, "out", d.fc_classes), 1, d);
  } else {
    fail(ErrorKind::Config, where + ": unknown type '" + type + "'");
  }
  s.padding = get_or<std::size_t>(j, "padding", s.padding);
  s.threshold = get_or<std::int32_t>(j, "threshold", s.threshold);
  s.leak = leak_from_json(j, s.leak);
  s.vmem_width = get_or<int>(j, "vmem_width", s.vmem_width);
  s.parallel_factor = get_or<std::size_t>(j, "parallel", s.parallel_factor);
  return s;
}

}  // namespace detail

/// Parses a JSON network document (see configs/README.md for the schema) or,
/// when the text is not a JSON object, a compact model string.
inline NetworkConfig parse_config(std::string_view text) {
  const std::string trimmed = detail::trim(text);
  if (trimmed.empty() || trimmed.front() != '{') return parse_architecture(trimmed);

  using nlohmann::json;
  json j;
  try {
    j = json::parse(trimmed);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("invalid JSON: ") + e.what());
  }

  LayerDefaults d;
  d.threshold = detail::get_or<std::int32_t>(j, "threshold", d.threshold);
  d.leak = detail::leak_from_json(j, d.leak);
  d.vmem_width = detail::get_or<int>(j, "vmem_width", d.vmem_width);
  d.fc_classes = detail::get_or<std::size_t>(j, "classes", d.fc_classes);

  NetworkConfig config;
  if (j.contains("architecture")) {
    config = parse_architecture(detail::get_or<std::string>(j, "architecture", ""), d);
  } else {
    require(j.contains("input") && j.contains("layers"), ErrorKind::Config,
            "config needs 'architecture' or both 'input' and 'layers'");
    const json& in = j.at("input");
    if (in.is_array()) {
      require(in.size() == 3, ErrorKind::Config, "'input' array must be [height, width, channels]");
      config.input = {in[0].get<std::size_t>(), in[1].get<std::size_t>(), in[2].get<std::size_t>()};
    } else {
      config.input = {detail::get_or<std::size_t>(in, "height", 0),
                      detail::get_or<std::size_t>(in, "width", 0),
                      detail::get_or<std::size_t>(in, "channels", 1)};
    }
    Dims dims = config.input;
    if (j.contains("encoder")) {
      config.encoder = detail::layer_from_json(j.at("encoder"), 0, dims, d);
      dims = accelerator_input(config);
    }
    const json& layers = j.at("layers");
    require(layers.is_array(), ErrorKind::Config, "'layers' must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      LayerSpec s = detail::layer_from_json(layers[i], i, dims, d);
      dims = detail::check_link(detail::layer_name(i, s), s, dims);
      config.layers.push_back(s);
    }
  }

  config.name = detail::get_or<std::string>(j, "name", "");
  config.timesteps = detail::get_or<std::size_t>(j, "timesteps", 1);
  if (j.contains("parallel_factors")) {
    const auto factors = detail::get_or<std::vector<std::size_t>>(j, "parallel_factors", {});
    std::size_t next = 0;
    for (auto& layer : config.layers) {
      if (!is_conv(layer.mode)) continue;
      require(next < factors.size(), ErrorKind::Config,
              "'parallel_factors' has fewer entries than conv layers");
      layer.parallel_factor = factors[next++];
    }
    require(next == factors.size(), ErrorKind::Config,
            "'parallel_factors' has more entries than conv layers");
  }
  if (j.contains("latency")) {
    const json& l = j.at("latency");
    config.latency.weight_read = detail::get_or<std::uint64_t>(l, "weight_read", config.latency.weight_read);
    config.latency.pe_accumulate = detail::get_or<std::uint64_t>(l, "pe_accumulate", config.latency.pe_accumulate);
    config.latency.psum_reduce = detail::get_or<std::uint64_t>(l, "psum_reduce", config.latency.psum_reduce);
  }
  if (j.contains("energy")) {
    const json& e = j.at("energy");
    auto& ec = config.energy;
    ec.accumulate_pj = detail::get_or<double>(e, "accumulate_pj", ec.accumulate_pj);
    ec.input_read_pj = detail::get_or<double>(e, "input_read_pj", ec.input_read_pj);
    ec.weight_read_pj = detail::get_or<double>(e, "weight_read_pj", ec.weight_read_pj);
    ec.psum_access_pj = detail::get_or<double>(e, "psum_access_pj", ec.psum_access_pj);
    ec.static_power_w = detail::get_or<double>(e, "static_power_w", ec.static_power_w);
    ec.clock_hz = detail::get_or<double>(e, "clock_hz", ec.clock_hz);
  }
  layer_shapes(config);
  return config;
}

}  // namespace stisnn
