#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stisnn/error.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/network.hpp"

namespace stisnn {

inline constexpr std::array<char, 4> kWeightMagic{'S', 'T', 'I', 'W'};
inline constexpr std::uint16_t kWeightVersion = 1;

/// One layer as stored in a weight file.
struct WeightRecord {
  LayerMode mode = LayerMode::Standard;
  std::uint16_t in_channels = 0;
  std::uint16_t out_channels = 0;
  std::uint8_t kernel_h = 1;
  std::uint8_t kernel_w = 1;
  std::int32_t threshold = 0;
  std::int16_t leak = kLeakOne;
  QuantizedWeights weights;

  friend bool operator==(const WeightRecord&, const WeightRecord&) = default;
};

/// All layers of a network, encoder first when the config has one.
struct WeightFile {
  std::vector<WeightRecord> layers;

  friend bool operator==(const WeightFile&, const WeightFile&) = default;
};

/// Layer specs in weight-file order.
inline std::vector<LayerSpec> file_layers(const NetworkConfig& config) {
  std::vector<LayerSpec> specs;
  if (config.encoder) specs.push_back(*config.encoder);
  specs.insert(specs.end(), config.layers.begin(), config.layers.end());
  return specs;
}

inline WeightRecord make_record(const LayerSpec& spec, QuantizedWeights weights) {
  require(spec.in_channels <= UINT16_MAX && spec.out_channels <= UINT16_MAX &&
              spec.kernel_h <= UINT8_MAX && spec.kernel_w <= UINT8_MAX,
          ErrorKind::Shape, "layer extents exceed the weight file field widths");
  weights.check_extents(spec);
  return {spec.mode,
          static_cast<std::uint16_t>(spec.in_channels),
          static_cast<std::uint16_t>(spec.out_channels),
          static_cast<std::uint8_t>(spec.kernel_h),
          static_cast<std::uint8_t>(spec.kernel_w),
          spec.mode == LayerMode::Pool ? 0 : spec.threshold,
          spec.leak,
          std::move(weights)};
}

/// Layout, little-endian: "STIW", u16 version, u16 layer count; per layer
/// u8 mode, u16 C_i, u16 C_o, u8 K_h, u8 K_w, i32 V_th, i16 leak (8.8),
/// int8 weights in [c_o][c_i][k_h][k_w] order, i32 bias per c_o.
inline std::vector<std::uint8_t> serialize(const WeightFile& file) {
  std::vector<std::uint8_t> out(kWeightMagic.begin(), kWeightMagic.end());
  auto put = [&out](auto value, std::size_t bytes) {
    const auto v = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  require(file.layers.size() <= UINT16_MAX, ErrorKind::Shape, "too many layers");
  put(kWeightVersion, 2);
  put(file.layers.size(), 2);
  for (const auto& r : file.layers) {
    put(static_cast<std::uint8_t>(r.mode), 1);
    put(r.in_channels, 2);
    put(r.out_channels, 2);
    put(r.kernel_h, 1);
    put(r.kernel_w, 1);
    put(static_cast<std::uint32_t>(r.threshold), 4);
    put(static_cast<std::uint16_t>(r.leak), 2);
    for (auto w : r.weights.values) out.push_back(static_cast<std::uint8_t>(w));
    for (auto b : r.weights.bias) put(static_cast<std::uint32_t>(b), 4);
  }
  return out;
}

inline WeightFile parse_weight_file(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto take = [&](std::size_t n) -> std::uint64_t {
    require(pos + n <= bytes.size(), ErrorKind::Format, "truncated weight file");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{bytes[pos + i]} << (8 * i);
    pos += n;
    return v;
  };
  require(bytes.size() >= 4 && std::equal(kWeightMagic.begin(), kWeightMagic.end(), bytes.begin()),
          ErrorKind::Format, "bad weight file magic");
  pos = 4;
  const auto version = static_cast<std::uint16_t>(take(2));
  require(version == kWeightVersion, ErrorKind::Format,
          "unsupported weight file version " + std::to_string(version));
  const auto count = static_cast<std::size_t>(take(2));
  WeightFile file;
  for (std::size_t i = 0; i < count; ++i) {
    WeightRecord r;
    const auto mode = static_cast<std::uint8_t>(take(1));
    require(mode <= static_cast<std::uint8_t>(LayerMode::Pool), ErrorKind::Format,
            "record " + std::to_string(i) + ": unknown layer mode " + std::to_string(mode));
    r.mode = static_cast<LayerMode>(mode);
    r.in_channels = static_cast<std::uint16_t>(take(2));
    r.out_channels = static_cast<std::uint16_t>(take(2));
    r.kernel_h = static_cast<std::uint8_t>(take(1));
    r.kernel_w = static_cast<std::uint8_t>(take(1));
    r.threshold = static_cast<std::int32_t>(static_cast<std::uint32_t>(take(4)));
    r.leak = static_cast<std::int16_t>(static_cast<std::uint16_t>(take(2)));
    LayerSpec extent;
    extent.mode = r.mode;
    extent.in_channels = r.in_channels;
    extent.out_channels = r.out_channels;
    extent.kernel_h = r.kernel_h;
    extent.kernel_w = r.kernel_w;
    r.weights.values.resize(extent.weight_count());
    for (auto& w : r.weights.values) w = static_cast<std::int8_t>(static_cast<std::uint8_t>(take(1)));
    r.weights.bias.resize(extent.bias_count());
    for (auto& b : r.weights.bias) b = static_cast<std::int32_t>(static_cast<std::uint32_t>(take(4)));
    file.layers.push_back(std::move(r));
  }
  require(pos == bytes.size(), ErrorKind::Format, "trailing bytes after the last weight record");
  return file;
}

inline WeightFile save_weights(const NetworkConfig& config,
                               const std::vector<QuantizedWeights>& weights) {
  const auto specs = file_layers(config);
  require(weights.size() == specs.size(), ErrorKind::Config,
          "have " + std::to_string(weights.size()) + " weight sets for " +
              std::to_string(specs.size()) + " layers");
  WeightFile file;
  for (std::size_t i = 0; i < specs.size(); ++i) file.layers.push_back(make_record(specs[i], weights[i]));
  return file;
}

/// Weights bound to a config: thresholds and leaks from the file replace the
/// config's defaults.
struct BoundWeights {
  NetworkConfig config;
  std::optional<QuantizedWeights> encoder;
  std::vector<QuantizedWeights> layers;
};

inline BoundWeights bind_weights(NetworkConfig config, const WeightFile& file) {
  const auto specs = file_layers(config);
  require(file.layers.size() == specs.size(), ErrorKind::Config,
          "weight file has " + std::to_string(file.layers.size()) + " layers, config has " +
              std::to_string(specs.size()));
  BoundWeights bound;
  const std::size_t offset = config.encoder ? 1 : 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const WeightRecord& r = file.layers[i];
    const LayerSpec& s = specs[i];
    const std::string name = i < offset ? std::string("encoder")
                                        : detail::layer_name(i - offset, s);
    require(r.mode == s.mode && r.in_channels == s.in_channels && r.out_channels == s.out_channels &&
                r.kernel_h == s.kernel_h && r.kernel_w == s.kernel_w,
            ErrorKind::Config, "weight record " + std::to_string(i) + " does not match " + name);
    LayerSpec& target = i < offset ? *config.encoder : config.layers[i - offset];
    if (s.mode != LayerMode::Pool) {
      target.threshold = r.threshold;
      target.leak = r.leak;
    }
    if (i < offset) {
      bound.encoder = r.weights;
    } else {
      bound.layers.push_back(r.weights);
    }
  }
  layer_shapes(config);
  bound.config = std::move(config);
  return bound;
}

/// Deterministic pseudo-random weights for every layer in file order.
/// Values are drawn from [-range, range] with raw engine output so the
/// sequence is identical across standard libraries.
inline std::vector<QuantizedWeights> random_weights(const NetworkConfig& config, std::uint64_t seed,
                                                    int range = 127) {
  std::mt19937_64 rng(seed);
  const auto span = static_cast<std::uint64_t>(2 * range + 1);
  std::vector<QuantizedWeights> out;
  for (const auto& spec : file_layers(config)) {
    QuantizedWeights w = QuantizedWeights::zeros(spec);
    for (auto& v : w.values) v = static_cast<std::int8_t>(static_cast<int>(rng() % span) - range);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace stisnn
