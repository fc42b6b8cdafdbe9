#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stisnn/error.hpp"

namespace stisnn {

enum class LayerMode : std::uint8_t {
  Standard = 0,
  Depthwise = 1,
  Pointwise = 2,
  FullyConnected = 3,
  Pool = 4,
};

constexpr std::string_view to_string(LayerMode mode) {
  switch (mode) {
    case LayerMode::Standard: return "standard";
    case LayerMode::Depthwise: return "depthwise";
    case LayerMode::Pointwise: return "pointwise";
    case LayerMode::FullyConnected: return "fc";
    case LayerMode::Pool: return "pool";
  }
  return "unknown";
}

constexpr bool is_conv(LayerMode mode) {
  return mode == LayerMode::Standard || mode == LayerMode::Depthwise ||
         mode == LayerMode::Pointwise;
}

/// 8.8 fixed-point leak multiplier; 256 is 1.0 (IF neuron).
inline constexpr std::int16_t kLeakOne = 256;
inline constexpr int kLeakFractionBits = 8;
inline constexpr int kDefaultVmemWidth = 18;

/// Geometry and neuron parameters of one layer.
///
/// For Pool layers the kernel is the pooling window and in == out channels.
/// For FullyConnected layers in_channels is the flattened input length.
struct LayerSpec {
  LayerMode mode = LayerMode::Standard;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::int32_t threshold = 1;
  std::int16_t leak = kLeakOne;
  std::size_t parallel_factor = 1;
  int vmem_width = kDefaultVmemWidth;

  std::size_t out_height(std::size_t in_height) const {
    if (mode == LayerMode::Pool) return in_height / kernel_h;
    if (mode == LayerMode::FullyConnected) return 1;
    return in_height + 2 * padding - kernel_h + 1;
  }
  std::size_t out_width(std::size_t in_width) const {
    if (mode == LayerMode::Pool) return in_width / kernel_w;
    if (mode == LayerMode::FullyConnected) return 1;
    return in_width + 2 * padding - kernel_w + 1;
  }

  /// Number of int8 weights this layer carries.
  std::size_t weight_count() const {
    switch (mode) {
      case LayerMode::Standard:
      case LayerMode::Pointwise:
        return out_channels * in_channels * kernel_h * kernel_w;
      case LayerMode::Depthwise: return out_channels * kernel_h * kernel_w;
      case LayerMode::FullyConnected: return out_channels * in_channels;
      case LayerMode::Pool: return 0;
    }
    return 0;
  }
  std::size_t bias_count() const { return mode == LayerMode::Pool ? 0 : out_channels; }

  void validate() const {
    const std::string where = "layer (" + std::string(to_string(mode)) + "): ";
    require(in_channels >= 1 && out_channels >= 1, ErrorKind::InvariantViolation,
            where + "channel counts must be positive");
    require(kernel_h >= 1 && kernel_w >= 1, ErrorKind::InvariantViolation,
            where + "kernel must be at least 1x1");
    require(stride == 1, ErrorKind::InvariantViolation, where + "only stride 1 is supported");
    require(parallel_factor >= 1 && parallel_factor <= out_channels,
            ErrorKind::InvariantViolation, where + "parallel factor must lie in [1, C_o]");
    require(vmem_width >= 2 && vmem_width <= 32, ErrorKind::InvariantViolation,
            where + "vmem width must lie in [2, 32]");
    switch (mode) {
      case LayerMode::Depthwise:
        require(in_channels == out_channels, ErrorKind::InvariantViolation,
                where + "depthwise requires C_i == C_o");
        break;
      case LayerMode::Pointwise:
        require(kernel_h == 1 && kernel_w == 1, ErrorKind::InvariantViolation,
                where + "pointwise requires a 1x1 kernel");
        break;
      case LayerMode::Pool:
        require(in_channels == out_channels, ErrorKind::InvariantViolation,
                where + "pooling preserves channel count");
        require(kernel_h == kernel_w, ErrorKind::InvariantViolation,
                where + "pooling window must be square");
        return;  // no threshold
      case LayerMode::FullyConnected:
        require(kernel_h == 1 && kernel_w == 1, ErrorKind::InvariantViolation,
                where + "fully connected layers have no spatial kernel");
        break;
      case LayerMode::Standard: break;
    }
    require(threshold > 0, ErrorKind::InvariantViolation, where + "threshold must be positive");
  }
};

/// int8 weights in [c_o][c_i][k_h][k_w] order (depthwise: [c][k_h][k_w]) plus
/// one int32 bias per output channel.
struct QuantizedWeights {
  std::vector<std::int8_t> values;
  std::vector<std::int32_t> bias;

  static QuantizedWeights zeros(const LayerSpec& spec) {
    return {std::vector<std::int8_t>(spec.weight_count(), 0),
            std::vector<std::int32_t>(spec.bias_count(), 0)};
  }

  void check_extents(const LayerSpec& spec) const {
    require(values.size() == spec.weight_count(), ErrorKind::Shape,
            "weight count " + std::to_string(values.size()) + " does not match layer extent " +
                std::to_string(spec.weight_count()));
    require(bias.size() == spec.bias_count(), ErrorKind::Shape,
            "bias count " + std::to_string(bias.size()) + " does not match layer extent " +
                std::to_string(spec.bias_count()));
  }

  friend bool operator==(const QuantizedWeights&, const QuantizedWeights&) = default;
};

inline std::size_t standard_index(const LayerSpec& s, std::size_t co, std::size_t ci,
                                  std::size_t kh, std::size_t kw) {
  return ((co * s.in_channels + ci) * s.kernel_h + kh) * s.kernel_w + kw;
}

inline std::size_t depthwise_index(const LayerSpec& s, std::size_t c, std::size_t kh,
                                   std::size_t kw) {
  return (c * s.kernel_h + kh) * s.kernel_w + kw;
}

/// Per-neuron membrane potentials of one layer. Empty when the layer runs a
/// single timestep: nothing is carried between steps, so nothing is stored.
struct MembraneState {
  int width = kDefaultVmemWidth;
  std::vector<std::int32_t> potentials;
  /// Timesteps already integrated into `potentials`.
  std::size_t steps = 0;

  static MembraneState stateless(int width = kDefaultVmemWidth) { return {width, {}, 0}; }
  static MembraneState allocate(std::size_t neurons, int width) {
    return {width, std::vector<std::int32_t>(neurons, 0), 0};
  }

  bool persistent() const noexcept { return !potentials.empty(); }
  std::size_t storage_bits() const noexcept {
    return potentials.size() * static_cast<std::size_t>(width);
  }

  friend bool operator==(const MembraneState&, const MembraneState&) = default;
};

}  // namespace stisnn
