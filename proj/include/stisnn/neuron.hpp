#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>

#include "stisnn/error.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/rational.hpp"
#include "stisnn/spike.hpp"

namespace stisnn {

/// Largest magnitude a `width`-bit saturating potential may hold.
constexpr std::int64_t vmem_limit(int width) { return (std::int64_t{1} << (width - 1)) - 1; }

constexpr std::int32_t saturate(std::int64_t value, int width) {
  const std::int64_t lim = vmem_limit(width);
  return static_cast<std::int32_t>(std::clamp(value, -lim, lim));
}

/// bias + sum of the weights whose channel spiked.
inline std::int32_t integrate_inputs(const SpikeVector& spikes,
                                     std::span<const std::int8_t> weight_column,
                                     std::int32_t bias) {
  require(weight_column.size() == spikes.size(), ErrorKind::Shape,
          "weight column length " + std::to_string(weight_column.size()) +
              " != spike vector length " + std::to_string(spikes.size()));
  std::int64_t acc = bias;
  for (std::size_t j = 0; j < spikes.size(); ++j) {
    if (spikes.test(j)) acc += weight_column[j];
  }
  return static_cast<std::int32_t>(
      std::clamp<std::int64_t>(acc, INT32_MIN, INT32_MAX));
}

struct NeuronOutput {
  std::int32_t potential = 0;
  bool spike = false;

  friend bool operator==(const NeuronOutput&, const NeuronOutput&) = default;
};

/// Leak (truncating 8.8 multiply), integrate, saturate, then fire with hard
/// reset when the potential reaches the threshold.
constexpr NeuronOutput neuron_step(std::int32_t u_prev, std::int32_t input,
                                   std::int32_t threshold, std::int16_t leak, int width) {
  // Division truncates toward zero, unlike an arithmetic shift.
  const std::int64_t leaked = (std::int64_t{leak} * u_prev) / (std::int64_t{1} << kLeakFractionBits);
  const std::int32_t u_tmp = saturate(leaked + input, width);
  if (u_tmp >= threshold) return {0, true};
  return {u_tmp, false};
}

constexpr NeuronOutput neuron_step(std::int32_t u_prev, std::int32_t input, const LayerSpec& spec) {
  return neuron_step(u_prev, input, spec.threshold, spec.leak, spec.vmem_width);
}

/// Spike firing rate: spikes over all timesteps divided by one frame's neuron
/// count. Lies in [0, T].
inline Rational sfr_of_frame(const SpikeTensor& frames) {
  require(frames.timesteps() >= 1, ErrorKind::DegenerateInput, "empty spike tensor");
  const std::size_t neurons = frames.frame(0).neurons();
  require(neurons > 0, ErrorKind::DegenerateInput, "frame has zero neurons");
  std::uint64_t spikes = 0;
  for (const auto& f : frames.frames()) spikes += f.spike_count();
  return Rational(spikes, neurons);
}

}  // namespace stisnn
