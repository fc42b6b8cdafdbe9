#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stisnn/error.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/line_buffer.hpp"
#include "stisnn/neuron.hpp"
#include "stisnn/spike.hpp"

namespace stisnn {

/// Memory-traffic counters gathered while a layer runs.
///
/// `input_reads` counts off-chip spike-vector fetches (one per real input
/// pixel, thanks to the line buffer). `pe_input_reads` counts spike-vector
/// bit reads by the PEs, one per (c_i, k_h, k_w) per output neuron.
/// `weight_reads` counts individual int8 weights delivered to PEs;
/// `weight_broadcasts` counts K_h x K_w kernel slices broadcast to the array.
/// `psum_accesses` counts membrane-potential reloads from the Vmem buffer.
struct AccessTally {
  std::uint64_t input_reads = 0;
  std::uint64_t pe_input_reads = 0;
  std::uint64_t weight_reads = 0;
  std::uint64_t weight_broadcasts = 0;
  std::uint64_t psum_accesses = 0;
  std::uint64_t accumulates = 0;

  AccessTally& operator+=(const AccessTally& o) {
    input_reads += o.input_reads;
    pe_input_reads += o.pe_input_reads;
    weight_reads += o.weight_reads;
    weight_broadcasts += o.weight_broadcasts;
    psum_accesses += o.psum_accesses;
    accumulates += o.accumulates;
    return *this;
  }

  friend bool operator==(const AccessTally&, const AccessTally&) = default;
};

struct LayerOutput {
  SpikeFrame frame;
  MembraneState state;
  AccessTally tally;
};

namespace detail {

inline void check_conv_input(const SpikeFrame& input, const LayerSpec& spec,
                             const QuantizedWeights& w, LayerMode expected) {
  require(spec.mode == expected, ErrorKind::InvariantViolation,
          "layer mode is " + std::string(to_string(spec.mode)) + ", expected " +
              std::string(to_string(expected)));
  spec.validate();
  w.check_extents(spec);
  require(input.channels() == spec.in_channels, ErrorKind::Shape,
          "input has " + std::to_string(input.channels()) + " channels, layer expects " +
              std::to_string(spec.in_channels));
  require(input.height() + 2 * spec.padding >= spec.kernel_h &&
              input.width() + 2 * spec.padding >= spec.kernel_w,
          ErrorKind::Shape, "kernel larger than padded input");
}

// Drives the padded input through a line buffer in raster order and hands
// every receptive window to `psum_of(window, c_o, tally)`, which models the
// PE array for one output channel and returns the adder-tree sum.
template <class PsumFn>
LayerOutput run_conv(const SpikeFrame& input, const LayerSpec& spec, const QuantizedWeights& w,
                     MembraneState state, PsumFn&& psum_of) {
  const std::size_t h_out = spec.out_height(input.height());
  const std::size_t w_out = spec.out_width(input.width());
  const std::size_t neurons = h_out * w_out * spec.out_channels;
  if (state.persistent()) {
    require(state.potentials.size() == neurons, ErrorKind::Shape,
            "membrane state holds " + std::to_string(state.potentials.size()) +
                " potentials, layer has " + std::to_string(neurons) + " neurons");
  }
  state.width = spec.vmem_width;

  LayerOutput out{SpikeFrame(h_out, w_out, spec.out_channels), std::move(state), {}};
  AccessTally& tally = out.tally;
  const bool reload = out.state.persistent() && out.state.steps > 0;

  const std::size_t pad = spec.padding;
  const std::size_t padded_h = input.height() + 2 * pad;
  const std::size_t padded_w = input.width() + 2 * pad;
  const SpikeVector zero(spec.in_channels);
  LineBuffer buffer(padded_w, spec.kernel_h, spec.kernel_w, spec.in_channels);

  for (std::size_t py = 0; py < padded_h; ++py) {
    for (std::size_t px = 0; px < padded_w; ++px) {
      const bool real = py >= pad && px >= pad && py - pad < input.height() &&
                        px - pad < input.width();
      if (real) ++tally.input_reads;
      auto window = buffer.push(real ? input.at(py - pad, px - pad) : zero);
      if (!window) continue;

      SpikeVector& spikes = out.frame.at(window->out_y, window->out_x);
      const std::size_t base = (window->out_y * w_out + window->out_x) * spec.out_channels;
      for (std::size_t co = 0; co < spec.out_channels; ++co) {
        const std::int32_t current = psum_of(*window, co, tally) + w.bias[co];
        std::int32_t u_prev = 0;
        if (out.state.persistent()) {
          u_prev = out.state.potentials[base + co];
          if (reload) ++tally.psum_accesses;
        }
        const NeuronOutput n = neuron_step(u_prev, current, spec);
        if (out.state.persistent()) out.state.potentials[base + co] = n.potential;
        if (n.spike) spikes.set(co);
      }
    }
  }
  if (out.state.persistent()) ++out.state.steps;
  return out;
}

// Standard/pointwise PE array: for each input channel the K_h x K_w kernel
// slice is broadcast and each PE accumulates its weight when its spike bit
// for that channel is set.
inline auto standard_psum(const LayerSpec& spec, const QuantizedWeights& w) {
  return [&spec, &w](const ReceptiveWindow& win, std::size_t co, AccessTally& tally) {
    const std::size_t taps = spec.kernel_h * spec.kernel_w;
    std::int64_t sum = 0;
    for (std::size_t ci = 0; ci < spec.in_channels; ++ci) {
      ++tally.weight_broadcasts;
      tally.weight_reads += taps;
      tally.pe_input_reads += taps;
      const std::int8_t* slice = &w.values[standard_index(spec, co, ci, 0, 0)];
      for (std::size_t k = 0; k < taps; ++k) {
        if (win.vectors[k].test(ci)) {
          sum += slice[k];
          ++tally.accumulates;
        }
      }
    }
    return static_cast<std::int32_t>(sum);
  };
}

}  // namespace detail

/// Standard convolution in the output-stationary dataflow.
inline LayerOutput conv_standard(const SpikeFrame& input, const LayerSpec& spec,
                                 const QuantizedWeights& w, MembraneState state) {
  detail::check_conv_input(input, spec, w, LayerMode::Standard);
  return detail::run_conv(input, spec, w, std::move(state), detail::standard_psum(spec, w));
}

/// 1x1 convolution: a single PE whose sum goes straight to the threshold.
inline LayerOutput conv_pointwise(const SpikeFrame& input, const LayerSpec& spec,
                                  const QuantizedWeights& w, MembraneState state) {
  detail::check_conv_input(input, spec, w, LayerMode::Pointwise);
  return detail::run_conv(input, spec, w, std::move(state), detail::standard_psum(spec, w));
}

/// Per-channel convolution: PEs emit the loaded weight on a spike, with no
/// accumulation across channels.
inline LayerOutput conv_depthwise(const SpikeFrame& input, const LayerSpec& spec,
                                  const QuantizedWeights& w, MembraneState state) {
  detail::check_conv_input(input, spec, w, LayerMode::Depthwise);
  auto psum = [&spec, &w](const ReceptiveWindow& win, std::size_t c, AccessTally& tally) {
    const std::size_t taps = spec.kernel_h * spec.kernel_w;
    ++tally.weight_broadcasts;
    tally.weight_reads += taps;
    tally.pe_input_reads += taps;
    const std::int8_t* slice = &w.values[depthwise_index(spec, c, 0, 0)];
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < taps; ++k) {
      if (win.vectors[k].test(c)) {
        sum += slice[k];
        ++tally.accumulates;
      }
    }
    return static_cast<std::int32_t>(sum);
  };
  return detail::run_conv(input, spec, w, std::move(state), psum);
}

inline LayerOutput conv_layer(const SpikeFrame& input, const LayerSpec& spec,
                              const QuantizedWeights& w, MembraneState state) {
  switch (spec.mode) {
    case LayerMode::Standard: return conv_standard(input, spec, w, std::move(state));
    case LayerMode::Depthwise: return conv_depthwise(input, spec, w, std::move(state));
    case LayerMode::Pointwise: return conv_pointwise(input, spec, w, std::move(state));
    default: fail(ErrorKind::InvariantViolation, "conv_layer called on a non-convolution layer");
  }
}

/// Binary max-pooling as a bitwise OR over non-overlapping window x window
/// blocks, fed through a line buffer of depth W.
inline SpikeFrame pool_or(const SpikeFrame& input, std::size_t window = 2,
                          AccessTally* tally = nullptr) {
  require(window >= 1, ErrorKind::Shape, "pooling window must be >= 1");
  require(input.height() % window == 0 && input.width() % window == 0, ErrorKind::Shape,
          "pooling window " + std::to_string(window) + " does not divide " +
              std::to_string(input.height()) + "x" + std::to_string(input.width()));
  SpikeFrame out(input.height() / window, input.width() / window, input.channels());
  LineBuffer buffer(input.width(), window, window, input.channels());
  for (std::size_t y = 0; y < input.height(); ++y) {
    for (std::size_t x = 0; x < input.width(); ++x) {
      auto win = buffer.push(input.at(y, x));
      if (tally) ++tally->input_reads;
      if (!win || win->out_y % window != 0 || win->out_x % window != 0) continue;
      SpikeVector& dst = out.at(win->out_y / window, win->out_x / window);
      for (const auto& v : win->vectors) dst |= v;
    }
  }
  return out;
}

/// Row-major spatial, channel-minor flattening used by the FC head.
inline SpikeVector flatten(const SpikeFrame& input) {
  SpikeVector flat(input.neurons());
  std::size_t i = 0;
  for (std::size_t y = 0; y < input.height(); ++y) {
    for (std::size_t x = 0; x < input.width(); ++x) {
      const SpikeVector& v = input.at(y, x);
      for (std::size_t c = 0; c < input.channels(); ++c, ++i) {
        if (v.test(c)) flat.set(i);
      }
    }
  }
  return flat;
}

/// Classification head: raw potentials per class, no threshold.
inline std::vector<std::int32_t> fully_connected(const SpikeFrame& input, const LayerSpec& spec,
                                                 const QuantizedWeights& w,
                                                 AccessTally* tally = nullptr) {
  require(spec.mode == LayerMode::FullyConnected, ErrorKind::InvariantViolation,
          "fully_connected called on a " + std::string(to_string(spec.mode)) + " layer");
  w.check_extents(spec);
  require(input.neurons() == spec.in_channels, ErrorKind::Shape,
          "flattened input has " + std::to_string(input.neurons()) + " entries, layer expects " +
              std::to_string(spec.in_channels));
  const SpikeVector flat = flatten(input);
  std::vector<std::int32_t> potentials(spec.out_channels);
  const std::span<const std::int8_t> all(w.values);
  for (std::size_t co = 0; co < spec.out_channels; ++co) {
    potentials[co] =
        integrate_inputs(flat, all.subspan(co * spec.in_channels, spec.in_channels), w.bias[co]);
  }
  if (tally) {
    tally->input_reads += input.height() * input.width();
    tally->weight_reads += spec.in_channels * spec.out_channels;
    tally->accumulates += flat.count() * spec.out_channels;
  }
  return potentials;
}

}  // namespace stisnn
