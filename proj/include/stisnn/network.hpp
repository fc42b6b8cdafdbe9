#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stisnn/dataflow.hpp"
#include "stisnn/error.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/neuron.hpp"
#include "stisnn/params.hpp"
#include "stisnn/rational.hpp"
#include "stisnn/spike.hpp"

namespace stisnn {

struct Dims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Whole-network description. When `encoder` is set, `input` describes the
/// raw image and the encoder's spikes feed `layers`; otherwise `input` is
/// already a spike map.
struct NetworkConfig {
  std::string name;
  Dims input;
  std::size_t timesteps = 1;
  std::optional<LayerSpec> encoder;
  std::vector<LayerSpec> layers;
  LatencyParams latency;
  EnergyConstants energy;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline Dims output_dims(const LayerSpec& spec, const Dims& in) {
  if (spec.mode == LayerMode::FullyConnected) return {1, 1, spec.out_channels};
  return {spec.out_height(in.height), spec.out_width(in.width), spec.out_channels};
}

namespace detail {

inline std::string layer_name(std::size_t index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + std::string(to_string(spec.mode)) + ")";
}

// Validates one link of the chain and returns its output dims.
inline Dims check_link(const std::string& name, const LayerSpec& spec, const Dims& in) {
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, name + ": " + e.what());
  }
  if (spec.mode == LayerMode::FullyConnected) {
    require(spec.in_channels == in.size(), ErrorKind::Config,
            name + ": expects " + std::to_string(spec.in_channels) + " inputs, receives " +
                std::to_string(in.size()));
    return output_dims(spec, in);
  }
  require(spec.in_channels == in.channels, ErrorKind::Config,
          name + ": expects " + std::to_string(spec.in_channels) + " channels, receives " +
              std::to_string(in.channels));
  if (spec.mode == LayerMode::Pool) {
    require(in.height % spec.kernel_h == 0 && in.width % spec.kernel_w == 0, ErrorKind::Config,
            name + ": pooling window " + std::to_string(spec.kernel_h) + " does not divide " +
                std::to_string(in.height) + "x" + std::to_string(in.width));
  } else {
    require(in.height + 2 * spec.padding >= spec.kernel_h &&
                in.width + 2 * spec.padding >= spec.kernel_w,
            ErrorKind::Config, name + ": kernel larger than padded input");
  }
  return output_dims(spec, in);
}

}  // namespace detail

/// Dims entering the accelerator layers (the encoder output when present).
inline Dims accelerator_input(const NetworkConfig& config) {
  if (!config.encoder) return config.input;
  return detail::check_link("encoder", *config.encoder, config.input);
}

/// Output dims of every layer; throws a config error naming the first
/// layer whose input does not match.
inline std::vector<Dims> layer_shapes(const NetworkConfig& config) {
  require(config.timesteps >= 1, ErrorKind::Config, "timesteps must be >= 1");
  require(config.input.size() > 0, ErrorKind::Config, "input dims must be positive");
  if (config.encoder) {
    require(config.encoder->mode == LayerMode::Standard, ErrorKind::Config,
            "encoder must be a standard convolution");
  }
  Dims dims = accelerator_input(config);
  std::vector<Dims> shapes;
  shapes.reserve(config.layers.size());
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    if (spec.mode == LayerMode::FullyConnected) {
      require(i + 1 == config.layers.size(), ErrorKind::Config,
              detail::layer_name(i, spec) + ": fully connected layer must be last");
    }
    dims = detail::check_link(detail::layer_name(i, spec), spec, dims);
    shapes.push_back(dims);
  }
  return shapes;
}

/// Per-layer summary of one network run.
struct LayerActivity {
  LayerMode mode = LayerMode::Standard;
  Rational sfr;  // spikes over all timesteps / neurons; zero for the FC head
  AccessTally tally;
  std::size_t vmem_bits = 0;  // membrane storage the layer allocated
};

struct NetworkResult {
  std::vector<std::int64_t> class_scores;
  std::vector<LayerActivity> layers;

  std::size_t predicted_class() const {
    return static_cast<std::size_t>(
        std::max_element(class_scores.begin(), class_scores.end()) - class_scores.begin());
  }
};

/// Membrane states for one run: persistent for conv layers when T > 1,
/// empty otherwise.
inline std::vector<MembraneState> initial_states(const NetworkConfig& config) {
  const auto shapes = layer_shapes(config);
  std::vector<MembraneState> states;
  states.reserve(config.layers.size());
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    if (config.timesteps > 1 && is_conv(spec.mode)) {
      states.push_back(MembraneState::allocate(shapes[i].size(), spec.vmem_width));
    } else {
      states.push_back(MembraneState::stateless(spec.vmem_width));
    }
  }
  return states;
}

struct StepResult {
  std::vector<std::int64_t> class_scores;
  std::vector<SpikeFrame> outputs;  // one per layer; FC entries are empty
  std::vector<AccessTally> tallies;
};

/// Runs every layer once on one timestep's input, threading `states`.
inline StepResult run_timestep(const NetworkConfig& config,
                               const std::vector<QuantizedWeights>& weights,
                               const SpikeFrame& input, std::vector<MembraneState>& states) {
  require(weights.size() == config.layers.size(), ErrorKind::Config,
          "weight list has " + std::to_string(weights.size()) + " layers, config has " +
              std::to_string(config.layers.size()));
  require(states.size() == config.layers.size(), ErrorKind::Config,
          "membrane state list does not match layer count");
  const Dims in = accelerator_input(config);
  require(input.height() == in.height && input.width() == in.width &&
              input.channels() == in.channels,
          ErrorKind::Shape, "input frame does not match the configured input dims");

  StepResult step;
  step.outputs.reserve(config.layers.size());
  step.tallies.resize(config.layers.size());
  const SpikeFrame* current = &input;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    if (is_conv(spec.mode)) {
      LayerOutput out = conv_layer(*current, spec, weights[i], std::move(states[i]));
      states[i] = std::move(out.state);
      step.tallies[i] = out.tally;
      step.outputs.push_back(std::move(out.frame));
    } else if (spec.mode == LayerMode::Pool) {
      step.outputs.push_back(pool_or(*current, spec.kernel_h, &step.tallies[i]));
    } else {
      auto potentials = fully_connected(*current, spec, weights[i], &step.tallies[i]);
      step.class_scores.assign(potentials.begin(), potentials.end());
      step.outputs.emplace_back();
    }
    current = &step.outputs.back();
  }
  if (config.layers.empty() || config.layers.back().mode != LayerMode::FullyConnected) {
    // Without a classification head, score each output channel by its spikes.
    const SpikeFrame& last = config.layers.empty() ? input : step.outputs.back();
    step.class_scores.assign(last.channels(), 0);
    for (std::size_t y = 0; y < last.height(); ++y) {
      for (std::size_t x = 0; x < last.width(); ++x) {
        for (std::size_t c = 0; c < last.channels(); ++c) step.class_scores[c] += last.test(y, x, c);
      }
    }
  }
  return step;
}

/// Executes the network over all timesteps of `input`. Class scores are
/// summed across timesteps; membrane potentials persist only when T > 1.
inline NetworkResult run_network(const NetworkConfig& config,
                                 const std::vector<QuantizedWeights>& weights,
                                 const SpikeTensor& input) {
  const auto shapes = layer_shapes(config);
  require(input.timesteps() == config.timesteps, ErrorKind::Config,
          "input has " + std::to_string(input.timesteps()) + " timesteps, config expects " +
              std::to_string(config.timesteps));
  for (std::size_t i = 0; i < weights.size() && i < config.layers.size(); ++i) {
    try {
      weights[i].check_extents(config.layers[i]);
    } catch (const Error& e) {
      fail(ErrorKind::Config, detail::layer_name(i, config.layers[i]) + ": " + e.what());
    }
  }

  auto states = initial_states(config);
  NetworkResult result;
  result.layers.resize(config.layers.size());
  std::vector<std::uint64_t> spikes(config.layers.size(), 0);
  for (std::size_t t = 0; t < input.timesteps(); ++t) {
    StepResult step = run_timestep(config, weights, input.frame(t), states);
    if (result.class_scores.empty()) result.class_scores.assign(step.class_scores.size(), 0);
    for (std::size_t c = 0; c < step.class_scores.size(); ++c) {
      result.class_scores[c] += step.class_scores[c];
    }
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
      result.layers[i].tally += step.tallies[i];
      spikes[i] += step.outputs[i].spike_count();
    }
  }
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    result.layers[i].mode = spec.mode;
    if (spec.mode != LayerMode::FullyConnected) {
      result.layers[i].sfr = Rational(spikes[i], shapes[i].size());
    }
    result.layers[i].vmem_bits = states[i].storage_bits();
  }
  return result;
}

/// 8-bit image, pixels stored [y][x][c].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

/// Spike encoding by the first (standard) convolution over raw pixel
/// intensities. The same current is injected every timestep; membrane
/// potentials persist across timesteps when T > 1.
inline SpikeTensor encode_input(const Image& image, const LayerSpec& spec,
                                const QuantizedWeights& w, std::size_t timesteps) {
  require(spec.mode == LayerMode::Standard, ErrorKind::InvariantViolation,
          "encoder must be a standard convolution");
  spec.validate();
  w.check_extents(spec);
  require(image.channels == spec.in_channels, ErrorKind::Shape,
          "image has " + std::to_string(image.channels) + " channels, encoder expects " +
              std::to_string(spec.in_channels));
  require(image.pixels.size() == image.height * image.width * image.channels, ErrorKind::Shape,
          "image pixel buffer does not match its dims");
  require(timesteps >= 1, ErrorKind::Shape, "timesteps must be >= 1");
  require(image.height + 2 * spec.padding >= spec.kernel_h &&
              image.width + 2 * spec.padding >= spec.kernel_w,
          ErrorKind::Shape, "encoder kernel larger than padded image");

  const std::size_t h_out = spec.out_height(image.height);
  const std::size_t w_out = spec.out_width(image.width);
  std::vector<std::int32_t> current(h_out * w_out * spec.out_channels);
  const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
  for (std::size_t y = 0; y < h_out; ++y) {
    for (std::size_t x = 0; x < w_out; ++x) {
      for (std::size_t co = 0; co < spec.out_channels; ++co) {
        std::int64_t acc = w.bias[co];
        for (std::size_t ci = 0; ci < spec.in_channels; ++ci) {
          for (std::size_t kh = 0; kh < spec.kernel_h; ++kh) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + kh) - pad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(image.height)) continue;
            for (std::size_t kw = 0; kw < spec.kernel_w; ++kw) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kw) - pad;
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(image.width)) continue;
              acc += std::int64_t{w.values[standard_index(spec, co, ci, kh, kw)]} *
                     image.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ci);
            }
          }
        }
        current[(y * w_out + x) * spec.out_channels + co] =
            static_cast<std::int32_t>(std::clamp<std::int64_t>(acc, INT32_MIN, INT32_MAX));
      }
    }
  }

  std::vector<std::int32_t> potentials(current.size(), 0);
  std::vector<SpikeFrame> frames;
  frames.reserve(timesteps);
  for (std::size_t t = 0; t < timesteps; ++t) {
    SpikeFrame frame(h_out, w_out, spec.out_channels);
    for (std::size_t y = 0; y < h_out; ++y) {
      for (std::size_t x = 0; x < w_out; ++x) {
        for (std::size_t co = 0; co < spec.out_channels; ++co) {
          const std::size_t idx = (y * w_out + x) * spec.out_channels + co;
          const NeuronOutput n = neuron_step(potentials[idx], current[idx], spec);
          potentials[idx] = n.potential;
          if (n.spike) frame.set(y, x, co);
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return SpikeTensor(std::move(frames));
}

}  // namespace stisnn
