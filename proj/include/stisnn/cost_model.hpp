#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stisnn/error.hpp"
#include "stisnn/layer.hpp"
#include "stisnn/network.hpp"
#include "stisnn/params.hpp"

namespace stisnn {

/// Shape of one convolution as seen by the access and latency formulas.
struct LayerGeometry {
  std::uint64_t in_channels = 1;
  std::uint64_t out_channels = 1;
  std::uint64_t kernel_h = 1;
  std::uint64_t kernel_w = 1;
  std::uint64_t in_h = 1;
  std::uint64_t in_w = 1;
  std::uint64_t out_h = 1;
  std::uint64_t out_w = 1;

  friend bool operator==(const LayerGeometry&, const LayerGeometry&) = default;
};

inline LayerGeometry geometry_of(const LayerSpec& spec, const Dims& in) {
  return {spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w,
          in.height,        in.width,          spec.out_height(in.height), spec.out_width(in.width)};
}

struct AccessCounts {
  std::uint64_t input_reads = 0;
  std::uint64_t weight_reads = 0;
  std::uint64_t psum_accesses = 0;

  friend bool operator==(const AccessCounts&, const AccessCounts&) = default;
};

/// Output-stationary standard convolution, one access per operand use.
inline AccessCounts access_counts_os(const LayerGeometry& g, std::uint64_t timesteps) {
  const std::uint64_t uses =
      g.in_channels * g.kernel_w * g.kernel_h * g.out_channels * g.out_w * g.out_h * timesteps;
  return {uses, uses, g.out_channels * g.out_w * g.out_h * (timesteps - 1)};
}

/// Weight-stationary standard convolution.
inline AccessCounts access_counts_ws(const LayerGeometry& g, std::uint64_t timesteps) {
  return {g.kernel_w * g.kernel_h * g.out_w * g.out_h * g.in_channels * g.out_channels * timesteps,
          g.in_channels * g.kernel_w * g.kernel_h * g.out_channels * timesteps,
          g.in_channels * g.out_channels * g.out_w * g.out_h * timesteps};
}

/// Output-stationary counts with line buffering and kernel-slice broadcast:
/// each input pixel is fetched once, each weight access moves a whole
/// K_h x K_w slice.
inline AccessCounts access_counts_mode(LayerMode mode, const LayerGeometry& g,
                                       std::uint64_t timesteps) {
  const std::uint64_t outputs = g.out_channels * g.out_h * g.out_w;
  AccessCounts c{g.in_h * g.in_w * timesteps, 0, outputs * (timesteps - 1)};
  switch (mode) {
    case LayerMode::Standard:
    case LayerMode::Pointwise: c.weight_reads = g.in_channels * outputs * timesteps; break;
    case LayerMode::Depthwise: c.weight_reads = outputs * timesteps; break;
    default:
      fail(ErrorKind::InvariantViolation,
           "no access model for mode " + std::string(to_string(mode)));
  }
  return c;
}

constexpr std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Cycles for one timestep of a convolution layer with p output channels in
/// flight: H_o * W_o * ceil(C_o / p) * [C_i * (T_rw + T_pe) + T_pes].
inline std::uint64_t conv_latency(const LayerGeometry& g, const LatencyParams& lp,
                                  std::uint64_t parallel) {
  require(parallel >= 1, ErrorKind::InvariantViolation, "parallel factor must be >= 1");
  return g.out_h * g.out_w * ceil_div(g.out_channels, parallel) *
         (g.in_channels * (lp.weight_read + lp.pe_accumulate) + lp.psum_reduce);
}

/// Depthwise layers accumulate a single input channel per output channel.
inline std::uint64_t conv_latency(LayerMode mode, LayerGeometry g, const LatencyParams& lp,
                                  std::uint64_t parallel) {
  if (mode == LayerMode::Depthwise) g.in_channels = 1;
  return conv_latency(g, lp, parallel);
}

struct PipelineLatency {
  std::uint64_t makespan = 0;  // cycles to drain all N frames
  double average = 0.0;        // makespan / N
  std::size_t bottleneck = 0;  // index of the slowest stage (first on ties)
};

/// Layer-pipelined latency for N frames: N * T_max + sum of the other stages.
inline PipelineLatency pipeline_latency(std::span<const std::uint64_t> layer_cycles,
                                        std::uint64_t frames) {
  require(!layer_cycles.empty(), ErrorKind::InvariantViolation, "no pipeline stages");
  require(frames >= 1, ErrorKind::InvariantViolation, "frame count must be >= 1");
  const auto it = std::max_element(layer_cycles.begin(), layer_cycles.end());
  std::uint64_t others = 0;
  for (auto c : layer_cycles) others += c;
  others -= *it;
  PipelineLatency out;
  out.bottleneck = static_cast<std::size_t>(it - layer_cycles.begin());
  out.makespan = frames * *it + others;
  out.average = static_cast<double>(out.makespan) / static_cast<double>(frames);
  return out;
}

/// A convolution layer of the accelerator (encoder excluded) with its input dims.
struct ConvLayerRef {
  std::size_t index = 0;
  LayerSpec spec;
  Dims input;
  LayerGeometry geometry;
};

inline std::vector<ConvLayerRef> conv_layers(const NetworkConfig& config) {
  const auto shapes = layer_shapes(config);
  std::vector<ConvLayerRef> out;
  Dims in = accelerator_input(config);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& spec = config.layers[i];
    if (is_conv(spec.mode)) out.push_back({i, spec, in, geometry_of(spec, in)});
    in = shapes[i];
  }
  return out;
}

/// Membrane-potential storage per accelerator conv layer. Zero everywhere
/// at T = 1, where potentials never outlive the PE registers.
inline std::vector<std::uint64_t> vmem_bytes(const NetworkConfig& config, std::uint64_t timesteps) {
  std::vector<std::uint64_t> bytes;
  for (const auto& layer : conv_layers(config)) {
    if (timesteps <= 1) {
      bytes.push_back(0);
      continue;
    }
    const std::uint64_t neurons = layer.geometry.out_h * layer.geometry.out_w *
                                  layer.geometry.out_channels;
    bytes.push_back(ceil_div(neurons * static_cast<std::uint64_t>(layer.spec.vmem_width), 8));
  }
  return bytes;
}

/// Decimal kilobytes, the unit of the storage figures we compare against.
inline constexpr double kBytesPerKB = 1000.0;

/// access energy + accumulate energy + static power x runtime, in joules.
inline double energy_estimate(std::span<const AccessCounts> tallies,
                              std::span<const std::uint64_t> accumulates,
                              const EnergyConstants& ec, double runtime_seconds) {
  require(ec.accumulate_pj >= 0 && ec.input_read_pj >= 0 && ec.weight_read_pj >= 0 &&
              ec.psum_access_pj >= 0 && ec.static_power_w >= 0 && runtime_seconds >= 0,
          ErrorKind::InvariantViolation, "energy constants must be non-negative");
  double pj = 0.0;
  for (const auto& t : tallies) {
    pj += static_cast<double>(t.input_reads) * ec.input_read_pj +
          static_cast<double>(t.weight_reads) * ec.weight_read_pj +
          static_cast<double>(t.psum_accesses) * ec.psum_access_pj;
  }
  for (auto ops : accumulates) pj += static_cast<double>(ops) * ec.accumulate_pj;
  return pj * 1e-12 + ec.static_power_w * runtime_seconds;
}

/// Per-layer modeled cost of the accelerator conv layers at T timesteps.
struct LayerCost {
  std::size_t index = 0;
  LayerMode mode = LayerMode::Standard;
  LayerGeometry geometry;
  AccessCounts accesses;
  std::uint64_t accumulates = 0;  // dense upper bound scaled by activity
  std::uint64_t latency_cycles = 0;  // per timestep, at the layer's parallel factor
  std::uint64_t vmem_bytes = 0;
};

struct CostReport {
  std::vector<LayerCost> layers;
  PipelineLatency pipeline;  // per frame, including all timesteps
  double runtime_seconds = 0.0;
  double energy_joules = 0.0;
};

/// Evaluates the closed-form models over every conv layer. `activity` is the
/// fraction of PE operand reads that carry a spike (1.0 is the dense bound).
inline CostReport cost_report(const NetworkConfig& config, std::uint64_t timesteps,
                              std::uint64_t frames = 1, double activity = 1.0) {
  require(timesteps >= 1, ErrorKind::InvariantViolation, "timesteps must be >= 1");
  require(activity >= 0.0 && activity <= 1.0, ErrorKind::InvariantViolation,
          "activity must lie in [0, 1]");
  CostReport report;
  const auto vmem = vmem_bytes(config, timesteps);
  std::vector<AccessCounts> tallies;
  std::vector<std::uint64_t> ops;
  std::vector<std::uint64_t> cycles;
  const auto layers = conv_layers(config);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    LayerCost c;
    c.index = l.index;
    c.mode = l.spec.mode;
    c.geometry = l.geometry;
    c.accesses = access_counts_mode(l.spec.mode, l.geometry, timesteps);
    const std::uint64_t fan_in = (l.spec.mode == LayerMode::Depthwise ? 1 : l.geometry.in_channels) *
                                 l.geometry.kernel_h * l.geometry.kernel_w;
    const std::uint64_t dense = fan_in * l.geometry.out_channels * l.geometry.out_h *
                                l.geometry.out_w * timesteps;
    c.accumulates = static_cast<std::uint64_t>(static_cast<double>(dense) * activity);
    c.latency_cycles = conv_latency(l.spec.mode, l.geometry, config.latency, l.spec.parallel_factor);
    c.vmem_bytes = vmem[i];
    tallies.push_back(c.accesses);
    ops.push_back(c.accumulates);
    cycles.push_back(c.latency_cycles * timesteps);
    report.layers.push_back(c);
  }
  if (!cycles.empty()) {
    report.pipeline = pipeline_latency(cycles, frames);
    report.runtime_seconds = static_cast<double>(report.pipeline.makespan) / config.energy.clock_hz;
  }
  report.energy_joules = energy_estimate(tallies, ops, config.energy, report.runtime_seconds);
  return report;
}

/// Per-layer conv latencies at the given parallel factors.
inline std::vector<std::uint64_t> conv_latencies(const NetworkConfig& config,
                                                 std::span<const std::size_t> factors) {
  const auto layers = conv_layers(config);
  require(factors.size() == layers.size(), ErrorKind::InvariantViolation,
          "need one parallel factor per conv layer (" + std::to_string(layers.size()) + ")");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.push_back(conv_latency(layers[i].spec.mode, layers[i].geometry, config.latency, factors[i]));
  }
  return out;
}

/// Bottleneck latency with all-ones factors divided by bottleneck latency at `factors`.
inline double bottleneck_speedup(const NetworkConfig& config, std::span<const std::size_t> factors) {
  const std::vector<std::size_t> ones(factors.size(), 1);
  const auto base = conv_latencies(config, ones);
  const auto tuned = conv_latencies(config, factors);
  return static_cast<double>(*std::max_element(base.begin(), base.end())) /
         static_cast<double>(*std::max_element(tuned.begin(), tuned.end()));
}

/// Per-layer output-channel parallelism minimizing the bottleneck latency
/// subject to sum(p * K_h * K_w) <= pe_budget. Among optimal assignments the
/// one with the fewest PEs is returned; it is unique because each layer
/// takes the smallest factor that meets the optimal bottleneck.
inline std::vector<std::size_t> best_parallel_factors(const NetworkConfig& config,
                                                      std::uint64_t pe_budget) {
  const auto layers = conv_layers(config);
  require(!layers.empty(), ErrorKind::Infeasible, "network has no convolution layers");
  std::uint64_t floor_cost = 0;
  for (const auto& l : layers) floor_cost += l.geometry.kernel_h * l.geometry.kernel_w;
  require(floor_cost <= pe_budget, ErrorKind::Infeasible,
          "budget of " + std::to_string(pe_budget) + " PEs cannot hold one PE set per layer (" +
              std::to_string(floor_cost) + " needed)");

  auto latency = [&](const ConvLayerRef& l, std::uint64_t p) {
    return conv_latency(l.spec.mode, l.geometry, config.latency, p);
  };
  // Smallest p with latency <= target, or 0 if none.
  auto min_factor = [&](const ConvLayerRef& l, std::uint64_t target) -> std::uint64_t {
    std::uint64_t lo = 1, hi = l.geometry.out_channels;
    if (latency(l, hi) > target) return 0;
    while (lo < hi) {
      const std::uint64_t mid = lo + (hi - lo) / 2;
      if (latency(l, mid) <= target) hi = mid; else lo = mid + 1;
    }
    return lo;
  };

  std::vector<std::uint64_t> candidates;
  for (const auto& l : layers) {
    for (std::uint64_t p = 1; p <= l.geometry.out_channels; ++p) candidates.push_back(latency(l, p));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Feasibility is monotone in the target, so binary search the sorted candidates.
  auto assign = [&](std::uint64_t target, std::vector<std::size_t>* out) {
    std::uint64_t pes = 0;
    if (out) out->clear();
    for (const auto& l : layers) {
      const std::uint64_t p = min_factor(l, target);
      if (p == 0) return false;
      pes += p * l.geometry.kernel_h * l.geometry.kernel_w;
      if (out) out->push_back(static_cast<std::size_t>(p));
    }
    return pes <= pe_budget;
  };
  std::size_t lo = 0, hi = candidates.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (assign(candidates[mid], nullptr)) hi = mid; else lo = mid + 1;
  }
  std::vector<std::size_t> factors;
  assign(candidates[lo], &factors);
  return factors;
}

}  // namespace stisnn
