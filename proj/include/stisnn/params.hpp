#pragma once

#include <cstdint>

namespace stisnn {

/// Cycle costs of the convolution engine's inner loop.
struct LatencyParams {
  std::uint64_t weight_read = 0;    // T_rw, hidden by prefetch in the optimized engine
  std::uint64_t pe_accumulate = 1;  // T_pe
  std::uint64_t psum_reduce = 0;    // T_pes

  friend bool operator==(const LatencyParams&, const LatencyParams&) = default;
};

/// Placeholder per-event energies (picojoules) and static power (watts).
/// Only ratios between runs are meaningful.
struct EnergyConstants {
  double accumulate_pj = 0.03;
  double input_read_pj = 0.5;
  double weight_read_pj = 1.0;
  double psum_access_pj = 2.0;
  double static_power_w = 0.5;
  double clock_hz = 200e6;

  friend bool operator==(const EnergyConstants&, const EnergyConstants&) = default;
};

}  // namespace stisnn
