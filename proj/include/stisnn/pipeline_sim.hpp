#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "stisnn/cost_model.hpp"
#include "stisnn/error.hpp"

namespace stisnn {

/// One layer of the streaming pipeline. `capacity` bounds the FIFO in front
/// of the stage (unbounded when empty); stage 0 reads from the frame source
/// and ignores it.
struct StageModel {
  std::string label;
  std::uint64_t service_cycles = 1;
  std::optional<std::size_t> capacity;
};

struct StageTiming {
  std::uint64_t start = 0;
  std::uint64_t finish = 0;
  std::uint64_t depart = 0;     // handed downstream; later than finish when blocked
  std::size_t occupancy = 0;    // input FIFO depth right after this frame arrived
};

struct PipelineTrace {
  std::vector<std::vector<StageTiming>> timing;  // [frame][stage]
  std::vector<std::size_t> completion_order;     // frames leaving the last stage
  std::vector<std::size_t> max_occupancy;        // per stage input FIFO
  std::uint64_t makespan = 0;
  double avg_latency = 0.0;
};

namespace detail {

// Event-driven tandem of stations with blocking-after-service: a finished
// frame stays in its stage until the downstream FIFO has room, and the stage
// cannot start another frame meanwhile.
class PipelineSimulator {
 public:
  PipelineSimulator(const std::vector<StageModel>& stages, std::size_t frames)
      : stages_(stages), frames_(frames), state_(stages.size()) {
    trace_.timing.assign(frames, std::vector<StageTiming>(stages.size()));
    trace_.max_occupancy.assign(stages.size(), 0);
  }

  PipelineTrace run() {
    for (std::size_t f = 0; f < frames_; ++f) state_[0].fifo.push_back(f);
    try_start(0);
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      Stage& s = state_[ev.stage];
      trace_.timing[*s.busy][ev.stage].finish = now_;
      s.holding = s.busy;
      s.busy.reset();
      try_release(ev.stage);
    }
    trace_.makespan = now_;
    trace_.avg_latency = static_cast<double>(now_) / static_cast<double>(frames_);
    return std::move(trace_);
  }

 private:
  struct Stage {
    std::deque<std::size_t> fifo;
    std::optional<std::size_t> busy;
    std::optional<std::size_t> holding;
  };
  struct Event {
    std::uint64_t time;
    std::uint64_t seq;
    std::size_t stage;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  bool has_room(std::size_t k) const {
    return !stages_[k].capacity || state_[k].fifo.size() < *stages_[k].capacity;
  }

  void try_start(std::size_t k) {
    Stage& s = state_[k];
    if (s.busy || s.holding || s.fifo.empty()) return;
    const std::size_t f = s.fifo.front();
    s.fifo.pop_front();
    s.busy = f;
    trace_.timing[f][k].start = now_;
    events_.push({now_ + stages_[k].service_cycles, seq_++, k});
    if (k > 0) try_release(k - 1);
  }

  void try_release(std::size_t k) {
    Stage& s = state_[k];
    if (!s.holding) return;
    const std::size_t f = *s.holding;
    if (k + 1 == stages_.size()) {
      trace_.completion_order.push_back(f);
    } else {
      if (!has_room(k + 1)) return;
      Stage& next = state_[k + 1];
      next.fifo.push_back(f);
      trace_.timing[f][k + 1].occupancy = next.fifo.size();
      trace_.max_occupancy[k + 1] = std::max(trace_.max_occupancy[k + 1], next.fifo.size());
    }
    trace_.timing[f][k].depart = now_;
    s.holding.reset();
    if (k + 1 < stages_.size()) try_start(k + 1);
    try_start(k);
  }

  const std::vector<StageModel>& stages_;
  std::size_t frames_;
  std::vector<Stage> state_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 0;
  PipelineTrace trace_;
};

}  // namespace detail

/// Simulates N frames through the stages with request-response handshakes:
/// producers stall on a full FIFO, consumers stall on an empty one.
inline PipelineTrace simulate(const std::vector<StageModel>& stages, std::size_t frames) {
  require(!stages.empty(), ErrorKind::InvariantViolation, "no pipeline stages");
  require(frames >= 1, ErrorKind::InvariantViolation, "frame count must be >= 1");
  for (const auto& s : stages) {
    require(s.service_cycles >= 1, ErrorKind::InvariantViolation,
            "stage " + s.label + ": service cycles must be >= 1");
    require(!s.capacity || *s.capacity >= 1, ErrorKind::InvariantViolation,
            "stage " + s.label + ": FIFO capacity must be >= 1");
  }
  return detail::PipelineSimulator(stages, frames).run();
}

struct ModelGap {
  std::uint64_t simulated_makespan = 0;
  std::uint64_t model_makespan = 0;
  std::int64_t absolute_gap = 0;  // simulated - model
  double relative_gap = 0.0;      // absolute_gap / model
  double simulated_avg = 0.0;
  double model_avg = 0.0;
  bool capacity_induced = false;  // blocking stretched the schedule
};

inline ModelGap compare_to_model(const PipelineTrace& trace, const PipelineLatency& model) {
  ModelGap gap;
  gap.simulated_makespan = trace.makespan;
  gap.model_makespan = model.makespan;
  gap.absolute_gap =
      static_cast<std::int64_t>(trace.makespan) - static_cast<std::int64_t>(model.makespan);
  gap.relative_gap = model.makespan == 0
                         ? 0.0
                         : static_cast<double>(gap.absolute_gap) / static_cast<double>(model.makespan);
  gap.simulated_avg = trace.avg_latency;
  gap.model_avg = model.average;
  gap.capacity_induced = gap.absolute_gap > 0;
  return gap;
}

inline std::vector<std::uint64_t> service_cycles(const std::vector<StageModel>& stages) {
  std::vector<std::uint64_t> cycles;
  for (const auto& s : stages) cycles.push_back(s.service_cycles);
  return cycles;
}

/// Smallest FIFO capacities keeping the makespan within `tolerance` of the
/// unbounded pipeline. Stages are sized downstream-first by binary search;
/// entry 0 (the source side) is always 1.
inline std::vector<std::size_t> size_fifos(std::vector<StageModel> stages, std::size_t frames = 100,
                                           double tolerance = 0.01) {
  require(!stages.empty(), ErrorKind::InvariantViolation, "no pipeline stages");
  for (auto& s : stages) s.capacity.reset();
  const double bound = static_cast<double>(simulate(stages, frames).makespan) * (1.0 + tolerance);
  auto within = [&](const std::vector<StageModel>& candidate) {
    return static_cast<double>(simulate(candidate, frames).makespan) <= bound;
  };
  std::vector<std::size_t> capacities(stages.size(), 1);
  for (std::size_t k = stages.size(); k-- > 1;) {
    std::size_t lo = 1, hi = std::max<std::size_t>(frames, 1);
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      stages[k].capacity = mid;
      if (within(stages)) hi = mid; else lo = mid + 1;
    }
    stages[k].capacity = lo;
    capacities[k] = lo;
  }
  return capacities;
}

/// One stage per accelerator conv layer; a frame costs T timesteps of the
/// layer's modeled latency.
inline std::vector<StageModel> stages_from_config(const NetworkConfig& config,
                                                  std::optional<std::size_t> capacity = {}) {
  std::vector<StageModel> stages;
  for (const auto& l : conv_layers(config)) {
    const std::uint64_t cycles =
        conv_latency(l.spec.mode, l.geometry, config.latency, l.spec.parallel_factor) *
        config.timesteps;
    stages.push_back({"layer" + std::to_string(l.index), std::max<std::uint64_t>(cycles, 1),
                      capacity});
  }
  return stages;
}

}  // namespace stisnn
