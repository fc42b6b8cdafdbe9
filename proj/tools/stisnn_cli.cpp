#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "report.hpp"
#include "stisnn/stisnn.hpp"

using namespace stisnn;
using report::Cell;
using report::Table;

namespace {

struct Common {
  std::string config_path;
  std::string arch;
  std::string format = "csv";
  std::string out;
  std::size_t timesteps = 0;  // 0 keeps the config's value
};

struct WeightSource {
  std::string path;
  std::uint64_t seed = 1;
  int range = 127;
};

void add_common(CLI::App* cmd, Common& c) {
  auto* cfg = cmd->add_option("--config", c.config_path, "JSON config or file holding a model string");
  auto* arch = cmd->add_option("--arch", c.arch, "compact model string, e.g. \"28x28 16c3-32c3-p2-fc\"");
  cfg->excludes(arch);
  cmd->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", c.out, "write the report here instead of stdout");
  cmd->add_option("--T", c.timesteps, "override the config's timesteps")->check(CLI::PositiveNumber);
}

void add_weights(CLI::App* cmd, WeightSource& w) {
  cmd->add_option("--weights", w.path, "STIW weight file");
  cmd->add_option("--seed", w.seed, "seed for random weights when --weights is absent");
  cmd->add_option("--weight-range", w.range, "random weights are drawn from [-range, range]")
      ->check(CLI::Range(1, 127));
}

NetworkConfig load_config(const Common& c) {
  NetworkConfig config;
  if (!c.config_path.empty()) {
    const auto bytes = read_file(c.config_path);
    config = parse_config(std::string(bytes.begin(), bytes.end()));
    if (config.name.empty()) config.name = std::filesystem::path(c.config_path).stem().string();
  } else {
    require(!c.arch.empty(), ErrorKind::Config, "need --config or --arch");
    config = parse_architecture(c.arch);
  }
  if (c.timesteps > 0) config.timesteps = c.timesteps;
  layer_shapes(config);
  return config;
}

BoundWeights load_weights(const NetworkConfig& config, const WeightSource& w) {
  if (!w.path.empty()) return bind_weights(config, parse_weight_file(read_file(w.path)));
  return bind_weights(config, save_weights(config, random_weights(config, w.seed, w.range)));
}

void emit(const Common& c, const std::vector<Table>& tables) {
  std::ostringstream os;
  if (c.format == "json") report::write_json(os, tables); else report::write_csv(os, tables);
  const std::string text = os.str();
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_file(c.out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
}

std::string mode_name(LayerMode m) { return std::string(to_string(m)); }

std::vector<std::uint64_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      require(used == item.size(), ErrorKind::Config, "");
      out.push_back(v);
    } catch (const std::exception&) {
      fail(ErrorKind::Config, std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  require(!out.empty(), ErrorKind::Config, std::string("empty ") + what + " list");
  return out;
}

// ---- infer ----------------------------------------------------------------

struct InferArgs {
  Common common;
  WeightSource weights;
  std::string images;
  std::string labels;
  std::vector<std::string> events;
  std::size_t limit = 0;
  bool predictions = false;
};

int run_infer(const InferArgs& a) {
  const NetworkConfig config0 = load_config(a.common);
  const BoundWeights bound = load_weights(config0, a.weights);
  const NetworkConfig& config = bound.config;
  const std::size_t T = config.timesteps;

  std::vector<SpikeTensor> inputs;
  std::vector<Rational> encoder_sfr;
  std::vector<std::uint8_t> labels;
  if (!a.events.empty()) {
    require(a.images.empty(), ErrorKind::Config, "give --images or --events, not both");
    require(a.events.size() == T, ErrorKind::Config,
            "need one event file per timestep (" + std::to_string(T) + "), got " +
                std::to_string(a.events.size()));
    std::vector<SpikeFrame> frames;
    for (const auto& path : a.events) frames.push_back(decode_events(parse_event_stream(read_file(path))));
    inputs.emplace_back(std::move(frames));
  } else {
    require(!a.images.empty(), ErrorKind::Config, "need --images or --events");
    require(config.encoder.has_value(), ErrorKind::Config,
            "raw images need an encoder layer (use an HxW input in the model string)");
    auto images = images_from_idx(load_idx(a.images));
    if (a.limit > 0 && images.size() > a.limit) images.resize(a.limit);
    for (const auto& img : images) {
      SpikeTensor t = encode_input(img, *config.encoder, *bound.encoder, T);
      encoder_sfr.push_back(sfr_of_frame(t));
      inputs.push_back(std::move(t));
    }
    if (!a.labels.empty()) {
      labels = labels_from_idx(load_idx(a.labels));
      require(labels.size() >= inputs.size(), ErrorKind::Format,
              "label file has fewer entries than images");
    }
  }

  Table preds{"predictions", {"image", "label", "predicted"}, {}};
  std::vector<double> sfr_sum(config.layers.size(), 0.0);
  std::vector<AccessTally> tally(config.layers.size());
  std::vector<std::uint64_t> vmem_bits(config.layers.size(), 0);
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const NetworkResult r = run_network(config, bound.layers, inputs[i]);
    const std::size_t predicted = r.predicted_class();
    const bool labeled = i < labels.size();
    if (labeled && labels[i] == predicted) ++correct;
    preds.add({std::uint64_t{i}, labeled ? Cell{std::int64_t{labels[i]}} : Cell{},
               std::uint64_t{predicted}});
    for (std::size_t l = 0; l < config.layers.size(); ++l) {
      sfr_sum[l] += r.layers[l].sfr.value();
      tally[l] += r.layers[l].tally;
      vmem_bits[l] = r.layers[l].vmem_bits;
    }
  }

  const double n = static_cast<double>(inputs.size());
  Table summary{"summary", {"images", "timesteps", "labeled", "correct", "accuracy"}, {}};
  summary.add({std::uint64_t{inputs.size()}, std::uint64_t{T}, std::uint64_t{labels.empty() ? 0 : inputs.size()},
               correct, labels.empty() ? Cell{} : Cell{static_cast<double>(correct) / n}});

  Table layers{"layers",
               {"layer", "mode", "sfr", "input_reads", "weight_broadcasts", "psum_accesses",
                "accumulates", "vmem_bits"},
               {}};
  if (!encoder_sfr.empty()) {
    double s = 0;
    for (const auto& r : encoder_sfr) s += r.value();
    layers.add({std::string("encoder"), mode_name(LayerMode::Standard), s / n, std::uint64_t{0},
                std::uint64_t{0}, std::uint64_t{0}, std::uint64_t{0}, std::uint64_t{0}});
  }
  for (std::size_t l = 0; l < config.layers.size(); ++l) {
    const bool fc = config.layers[l].mode == LayerMode::FullyConnected;
    layers.add({std::to_string(l), mode_name(config.layers[l].mode),
                fc ? Cell{} : Cell{sfr_sum[l] / n}, tally[l].input_reads,
                tally[l].weight_broadcasts, tally[l].psum_accesses, tally[l].accumulates,
                std::uint64_t{vmem_bits[l]}});
  }
  std::vector<Table> out{summary, layers};
  if (a.predictions) out.push_back(preds);
  emit(a.common, out);
  return 0;
}

// ---- cost -----------------------------------------------------------------

struct CostArgs {
  Common common;
  std::uint64_t frames = 1;
  double activity = 1.0;
};

int run_cost(const CostArgs& a) {
  const NetworkConfig config = load_config(a.common);
  const CostReport r = cost_report(config, config.timesteps, a.frames, a.activity);
  Table layers{"layers",
               {"layer", "mode", "c_i", "c_o", "k_h", "k_w", "h_o", "w_o", "parallel", "input_reads",
                "weight_reads", "psum_accesses", "accumulates", "latency_cycles", "vmem_bytes"},
               {}};
  std::uint64_t vmem_total = 0;
  for (const auto& l : r.layers) {
    const auto& g = l.geometry;
    layers.add({std::to_string(l.index), mode_name(l.mode), g.in_channels, g.out_channels, g.kernel_h,
                g.kernel_w, g.out_h, g.out_w, std::uint64_t{config.layers[l.index].parallel_factor},
                l.accesses.input_reads, l.accesses.weight_reads, l.accesses.psum_accesses,
                l.accumulates, l.latency_cycles, l.vmem_bytes});
    vmem_total += l.vmem_bytes;
  }
  Table summary{"summary",
                {"timesteps", "frames", "vmem_total_bytes", "vmem_total_kb", "makespan_cycles",
                 "avg_cycles_per_frame", "bottleneck_layer", "runtime_s", "energy_j"},
                {}};
  const std::string bottleneck =
      r.layers.empty() ? std::string() : std::to_string(r.layers[r.pipeline.bottleneck].index);
  summary.add({std::uint64_t{config.timesteps}, a.frames, vmem_total,
               static_cast<double>(vmem_total) / kBytesPerKB, r.pipeline.makespan, r.pipeline.average,
               bottleneck, r.runtime_seconds, r.energy_joules});
  emit(a.common, {summary, layers});
  return 0;
}

// ---- pipeline -------------------------------------------------------------

struct PipelineArgs {
  Common common;
  std::string stages;
  std::size_t frames = 100;
  std::size_t capacity = 0;
  bool size = false;
  bool trace = false;
};

int run_pipeline(const PipelineArgs& a) {
  const std::optional<std::size_t> cap =
      a.capacity > 0 ? std::optional<std::size_t>(a.capacity) : std::nullopt;
  std::vector<StageModel> stages;
  if (!a.stages.empty()) {
    const auto cycles = parse_list(a.stages, "stage");
    for (std::size_t i = 0; i < cycles.size(); ++i) stages.push_back({"s" + std::to_string(i), cycles[i], cap});
  } else {
    stages = stages_from_config(load_config(a.common), cap);
  }
  const PipelineTrace trace = simulate(stages, a.frames);
  const auto cycles = service_cycles(stages);
  const PipelineLatency model = pipeline_latency(cycles, a.frames);
  const ModelGap gap = compare_to_model(trace, model);
  std::vector<std::size_t> sized;
  if (a.size) sized = size_fifos(stages, a.frames);

  Table summary{"summary",
                {"frames", "simulated_makespan", "model_makespan", "absolute_gap", "relative_gap",
                 "simulated_avg", "model_avg", "capacity_induced"},
                {}};
  summary.add({std::uint64_t{a.frames}, gap.simulated_makespan, gap.model_makespan, gap.absolute_gap,
               gap.relative_gap, gap.simulated_avg, gap.model_avg,
               std::string(gap.capacity_induced ? "true" : "false")});

  std::vector<std::string> cols{"stage", "label", "service_cycles", "capacity", "max_occupancy"};
  if (a.size) cols.push_back("sized_capacity");
  Table st{"stages", cols, {}};
  for (std::size_t k = 0; k < stages.size(); ++k) {
    std::vector<Cell> row{std::uint64_t{k}, stages[k].label, stages[k].service_cycles,
                          stages[k].capacity ? Cell{std::uint64_t{*stages[k].capacity}} : Cell{std::string("inf")},
                          std::uint64_t{trace.max_occupancy[k]}};
    if (a.size) row.push_back(std::uint64_t{sized[k]});
    st.add(std::move(row));
  }
  std::vector<Table> out{summary, st};
  if (a.trace) {
    Table tr{"trace", {"frame", "stage", "start", "finish", "depart", "occupancy"}, {}};
    for (std::size_t f = 0; f < a.frames; ++f)
      for (std::size_t k = 0; k < stages.size(); ++k) {
        const auto& t = trace.timing[f][k];
        tr.add({std::uint64_t{f}, std::uint64_t{k}, t.start, t.finish, t.depart, std::uint64_t{t.occupancy}});
      }
    out.push_back(std::move(tr));
  }
  emit(a.common, out);
  return 0;
}

// ---- encode ---------------------------------------------------------------

struct EncodeArgs {
  Common common;
  WeightSource weights;
  std::string images;
  std::size_t index = 0;
  std::string out_dir;
  std::vector<std::string> decode;
};

void add_stream_row(Table& t, const std::string& name, const SpikeFrame& f, const EventStream& s) {
  const auto ratio = compression_ratio(f);
  t.add({name, std::uint64_t{f.height()}, std::uint64_t{f.width()}, std::uint64_t{f.channels()},
         std::uint64_t{s.count}, std::uint64_t{s.width_bits()}, std::uint64_t{s.payload_bits()},
         std::uint64_t{f.neurons()}, ratio ? Cell{ratio->value()} : Cell{std::string("inf")}});
}

int run_encode(const EncodeArgs& a) {
  Table t{"events",
          {"frame", "height", "width", "channels", "events", "event_bits", "payload_bits", "dense_bits",
           "compression"},
          {}};
  if (!a.decode.empty()) {
    for (const auto& path : a.decode) {
      const EventStream s = parse_event_stream(read_file(path));
      add_stream_row(t, std::filesystem::path(path).filename().string(), decode_events(s), s);
    }
    emit(a.common, {t});
    return 0;
  }
  const NetworkConfig config0 = load_config(a.common);
  const BoundWeights bound = load_weights(config0, a.weights);
  require(bound.config.encoder.has_value(), ErrorKind::Config, "config has no encoder layer");
  require(!a.images.empty(), ErrorKind::Config, "need --images");
  const auto images = images_from_idx(load_idx(a.images));
  require(a.index < images.size(), ErrorKind::Config,
          "image index " + std::to_string(a.index) + " out of range (" + std::to_string(images.size()) + ")");
  const SpikeTensor spikes =
      encode_input(images[a.index], *bound.config.encoder, *bound.encoder, bound.config.timesteps);
  if (!a.out_dir.empty()) std::filesystem::create_directories(a.out_dir);
  for (std::size_t step = 0; step < spikes.timesteps(); ++step) {
    const EventStream s = encode_events(spikes.frame(step));
    const std::string name = "t" + std::to_string(step) + ".stie";
    if (!a.out_dir.empty()) write_file(std::filesystem::path(a.out_dir) / name, serialize(s));
    add_stream_row(t, name, spikes.frame(step), s);
  }
  emit(a.common, {t});
  return 0;
}

// ---- compare-dataflow -----------------------------------------------------

struct CompareArgs {
  Common common;
  std::string geometry;
};

int run_compare(const CompareArgs& a) {
  const std::uint64_t T = a.common.timesteps > 0 ? a.common.timesteps : 1;
  std::vector<std::pair<std::string, std::pair<LayerMode, LayerGeometry>>> rows;
  if (!a.geometry.empty()) {
    const auto v = parse_list(a.geometry, "geometry");
    require(v.size() == 5, ErrorKind::Config, "--geometry takes c_i,c_o,k,h_o,w_o");
    rows.push_back({"geometry", {LayerMode::Standard, {v[0], v[1], v[2], v[2], v[3], v[4], v[3], v[4]}}});
  } else {
    NetworkConfig config = load_config(a.common);
    for (const auto& l : conv_layers(config)) rows.push_back({std::to_string(l.index), {l.spec.mode, l.geometry}});
  }
  Table t{"dataflow", {"layer", "mode", "dataflow", "input_reads", "weight_reads", "psum_accesses"}, {}};
  for (const auto& [name, mg] : rows) {
    const auto& [mode, g] = mg;
    LayerGeometry std_g = g;
    if (mode == LayerMode::Depthwise) std_g.in_channels = 1;  // one input channel per output
    const AccessCounts os = access_counts_os(std_g, T);
    const AccessCounts ws = access_counts_ws(std_g, T);
    const AccessCounts lb = access_counts_mode(mode, g, T);
    const std::string m = mode_name(mode);
    t.add({name, m, std::string("OS"), os.input_reads, os.weight_reads, os.psum_accesses});
    t.add({name, m, std::string("WS"), ws.input_reads, ws.weight_reads, ws.psum_accesses});
    t.add({name, m, std::string("OS+linebuffer"), lb.input_reads, lb.weight_reads, lb.psum_accesses});
  }
  emit(a.common, {t});
  return 0;
}

// ---- search-parallel ------------------------------------------------------

struct SearchArgs {
  Common common;
  std::uint64_t budget = 0;
  std::string factors;
};

int run_search(const SearchArgs& a) {
  const NetworkConfig config = load_config(a.common);
  const auto layers = conv_layers(config);
  std::vector<std::size_t> factors;
  if (!a.factors.empty()) {
    for (auto f : parse_list(a.factors, "factor")) factors.push_back(static_cast<std::size_t>(f));
  } else {
    require(a.budget > 0, ErrorKind::Config, "need --budget or --factors");
    factors = best_parallel_factors(config, a.budget);
  }
  const auto tuned = conv_latencies(config, factors);
  const std::vector<std::size_t> ones(factors.size(), 1);
  const auto base = conv_latencies(config, ones);

  Table t{"layers", {"layer", "mode", "factor", "pes", "latency_cycles", "baseline_cycles"}, {}};
  std::uint64_t pes = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::uint64_t p = factors[i] * layers[i].geometry.kernel_h * layers[i].geometry.kernel_w;
    pes += p;
    t.add({std::to_string(layers[i].index), mode_name(layers[i].spec.mode), std::uint64_t{factors[i]}, p,
           tuned[i], base[i]});
  }
  Table s{"summary", {"budget", "pes_used", "bottleneck_cycles", "baseline_bottleneck_cycles", "speedup"}, {}};
  s.add({a.budget > 0 ? Cell{a.budget} : Cell{}, pes,
         *std::max_element(tuned.begin(), tuned.end()), *std::max_element(base.begin(), base.end()),
         bottleneck_speedup(config, factors)});
  emit(a.common, {s, t});
  return 0;
}

// ---- random-weights -------------------------------------------------------

struct RandomArgs {
  Common common;
  WeightSource weights;
  std::string path;
};

int run_random(const RandomArgs& a) {
  const NetworkConfig config = load_config(a.common);
  const WeightFile file = save_weights(config, random_weights(config, a.weights.seed, a.weights.range));
  write_file(a.path, serialize(file));
  Table t{"records", {"record", "mode", "c_i", "c_o", "k_h", "k_w", "threshold", "leak", "weights"}, {}};
  for (std::size_t i = 0; i < file.layers.size(); ++i) {
    const auto& r = file.layers[i];
    t.add({std::uint64_t{i}, mode_name(r.mode), std::uint64_t{r.in_channels}, std::uint64_t{r.out_channels},
           std::uint64_t{r.kernel_h}, std::uint64_t{r.kernel_w}, std::int64_t{r.threshold},
           std::int64_t{r.leak}, std::uint64_t{r.weights.values.size()}});
  }
  emit(a.common, {t});
  return 0;
}

void print_error(std::string_view kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"]["kind"] = kind;
  j["error"]["message"] = message;
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking CNN accelerator model: inference, cost and pipeline reports"};
  app.require_subcommand(1);

  InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "run the network on IDX images or STIE event files");
  add_common(c_infer, infer.common);
  add_weights(c_infer, infer.weights);
  c_infer->add_option("--images", infer.images, "IDX image file (needs an encoder layer)");
  c_infer->add_option("--labels", infer.labels, "IDX label file");
  c_infer->add_option("--events", infer.events, "one STIE file per timestep");
  c_infer->add_option("--limit", infer.limit, "use at most this many images");
  c_infer->add_flag("--predictions", infer.predictions, "append per-image predictions");

  CostArgs cost;
  auto* c_cost = app.add_subcommand("cost", "access counts, latency, Vmem and energy per conv layer");
  add_common(c_cost, cost.common);
  c_cost->add_option("--frames", cost.frames, "frames streamed through the pipeline")->check(CLI::PositiveNumber);
  c_cost->add_option("--activity", cost.activity, "fraction of PE operand reads carrying a spike")
      ->check(CLI::Range(0.0, 1.0));

  PipelineArgs pipe;
  auto* c_pipe = app.add_subcommand("pipeline", "simulate the layer pipeline and compare with the closed form");
  add_common(c_pipe, pipe.common);
  c_pipe->add_option("--stages", pipe.stages, "comma-separated service cycles instead of a config");
  c_pipe->add_option("--frames", pipe.frames, "frames to stream")->check(CLI::PositiveNumber);
  c_pipe->add_option("--capacity", pipe.capacity, "FIFO depth in front of each stage (default unbounded)")
      ->check(CLI::PositiveNumber);
  c_pipe->add_flag("--size-fifos", pipe.size, "report the smallest FIFO depths within 1% of unbounded");
  c_pipe->add_flag("--trace", pipe.trace, "append the per-frame schedule");

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "encode one image into STIE event streams, or inspect streams");
  add_common(c_enc, enc.common);
  add_weights(c_enc, enc.weights);
  c_enc->add_option("--images", enc.images, "IDX image file");
  c_enc->add_option("--index", enc.index, "image to encode");
  c_enc->add_option("--out-dir", enc.out_dir, "write t<step>.stie files here");
  c_enc->add_option("--decode", enc.decode, "decode and summarize existing STIE files");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare-dataflow", "OS vs WS access counts per conv layer");
  add_common(c_cmp, cmp.common);
  c_cmp->add_option("--geometry", cmp.geometry, "single layer c_i,c_o,k,h_o,w_o instead of a config");

  SearchArgs search;
  auto* c_search = app.add_subcommand("search-parallel", "per-layer parallel factors under a PE budget");
  add_common(c_search, search.common);
  c_search->add_option("--budget", search.budget, "PE budget");
  c_search->add_option("--factors", search.factors, "evaluate these comma-separated factors instead");

  RandomArgs rnd;
  auto* c_rnd = app.add_subcommand("random-weights", "write a seeded random STIW file for a config");
  add_common(c_rnd, rnd.common);
  add_weights(c_rnd, rnd.weights);
  c_rnd->add_option("--write", rnd.path, "output STIW path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (c_infer->parsed()) return run_infer(infer);
    if (c_cost->parsed()) return run_cost(cost);
    if (c_pipe->parsed()) return run_pipeline(pipe);
    if (c_enc->parsed()) return run_encode(enc);
    if (c_cmp->parsed()) return run_compare(cmp);
    if (c_search->parsed()) return run_search(search);
    if (c_rnd->parsed()) return run_random(rnd);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 1;
}
