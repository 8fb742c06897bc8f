#include "dpsnn/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "dpsnn/fabric.hpp"
#include "dpsnn/partition.hpp"

namespace dpsnn {

namespace {

struct WorkerOutput {
  std::uint32_t first_column = 0;
  std::vector<SpikeEvent> raster;
  std::vector<TraceSample> traces;
  std::vector<std::vector<std::uint32_t>> column_bins;
  std::vector<std::uint64_t> weight_histogram;
  BlockTimerReport timers;
  ConnectivityMask mask;
  std::vector<std::uint64_t> construction_bytes;
  std::vector<std::uint64_t> total_bytes;
  std::vector<std::uint64_t> received_spikes;
  std::vector<std::uint64_t> delivered_by_emission;
  std::vector<std::uint64_t> delivered_by_step;
  std::uint64_t stored = 0;
};

void run_worker(const ExperimentConfig& cfg, const Connectome& connectome, const PartitionPlan& plan,
                Endpoint& endpoint, WorkerOutput& out) {
  Engine engine(connectome, plan, cfg.engine, endpoint);
  engine.construct_network();
  out.construction_bytes = endpoint.traffic().payload_bytes;
  engine.run(cfg.measure_ms, cfg.warmup_ms);

  out.first_column = engine.first_column();
  out.raster = engine.raster();
  out.traces = engine.traces();
  out.column_bins = engine.column_bins();
  out.weight_histogram = engine.weight_histogram(cfg.weight_bins);
  out.timers = engine.timers();
  out.mask = engine.mask();
  out.total_bytes = endpoint.traffic().payload_bytes;
  out.received_spikes = engine.received_spikes();
  out.delivered_by_emission = engine.delivered_by_emission();
  out.delivered_by_step = engine.delivered_by_step();
  out.stored = engine.store().size();
}

void add_into(std::vector<std::uint64_t>& acc, const std::vector<std::uint64_t>& v) {
  if (acc.size() < v.size()) acc.resize(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

std::string fmt(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string fmt_sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

}  // namespace

double SimulationResult::mean_rate_hz() const {
  const TimeMs lo = warmup_ms;
  const TimeMs hi = warmup_ms + measure_ms;
  const auto first = std::lower_bound(raster.begin(), raster.end(), SpikeEvent{lo, 0});
  const auto last = std::lower_bound(raster.begin(), raster.end(), SpikeEvent{hi, 0});
  const double spikes = static_cast<double>(last - first);
  return spikes / (static_cast<double>(grid.total_neurons()) * measure_ms / 1000.0);
}

SimulationResult simulate(const ExperimentConfig& cfg, std::uint32_t workers) {
  cfg.validate();
  const Connectome connectome(cfg.grid, cfg.quota(), cfg.weights, cfg.thalamic);
  const PartitionPlan plan(workers, cfg.grid);

  std::vector<WorkerOutput> outputs(workers);
  if (workers == 1) {
    LoopbackEndpoint endpoint;
    run_worker(cfg, connectome, plan, endpoint, outputs[0]);
  } else {
    ThreadFabric fabric(workers, std::chrono::milliseconds(cfg.fabric_timeout_ms));
    std::vector<std::unique_ptr<Endpoint>> endpoints;
    for (WorkerId r = 0; r < workers; ++r) endpoints.push_back(fabric.endpoint(r));
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (WorkerId r = 0; r < workers; ++r) {
      threads.emplace_back([&, r] {
        try {
          run_worker(cfg, connectome, plan, *endpoints[r], outputs[r]);
        } catch (...) {
          errors[r] = std::current_exception();
          fabric.abort();
        }
      });
    }
    for (auto& t : threads) t.join();
    // Report the root cause rather than a peer's "aborted" error.
    std::exception_ptr root;
    for (const auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const FabricError&) {
        if (!root) root = e;
      } catch (...) {
        root = e;
        break;
      }
    }
    if (root) std::rethrow_exception(root);
  }

  SimulationResult r;
  r.workers = workers;
  r.grid = cfg.grid;
  r.warmup_ms = cfg.warmup_ms;
  r.measure_ms = cfg.measure_ms;
  r.rate_bin_ms = cfg.engine.rate_bin;
  r.w_min = cfg.engine.stdp.w_min;
  r.w_max = cfg.engine.stdp.w_max;
  r.mask = ConnectivityMask(workers);
  r.construction_bytes.assign(static_cast<std::size_t>(workers) * workers, 0);
  r.simulation_bytes.assign(static_cast<std::size_t>(workers) * workers, 0);
  r.received_spikes.assign(static_cast<std::size_t>(workers) * workers, 0);
  r.column_bins.resize(cfg.grid.columns());

  for (WorkerId w = 0; w < workers; ++w) {
    WorkerOutput& o = outputs[w];
    r.raster.insert(r.raster.end(), o.raster.begin(), o.raster.end());
    r.traces.insert(r.traces.end(), o.traces.begin(), o.traces.end());
    for (std::size_t c = 0; c < o.column_bins.size(); ++c) {
      auto& dst = r.column_bins[o.first_column + c];
      const auto& src = o.column_bins[c];
      if (dst.size() < src.size()) dst.resize(src.size(), 0);
      for (std::size_t b = 0; b < src.size(); ++b) dst[b] += src[b];
    }
    add_into(r.weight_histogram, o.weight_histogram);
    r.worker_timers.push_back(o.timers);
    for (WorkerId t = 0; t < workers; ++t) {
      const std::size_t idx = static_cast<std::size_t>(w) * workers + t;
      r.mask.set(w, t, o.mask.synapses(w, t));
      r.construction_bytes[idx] = o.construction_bytes[t];
      r.simulation_bytes[idx] = o.total_bytes[t] - o.construction_bytes[t];
      // o.received_spikes is indexed by source; this worker is the receiver.
      r.received_spikes[static_cast<std::size_t>(t) * workers + w] = o.received_spikes[t];
    }
    add_into(r.delivered_by_emission, o.delivered_by_emission);
    add_into(r.delivered_by_step, o.delivered_by_step);
    r.stored_synapses += o.stored;
  }
  std::sort(r.raster.begin(), r.raster.end());
  std::sort(r.traces.begin(), r.traces.end(), [](const TraceSample& a, const TraceSample& b) {
    return a.time != b.time ? a.time < b.time : a.gid < b.gid;
  });

  r.profile.barrier_enabled = cfg.engine.barrier;
  for (const BlockTimerReport& t : r.worker_timers) {
    for (std::size_t b = 0; b < kBlockCount; ++b) r.profile.seconds[b] = std::max(r.profile.seconds[b], t.seconds[b]);
    r.profile.total_seconds = std::max(r.profile.total_seconds, t.total_seconds);
  }
  r.wall_seconds = r.profile.total_seconds;
  return r;
}

std::vector<ProfileRow> profile_rows(const BlockTimerReport& report) {
  std::vector<ProfileRow> rows;
  double sum = 0.0;
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    if (static_cast<Block>(b) == Block::kBarrier && !report.barrier_enabled) continue;
    sum += report.seconds[b];
  }
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    if (static_cast<Block>(b) == Block::kBarrier && !report.barrier_enabled) continue;
    rows.push_back({std::string(kBlockNames[b]), report.seconds[b],
                    sum > 0 ? 100.0 * report.seconds[b] / sum : 0.0});
  }
  return rows;
}

ScalingRecord scaling_record(const SimulationResult& r, std::string label) {
  ScalingRecord rec;
  rec.label = std::move(label);
  rec.cfx = r.grid.cfx;
  rec.cfy = r.grid.cfy;
  rec.synapses_per_neuron = r.grid.synapses_per_neuron;
  rec.total_synapses = r.grid.total_synapses();
  rec.total_neurons = r.grid.total_neurons();
  rec.workers = r.workers;
  rec.rate_hz = r.mean_rate_hz();
  rec.wall_seconds = r.wall_seconds;
  rec.simulated_seconds = r.measure_ms / 1000.0;
  return rec;
}

std::string format_raster(const std::vector<SpikeEvent>& raster) {
  std::string out;
  out.reserve(raster.size() * 12);
  char buf[32];
  for (const SpikeEvent& e : raster) {
    const int n = std::snprintf(buf, sizeof buf, "%d\t%u\n", e.time, e.gid);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

std::string format_profile(const BlockTimerReport& report) {
  std::string out = "block\tseconds\tpercent\n";
  for (const ProfileRow& row : profile_rows(report))
    out += row.block + "\t" + fmt(row.seconds, 6) + "\t" + fmt(row.percent, 3) + "\n";
  return out;
}

std::string format_scaling_header() {
  return "label\tcfx\tcfy\tM\ttotal_synapses\ttotal_neurons\tworkers\trate_hz\twall_s\tsimulated_s\t"
         "wall_per_sim_s\tnormalized_s\tnormalized_per_worker_s\n";
}

std::string format_scaling_row(const ScalingRecord& rec) {
  std::ostringstream os;
  os << (rec.label.empty() ? "-" : rec.label) << '\t' << rec.cfx << '\t' << rec.cfy << '\t'
     << rec.synapses_per_neuron << '\t' << rec.total_synapses << '\t' << rec.total_neurons << '\t'
     << rec.workers << '\t' << fmt(rec.rate_hz, 4) << '\t' << fmt(rec.wall_seconds, 6) << '\t'
     << fmt(rec.simulated_seconds, 3) << '\t' << fmt(rec.wall_per_simulated_second(), 6) << '\t'
     << fmt_sci(rec.normalized_time()) << '\t' << fmt_sci(rec.normalized_per_worker()) << '\n';
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_outputs(const std::filesystem::path& dir, const SimulationResult& r,
                   const ExperimentConfig& config) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", config.to_text());
  write_text(dir / "raster.tsv", format_raster(r.raster));

  {
    std::ostringstream os;
    os << "bin_start_ms\tcolumn\trate_hz\n";
    const TimeMs steps = r.warmup_ms + r.measure_ms;
    const std::size_t bins = static_cast<std::size_t>((steps + r.rate_bin_ms - 1) / r.rate_bin_ms);
    const double scale = 1000.0 / (static_cast<double>(r.grid.neurons_per_column) * r.rate_bin_ms);
    for (std::size_t b = 0; b < bins; ++b) {
      for (std::size_t c = 0; c < r.column_bins.size(); ++c) {
        const auto& col = r.column_bins[c];
        const double count = b < col.size() ? col[b] : 0;
        os << b * r.rate_bin_ms << '\t' << c << '\t' << fmt(count * scale, 4) << '\n';
      }
    }
    write_text(dir / "rates.tsv", os.str());
  }

  if (config.profiling) write_text(dir / "profile.tsv", format_profile(r.profile));

  if (!r.traces.empty()) {
    std::ostringstream os;
    os << "time_ms\tgid\tv\tu\n";
    for (const TraceSample& s : r.traces) os << s.time << '\t' << s.gid << '\t' << fmt(s.v, 6) << '\t' << fmt(s.u, 6) << '\n';
    write_text(dir / "traces.tsv", os.str());
  }

  {
    std::ostringstream os;
    os << "weight_lo\tweight_hi\tcount\n";
    const std::size_t n = r.weight_histogram.size();
    const double width = n ? (r.w_max - r.w_min) / n : 0.0;
    for (std::size_t b = 0; b < n; ++b)
      os << fmt(r.w_min + b * width, 4) << '\t' << fmt(r.w_min + (b + 1) * width, 4) << '\t'
         << r.weight_histogram[b] << '\n';
    write_text(dir / "weights.tsv", os.str());
  }

  {
    std::ostringstream os;
    os << "source_worker\ttarget_worker\tsynapses\tconstruction_bytes\tsimulation_bytes\tspikes\n";
    const std::uint32_t h = r.workers;
    for (WorkerId s = 0; s < h; ++s) {
      for (WorkerId t = 0; t < h; ++t) {
        const std::size_t i = static_cast<std::size_t>(s) * h + t;
        os << s << '\t' << t << '\t' << r.mask.synapses(s, t) << '\t' << r.construction_bytes[i] << '\t'
           << r.simulation_bytes[i] << '\t' << r.received_spikes[i] << '\n';
      }
    }
    write_text(dir / "traffic.tsv", os.str());
  }

  write_text(dir / "scaling.tsv", format_scaling_header() + format_scaling_row(scaling_record(r, "run")));
}

SingleRunReport run_single(const ExperimentConfig& config) {
  SingleRunReport rep;
  rep.result = simulate(config, config.workers);
  rep.record = scaling_record(rep.result, "run");
  write_outputs(config.output_dir, rep.result, config);
  return rep;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> weak_grid(std::uint32_t cfx, std::uint32_t cfy,
                                                                 std::uint32_t base_workers,
                                                                 std::uint32_t workers) {
  if (base_workers == 0 || workers % base_workers != 0) return std::nullopt;
  const std::uint32_t ratio = workers / base_workers;
  if (!std::has_single_bit(ratio)) return std::nullopt;
  const int doublings = std::countr_zero(ratio);
  for (int i = 0; i < doublings; ++i) {
    if (i % 2 == 0) cfy *= 2;
    else cfx *= 2;
  }
  return std::make_pair(cfx, cfy);
}

SweepReport run_scaling_sweep(const ExperimentConfig& config, ScalingMode mode) {
  if (config.workers_list.empty()) throw ConfigError("workers_list", "must not be empty");
  SweepReport rep;
  std::optional<std::vector<SpikeEvent>> reference;
  const std::string tag = mode == ScalingMode::kStrong ? "strong" : "weak";
  for (std::uint32_t h : config.workers_list) {
    ExperimentConfig cfg = config;
    if (mode == ScalingMode::kWeak) {
      const auto grid = weak_grid(config.grid.cfx, config.grid.cfy, config.workers_list.front(), h);
      if (!grid) {
        rep.warnings.push_back("skipping H=" + std::to_string(h) +
                               ": not a power-of-two multiple of the first worker count");
        continue;
      }
      cfg.grid.cfx = grid->first;
      cfg.grid.cfy = grid->second;
    }
    try {
      (void)PartitionPlan(h, cfg.grid);
    } catch (const ConfigError& e) {
      rep.warnings.push_back("skipping H=" + std::to_string(h) + ": " + e.what());
      continue;
    }
    cfg.workers = h;
    SimulationResult r = simulate(cfg, h);
    rep.records.push_back(scaling_record(r, tag));
    if (mode == ScalingMode::kStrong) {
      if (!reference) reference = std::move(r.raster);
      else if (*reference != r.raster) rep.rasters_identical = false;
    }
  }
  return rep;
}

ExperimentConfig msweep_point(const ExperimentConfig& base, std::uint32_t m) {
  (void)ProjectionQuota::for_synapses(m);
  ExperimentConfig cfg = base;
  const std::uint64_t per_column = static_cast<std::uint64_t>(base.grid.neurons_per_column) *
                                   base.grid.synapses_per_neuron;
  if (per_column % m != 0)
    throw ConfigError("m_list", "M=" + std::to_string(m) + " does not divide the " +
                                    std::to_string(per_column) + " synapses per column");
  cfg.grid.neurons_per_column = static_cast<std::uint32_t>(per_column / m);
  cfg.grid.synapses_per_neuron = m;
  if (cfg.msweep_scale_weights) {
    const double f = static_cast<double>(base.grid.synapses_per_neuron) / m;
    cfg.weights.excitatory *= f;
    cfg.weights.inhibitory *= f;
    cfg.engine.stdp.a_plus *= f;
    cfg.engine.stdp.a_minus *= f;
    cfg.engine.stdp.w_min *= f;
    cfg.engine.stdp.w_max *= f;
  }
  cfg.engine.trace_gids.clear();
  cfg.validate();
  return cfg;
}

std::vector<MSweepRow> run_msweep(const ExperimentConfig& config) {
  if (config.m_list.empty()) throw ConfigError("m_list", "must not be empty");
  std::vector<MSweepRow> rows;
  for (std::uint32_t m : config.m_list) {
    const ExperimentConfig cfg = msweep_point(config, m);
    const SimulationResult r = simulate(cfg, cfg.workers);
    MSweepRow row;
    row.record = scaling_record(r, "M=" + std::to_string(m));
    row.neurons_per_column = cfg.grid.neurons_per_column;
    rows.push_back(row);
  }
  std::size_t baseline = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].record.synapses_per_neuron == 200) baseline = i;
  }
  const double ref = rows[baseline].record.normalized_time();
  for (MSweepRow& row : rows) row.relative_time = row.record.normalized_time() / ref;
  return rows;
}

std::optional<Divergence> first_divergence(const std::vector<SpikeEvent>& a,
                                           const std::vector<SpikeEvent>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return Divergence{i, a[i], b[i]};
  }
  if (a.size() == b.size()) return std::nullopt;
  Divergence d{n, std::nullopt, std::nullopt};
  if (n < a.size()) d.expected = a[n];
  if (n < b.size()) d.actual = b[n];
  return d;
}

VerifyReport verify_determinism(const ExperimentConfig& config,
                                const std::function<void(std::size_t, ExperimentConfig&)>& tweak) {
  if (config.workers_list.size() < 2)
    throw ConfigError("workers_list", "verification needs at least two worker counts");
  VerifyReport rep;
  std::string reference_bytes;
  std::vector<SpikeEvent> reference;
  const std::filesystem::path root = std::filesystem::path(config.output_dir) / "verify";
  for (std::size_t i = 0; i < config.workers_list.size(); ++i) {
    ExperimentConfig cfg = config;
    cfg.workers = config.workers_list[i];
    if (tweak) tweak(i, cfg);
    SimulationResult r = simulate(cfg, cfg.workers);
    const std::string bytes = format_raster(r.raster);
    write_text(root / ("H" + std::to_string(cfg.workers) + "_raster.tsv"), bytes);
    rep.workers.push_back(cfg.workers);
    rep.spike_counts.push_back(r.raster.size());
    if (i == 0) {
      reference_bytes = bytes;
      reference = std::move(r.raster);
      continue;
    }
    if (bytes == reference_bytes) continue;
    rep.passed = false;
    std::ostringstream os;
    os << "H=" << cfg.workers << " differs from H=" << rep.workers.front();
    if (const auto d = first_divergence(reference, r.raster)) {
      os << " at spike #" << d->index;
      if (d->expected) os << " (expected t=" << d->expected->time << " gid=" << d->expected->gid << ")";
      else os << " (expected end of raster)";
      if (d->actual) os << " (got t=" << d->actual->time << " gid=" << d->actual->gid << ")";
      else os << " (got end of raster)";
    }
    if (!rep.message.empty()) rep.message += "; ";
    rep.message += os.str();
  }
  if (rep.passed) rep.message = "rasters identical for all worker counts";
  return rep;
}

}  // namespace dpsnn
