#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpsnn/block_timer.hpp"
#include "dpsnn/config.hpp"
#include "dpsnn/engine.hpp"

namespace dpsnn {

/// Everything one run produced, merged across workers in canonical order.
struct SimulationResult {
  std::uint32_t workers = 1;
  GridSpec grid;
  TimeMs warmup_ms = 0;
  TimeMs measure_ms = 0;

  std::vector<SpikeEvent> raster;   // sorted by (time, gid)
  std::vector<TraceSample> traces;  // sorted by (time, gid)
  // [column][bin] spike counts
  std::vector<std::vector<std::uint32_t>> column_bins;
  TimeMs rate_bin_ms = 100;
  std::vector<std::uint64_t> weight_histogram;
  double w_min = 0.0;
  double w_max = 0.0;

  std::vector<BlockTimerReport> worker_timers;
  BlockTimerReport profile;  // per-block max across workers

  ConnectivityMask mask;
  // H x H, row = source worker.
  std::vector<std::uint64_t> construction_bytes;
  std::vector<std::uint64_t> simulation_bytes;
  std::vector<std::uint64_t> received_spikes;  // row = source, column = receiver

  std::vector<std::uint64_t> delivered_by_emission;
  std::vector<std::uint64_t> delivered_by_step;
  std::uint64_t stored_synapses = 0;

  double wall_seconds = 0.0;  // timed window, max across workers

  double mean_rate_hz() const;  // over the timed window only
  std::uint64_t total_synapses() const { return grid.total_synapses(); }
};

/// Launches H workers (threads sharing an in-process fabric; H = 1 uses the
/// loopback endpoint), constructs the network and runs warmup + measure.
SimulationResult simulate(const ExperimentConfig& config, std::uint32_t workers);

struct ProfileRow {
  std::string block;
  double seconds = 0.0;
  double percent = 0.0;
};

/// Table rows for the profile report; the barrier row appears only when the
/// barrier was enabled. Percentages are of the summed block times.
std::vector<ProfileRow> profile_rows(const BlockTimerReport& report);

struct ScalingRecord {
  std::string label;
  std::uint32_t cfx = 1;
  std::uint32_t cfy = 1;
  std::uint32_t synapses_per_neuron = 0;
  std::uint64_t total_synapses = 0;
  std::uint64_t total_neurons = 0;
  std::uint32_t workers = 1;
  double rate_hz = 0.0;
  double wall_seconds = 0.0;
  double simulated_seconds = 0.0;

  double wall_per_simulated_second() const { return wall_seconds / simulated_seconds; }
  /// wall / (rate * synapses * simulated seconds)
  double normalized_time() const { return wall_seconds / (rate_hz * total_synapses * simulated_seconds); }
  /// Same, per synapse assigned to one worker.
  double normalized_per_worker() const { return normalized_time() * workers; }
};

ScalingRecord scaling_record(const SimulationResult& r, std::string label = {});

// Output writers. Formats are tab-separated plain text.
std::string format_raster(const std::vector<SpikeEvent>& raster);
std::string format_profile(const BlockTimerReport& report);
std::string format_scaling_header();
std::string format_scaling_row(const ScalingRecord& rec);
/// Writes raster, rates, profile, traces, weights, traffic and scaling files
/// into `dir` (created if needed).
void write_outputs(const std::filesystem::path& dir, const SimulationResult& r,
                   const ExperimentConfig& config);
void write_text(const std::filesystem::path& path, const std::string& text);

/// One full run with outputs written to config.output_dir.
struct SingleRunReport {
  SimulationResult result;
  ScalingRecord record;
};
SingleRunReport run_single(const ExperimentConfig& config);

enum class ScalingMode { kStrong, kWeak };

struct SweepReport {
  std::vector<ScalingRecord> records;
  std::vector<std::string> warnings;
  // Strong mode only: rasters of every point matched the first.
  bool rasters_identical = true;
};

/// Strong: fixed grid, each H in workers_list. Weak: the grid is doubled
/// (alternately along y and x) with every doubling of H relative to the
/// first entry, holding synapses per worker constant.
SweepReport run_scaling_sweep(const ExperimentConfig& config, ScalingMode mode);

/// Grid used for a weak-scaling point, or nullopt if `workers` is not a
/// power-of-two multiple of `base_workers`.
std::optional<std::pair<std::uint32_t, std::uint32_t>> weak_grid(std::uint32_t cfx, std::uint32_t cfy,
                                                                 std::uint32_t base_workers,
                                                                 std::uint32_t workers);

struct MSweepRow {
  ScalingRecord record;
  std::uint32_t neurons_per_column = 0;
  double relative_time = 1.0;  // per-synapse time relative to the baseline M
};

/// Config for one M: total synapses are held at the base configuration's
/// value by rescaling neurons per column. Throws ConfigError if M does not
/// split into integer quotas or the column size would not be integral.
ExperimentConfig msweep_point(const ExperimentConfig& base, std::uint32_t m);
std::vector<MSweepRow> run_msweep(const ExperimentConfig& config);

struct Divergence {
  std::size_t index = 0;
  std::optional<SpikeEvent> expected;
  std::optional<SpikeEvent> actual;
};

/// First position where two canonical rasters differ, or nullopt.
std::optional<Divergence> first_divergence(const std::vector<SpikeEvent>& a,
                                           const std::vector<SpikeEvent>& b);

struct VerifyReport {
  bool passed = true;
  std::vector<std::uint32_t> workers;
  std::vector<std::size_t> spike_counts;
  std::string message;
};

/// Runs every H in config.workers_list and byte-compares canonical raster
/// files against the first. `tweak`, if set, may alter the config of run i
/// (used for negative controls).
VerifyReport verify_determinism(
    const ExperimentConfig& config,
    const std::function<void(std::size_t, ExperimentConfig&)>& tweak = {});

}  // namespace dpsnn
