#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpsnn/connectome.hpp"
#include "dpsnn/engine.hpp"

namespace dpsnn {

struct ExperimentConfig {
  GridSpec grid;
  InitialWeights weights;
  ThalamicSpec thalamic;
  EngineOptions engine;

  std::uint32_t workers = 1;
  std::vector<std::uint32_t> workers_list = {1, 2, 4};
  std::vector<std::uint32_t> m_list = {100, 200, 1000};
  // msweep: rescale every weight-valued parameter by (synapses_per_neuron / M)
  // so the mean synaptic drive per neuron stays put.
  bool msweep_scale_weights = true;

  TimeMs warmup_ms = 1000;
  TimeMs measure_ms = 2000;
  std::string output_dir = "dpsnn_out";
  bool profiling = true;
  std::uint32_t weight_bins = 20;
  std::uint32_t fabric_timeout_ms = 120000;

  ProjectionQuota quota() const { return ProjectionQuota::for_synapses(grid.synapses_per_neuron); }

  /// Sets one key. Throws ConfigError naming the key on unknown keys or
  /// unparseable values.
  void set(const std::string& key, const std::string& value);

  /// Range and consistency checks; throws ConfigError.
  void validate() const;

  /// Resolved configuration in the same key = value format read by
  /// load_config(), one key per line, sorted by key.
  std::string to_text() const;

  static std::vector<std::string> keys();
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Splits "key=value".
std::pair<std::string, std::string> split_assignment(const std::string& assignment);

}  // namespace dpsnn
