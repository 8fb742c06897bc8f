// Command-line front end: run | scale | msweep | verify.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error,
// 3 determinism failure.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "dpsnn/config.hpp"
#include "dpsnn/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitDeterminism = 3;

// Flags shared by every subcommand. Each maps onto a config key and is applied
// after the --config file, in the order below, followed by --set overrides.
struct CommonFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string*>> values;
  std::vector<std::string> sets;
  std::string storage[16];

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    const std::pair<const char*, const char*> flags[] = {
        {"--seed", "seed"},
        {"--cfx", "cfx"},
        {"--cfy", "cfy"},
        {"--neurons-per-column", "neurons_per_column"},
        {"--synapses", "synapses_per_neuron"},
        {"--workers", "workers"},
        {"--workers-list", "workers_list"},
        {"--warmup", "warmup_ms"},
        {"--measure", "measure_ms"},
        {"--out", "output_dir"},
        {"--barrier", "barrier"},
        {"--plasticity", "plasticity"},
        {"--trace-gids", "trace_gids"},
        {"--profiling", "profiling"},
        {"--m-list", "m_list"},
    };
    std::size_t i = 0;
    for (const auto& [flag, key] : flags) {
      app->add_option(flag, storage[i], std::string("config key ") + key);
      values.emplace_back(key, &storage[i]);
      ++i;
    }
    app->add_option("--set", sets, "override any config key (key=value), repeatable");
  }

  dpsnn::ExperimentConfig resolve() const {
    dpsnn::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = dpsnn::load_config(config_path);
    for (const auto& [key, value] : values) {
      if (!value->empty()) cfg.set(key, *value);
    }
    for (const std::string& s : sets) {
      const auto [k, v] = dpsnn::split_assignment(s);
      cfg.set(k, v);
    }
    cfg.validate();
    return cfg;
  }
};

void print_record_table(const std::vector<dpsnn::ScalingRecord>& records) {
  std::cout << dpsnn::format_scaling_header();
  for (const auto& r : records) std::cout << dpsnn::format_scaling_row(r);
}

int cmd_run(const CommonFlags& flags) {
  const dpsnn::ExperimentConfig cfg = flags.resolve();
  const auto rep = dpsnn::run_single(cfg);
  std::cerr << "wrote outputs to " << cfg.output_dir << "\n";
  print_record_table({rep.record});
  if (cfg.profiling) std::cout << dpsnn::format_profile(rep.result.profile);
  return 0;
}

int cmd_scale(const CommonFlags& flags, const std::string& mode_name) {
  const dpsnn::ExperimentConfig cfg = flags.resolve();
  const auto mode = mode_name == "weak" ? dpsnn::ScalingMode::kWeak : dpsnn::ScalingMode::kStrong;
  const auto rep = dpsnn::run_scaling_sweep(cfg, mode);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  std::string table = dpsnn::format_scaling_header();
  for (const auto& r : rep.records) table += dpsnn::format_scaling_row(r);
  dpsnn::write_text(std::filesystem::path(cfg.output_dir) / ("scaling_" + mode_name + ".tsv"), table);
  dpsnn::write_text(std::filesystem::path(cfg.output_dir) / "config.txt", cfg.to_text());
  std::cout << table;
  if (!rep.rasters_identical) {
    std::cerr << "determinism failure: rasters differ across worker counts\n";
    return kExitDeterminism;
  }
  return 0;
}

int cmd_msweep(const CommonFlags& flags) {
  const dpsnn::ExperimentConfig cfg = flags.resolve();
  const auto rows = dpsnn::run_msweep(cfg);
  std::string table = "M\tneurons_per_column\tcfx\tcfy\ttotal_synapses\ttotal_neurons\trate_hz\twall_s\tnormalized_s\trelative_time\n";
  for (const auto& row : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%u\t%u\t%u\t%u\t%llu\t%llu\t%.4f\t%.6f\t%.6e\t%.4f\n",
                  row.record.synapses_per_neuron, row.neurons_per_column, row.record.cfx, row.record.cfy,
                  static_cast<unsigned long long>(row.record.total_synapses),
                  static_cast<unsigned long long>(row.record.total_neurons), row.record.rate_hz,
                  row.record.wall_seconds, row.record.normalized_time(), row.relative_time);
    table += buf;
  }
  dpsnn::write_text(std::filesystem::path(cfg.output_dir) / "msweep.tsv", table);
  dpsnn::write_text(std::filesystem::path(cfg.output_dir) / "config.txt", cfg.to_text());
  std::cout << table;
  return 0;
}

int cmd_verify(const CommonFlags& flags, bool perturb_last) {
  const dpsnn::ExperimentConfig cfg = flags.resolve();
  const std::size_t last = cfg.workers_list.empty() ? 0 : cfg.workers_list.size() - 1;
  const auto rep = dpsnn::verify_determinism(cfg, [&](std::size_t i, dpsnn::ExperimentConfig& c) {
    if (perturb_last && i == last) c.grid.master_seed += 1;
  });
  for (std::size_t i = 0; i < rep.workers.size(); ++i)
    std::cout << "H=" << rep.workers[i] << "\tspikes=" << rep.spike_counts[i] << "\n";
  std::cout << (rep.passed ? "PASS: " : "FAIL: ") << rep.message << "\n";
  return rep.passed ? 0 : kExitDeterminism;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed plastic spiking network simulator and benchmark harness"};
  app.require_subcommand(1);

  CommonFlags run_flags, scale_flags, msweep_flags, verify_flags;
  auto* run = app.add_subcommand("run", "single simulation with observables and profile");
  run_flags.attach(run);
  auto* scale = app.add_subcommand("scale", "strong or weak scaling sweep over workers_list");
  scale_flags.attach(scale);
  std::string mode = "strong";
  scale->add_option("--mode", mode, "strong|weak")->check(CLI::IsMember({"strong", "weak"}));
  auto* msweep = app.add_subcommand("msweep", "synapses-per-neuron sweep over m_list");
  msweep_flags.attach(msweep);
  auto* verify = app.add_subcommand("verify", "byte-compare rasters across workers_list");
  verify_flags.attach(verify);
  bool perturb_last = false;
  verify->add_flag("--perturb-last", perturb_last, "negative control: change the seed of the last run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_flags);
    if (*scale) return cmd_scale(scale_flags, mode);
    if (*msweep) return cmd_msweep(msweep_flags);
    if (*verify) return cmd_verify(verify_flags, perturb_last);
  } catch (const dpsnn::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
