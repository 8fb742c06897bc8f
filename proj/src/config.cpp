#include "dpsnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace dpsnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& text) {
  T value{};
  const std::string s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string s = trim(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw ConfigError(key, "expected a boolean, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_integer<T>(key, item));
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define DPSNN_FIELD(expr, parse, format)                                                          \
  Field {                                                                                         \
    [](ExperimentConfig& c, const std::string& k, const std::string& v) { (void)k; expr = parse; }, \
        [](const ExperimentConfig& c) { return format(expr); }                                    \
  }

std::string fmt_bool(bool b) { return b ? "true" : "false"; }
std::string fmt_str(const std::string& s) { return s; }
template <typename T>
std::string fmt_int(T v) { return std::to_string(v); }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"cfx", DPSNN_FIELD(c.grid.cfx, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"cfy", DPSNN_FIELD(c.grid.cfy, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"neurons_per_column", DPSNN_FIELD(c.grid.neurons_per_column, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"excitatory_fraction", DPSNN_FIELD(c.grid.excitatory_fraction, parse_double(k, v), fmt_double)},
      {"synapses_per_neuron", DPSNN_FIELD(c.grid.synapses_per_neuron, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"delay_min", DPSNN_FIELD(c.grid.delay_min, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"delay_max", DPSNN_FIELD(c.grid.delay_max, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"seed", DPSNN_FIELD(c.grid.master_seed, parse_integer<std::uint64_t>(k, v), fmt_int)},
      {"exc_weight", DPSNN_FIELD(c.weights.excitatory, parse_double(k, v), fmt_double)},
      {"inh_weight", DPSNN_FIELD(c.weights.inhibitory, parse_double(k, v), fmt_double)},
      {"thalamic_events_per_ms", DPSNN_FIELD(c.thalamic.events_per_ms_per_column, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"thalamic_amplitude", DPSNN_FIELD(c.thalamic.amplitude, parse_double(k, v), fmt_double)},
      {"exc.a", DPSNN_FIELD(c.engine.excitatory.a, parse_double(k, v), fmt_double)},
      {"exc.b", DPSNN_FIELD(c.engine.excitatory.b, parse_double(k, v), fmt_double)},
      {"exc.c", DPSNN_FIELD(c.engine.excitatory.c, parse_double(k, v), fmt_double)},
      {"exc.d", DPSNN_FIELD(c.engine.excitatory.d, parse_double(k, v), fmt_double)},
      {"exc.v_peak", DPSNN_FIELD(c.engine.excitatory.v_peak, parse_double(k, v), fmt_double)},
      {"inh.a", DPSNN_FIELD(c.engine.inhibitory.a, parse_double(k, v), fmt_double)},
      {"inh.b", DPSNN_FIELD(c.engine.inhibitory.b, parse_double(k, v), fmt_double)},
      {"inh.c", DPSNN_FIELD(c.engine.inhibitory.c, parse_double(k, v), fmt_double)},
      {"inh.d", DPSNN_FIELD(c.engine.inhibitory.d, parse_double(k, v), fmt_double)},
      {"inh.v_peak", DPSNN_FIELD(c.engine.inhibitory.v_peak, parse_double(k, v), fmt_double)},
      {"stdp.a_plus", DPSNN_FIELD(c.engine.stdp.a_plus, parse_double(k, v), fmt_double)},
      {"stdp.a_minus", DPSNN_FIELD(c.engine.stdp.a_minus, parse_double(k, v), fmt_double)},
      {"stdp.tau_plus", DPSNN_FIELD(c.engine.stdp.tau_plus, parse_double(k, v), fmt_double)},
      {"stdp.tau_minus", DPSNN_FIELD(c.engine.stdp.tau_minus, parse_double(k, v), fmt_double)},
      {"stdp.w_min", DPSNN_FIELD(c.engine.stdp.w_min, parse_double(k, v), fmt_double)},
      {"stdp.w_max", DPSNN_FIELD(c.engine.stdp.w_max, parse_double(k, v), fmt_double)},
      {"stdp.consolidation_period", DPSNN_FIELD(c.engine.stdp.consolidation_period, parse_integer<TimeMs>(k, v), fmt_int)},
      {"plasticity", DPSNN_FIELD(c.engine.plasticity, parse_bool(k, v), fmt_bool)},
      {"barrier", DPSNN_FIELD(c.engine.barrier, parse_bool(k, v), fmt_bool)},
      {"ltp_lookback_ms", DPSNN_FIELD(c.engine.ltp_lookback, parse_integer<TimeMs>(k, v), fmt_int)},
      {"rate_bin_ms", DPSNN_FIELD(c.engine.rate_bin, parse_integer<TimeMs>(k, v), fmt_int)},
      {"trace_gids", DPSNN_FIELD(c.engine.trace_gids, parse_list<Gid>(k, v), fmt_list)},
      {"workers", DPSNN_FIELD(c.workers, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"workers_list", DPSNN_FIELD(c.workers_list, parse_list<std::uint32_t>(k, v), fmt_list)},
      {"m_list", DPSNN_FIELD(c.m_list, parse_list<std::uint32_t>(k, v), fmt_list)},
      {"msweep_scale_weights", DPSNN_FIELD(c.msweep_scale_weights, parse_bool(k, v), fmt_bool)},
      {"warmup_ms", DPSNN_FIELD(c.warmup_ms, parse_integer<TimeMs>(k, v), fmt_int)},
      {"measure_ms", DPSNN_FIELD(c.measure_ms, parse_integer<TimeMs>(k, v), fmt_int)},
      {"output_dir", DPSNN_FIELD(c.output_dir, trim(v), fmt_str)},
      {"profiling", DPSNN_FIELD(c.profiling, parse_bool(k, v), fmt_bool)},
      {"weight_bins", DPSNN_FIELD(c.weight_bins, parse_integer<std::uint32_t>(k, v), fmt_int)},
      {"fabric_timeout_ms", DPSNN_FIELD(c.fabric_timeout_ms, parse_integer<std::uint32_t>(k, v), fmt_int)},
  };
  return table;
}

#undef DPSNN_FIELD

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& table = fields();
  const auto it = table.find(trim(key));
  if (it == table.end()) throw ConfigError(trim(key), "unknown configuration key");
  it->second.set(*this, it->first, value);
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

void ExperimentConfig::validate() const {
  grid.validate();
  (void)quota();
  engine.excitatory.validate();
  engine.inhibitory.validate();
  engine.stdp.validate();
  if (workers == 0) throw ConfigError("workers", "must be >= 1");
  if (warmup_ms < 0) throw ConfigError("warmup_ms", "must be >= 0");
  if (measure_ms <= 0) throw ConfigError("measure_ms", "must be > 0");
  if (engine.rate_bin <= 0) throw ConfigError("rate_bin_ms", "must be > 0");
  if (engine.ltp_lookback < 0) throw ConfigError("ltp_lookback_ms", "must be >= 0");
  if (weights.excitatory < 0) throw ConfigError("exc_weight", "must be >= 0");
  if (weights.inhibitory > 0) throw ConfigError("inh_weight", "must be <= 0");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  for (Gid g : engine.trace_gids) {
    if (g >= grid.total_neurons()) throw ConfigError("trace_gids", "gid " + std::to_string(g) + " out of range");
  }
  for (std::uint32_t h : workers_list) {
    if (h == 0) throw ConfigError("workers_list", "worker counts must be >= 1");
  }
}

std::pair<std::string, std::string> split_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(trim(assignment), "expected key=value");
  return {trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1))};
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto [k, v] = split_assignment(line);
    base.set(k, v);
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace dpsnn
