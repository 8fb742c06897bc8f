#include "dpsnn/connectome.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dpsnn/random.hpp"

namespace dpsnn {

namespace {

constexpr std::uint32_t kMaxRedraws = 1024;

std::int64_t wrap(std::int64_t value, std::int64_t extent) {
  const std::int64_t r = value % extent;
  return r < 0 ? r + extent : r;
}

}  // namespace

std::uint32_t GridSpec::excitatory_per_column() const noexcept {
  return static_cast<std::uint32_t>(std::llround(excitatory_fraction * neurons_per_column));
}

void GridSpec::validate() const {
  if (cfx < 1) throw ConfigError("cfx", "must be >= 1");
  if (cfy < 1) throw ConfigError("cfy", "must be >= 1");
  if (neurons_per_column < 1) throw ConfigError("neurons_per_column", "must be >= 1");
  if (!(excitatory_fraction >= 0.0 && excitatory_fraction <= 1.0))
    throw ConfigError("excitatory_fraction", "must lie in [0, 1]");
  const double exc = excitatory_fraction * neurons_per_column;
  if (std::abs(exc - std::round(exc)) > 1e-9)
    throw ConfigError("excitatory_fraction", "excitatory_fraction * neurons_per_column must be an integer");
  if (synapses_per_neuron < 1) throw ConfigError("synapses_per_neuron", "must be >= 1");
  if (delay_min < 1) throw ConfigError("delay_min", "must be >= 1");
  if (delay_max < delay_min) throw ConfigError("delay_max", "must be >= delay_min");
  if (delay_max > 255) throw ConfigError("delay_max", "must be <= 255");
  const std::uint64_t n = static_cast<std::uint64_t>(cfx) * cfy * neurons_per_column;
  if (n > std::numeric_limits<Gid>::max()) throw ConfigError("neurons_per_column", "network too large for 32-bit gids");
}

std::uint32_t ProjectionQuota::per_ring(int ring) const noexcept {
  switch (ring) {
    case 1: return per_first_neighbor;
    case 2: return per_second_neighbor;
    case 3: return per_third_neighbor;
    default: return 0;
  }
}

ProjectionQuota ProjectionQuota::for_synapses(std::uint32_t m) {
  if (m == 0 || m % 100 != 0)
    throw ConfigError("synapses_per_neuron",
                      "must be a positive multiple of 100 to split into integer ring quotas (got " +
                          std::to_string(m) + ")");
  const std::uint32_t unit = m / 100;
  return {76 * unit, 3 * unit, 2 * unit, 1 * unit};
}

std::array<ColumnCoord, 4> neighbor_columns(const GridSpec& grid, ColumnCoord col, int ring) {
  static constexpr std::int64_t kOffsets[3][4][2] = {
      {{1, 0}, {-1, 0}, {0, 1}, {0, -1}},
      {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}},
      {{2, 0}, {-2, 0}, {0, 2}, {0, -2}},
  };
  if (ring < 1 || ring > 3) throw std::invalid_argument("neighbor ring must be 1, 2 or 3");
  std::array<ColumnCoord, 4> out{};
  for (int k = 0; k < 4; ++k) {
    out[k] = {wrap(col.x + kOffsets[ring - 1][k][0], grid.cfx),
              wrap(col.y + kOffsets[ring - 1][k][1], grid.cfy)};
  }
  return out;
}

Connectome::Connectome(GridSpec grid, ProjectionQuota quota, InitialWeights weights,
                       ThalamicSpec thalamic)
    : grid_(grid), quota_(quota), weights_(weights), thalamic_(thalamic) {
  grid_.validate();
  if (quota_.total() != grid_.synapses_per_neuron)
    throw ConfigError("synapses_per_neuron", "projection quota sums to " +
                                                 std::to_string(quota_.total()) + ", expected " +
                                                 std::to_string(grid_.synapses_per_neuron));
  if (weights_.excitatory < 0) throw ConfigError("exc_weight", "must be >= 0");
  if (weights_.inhibitory > 0) throw ConfigError("inh_weight", "must be <= 0");
  if (!(thalamic_.amplitude == thalamic_.amplitude)) throw ConfigError("thalamic_amplitude", "must be a number");
  exc_per_column_ = grid_.excitatory_per_column();
  if (exc_per_column_ < 2)
    throw ConstructionError("excitatory pool of " + std::to_string(exc_per_column_) +
                            " neurons per column is too small to exclude self-synapses");
}

Gid Connectome::draw_target(Gid source, std::uint32_t j, std::uint32_t column,
                            std::uint32_t pool) const {
  const Gid base = grid_.first_gid(column);
  for (std::uint32_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
    const auto local = stateless::uniform_index(
        grid_.master_seed, {stateless::tag(stateless::Stream::kTarget), source, j, attempt}, pool);
    const Gid target = base + static_cast<Gid>(local);
    if (target != source) return target;
  }
  throw ConstructionError("could not draw a non-self target for neuron " + std::to_string(source));
}

std::vector<SynapseRecord> Connectome::project_forward_synapses(Gid source_gid) const {
  std::vector<SynapseRecord> out;
  out.reserve(grid_.synapses_per_neuron);
  project_forward_synapses(source_gid, out);
  return out;
}

void Connectome::project_forward_synapses(Gid source_gid, std::vector<SynapseRecord>& out) const {
  if (source_gid >= grid_.total_neurons())
    throw std::out_of_range("source gid " + std::to_string(source_gid) + " out of range");
  const std::uint32_t column = grid_.column_of(source_gid);
  const std::uint64_t seed = grid_.master_seed;

  if (!grid_.is_excitatory(source_gid)) {
    for (std::uint32_t j = 0; j < grid_.synapses_per_neuron; ++j) {
      SynapseRecord s;
      s.source_gid = source_gid;
      s.target_gid = draw_target(source_gid, j, column, exc_per_column_);
      s.projection_index = j;
      s.delay = static_cast<std::uint16_t>(grid_.delay_min);
      s.weight = weights_.inhibitory;
      out.push_back(s);
    }
    return;
  }

  const std::uint32_t delay_span = grid_.delay_max - grid_.delay_min + 1;
  std::uint32_t j = 0;
  auto emit = [&](std::uint32_t target_column, std::uint32_t count) {
    for (std::uint32_t k = 0; k < count; ++k, ++j) {
      SynapseRecord s;
      s.source_gid = source_gid;
      s.target_gid = draw_target(source_gid, j, target_column, grid_.neurons_per_column);
      s.projection_index = j;
      s.delay = static_cast<std::uint16_t>(
          grid_.delay_min +
          stateless::uniform_index(seed, {stateless::tag(stateless::Stream::kDelay), source_gid, j},
                                   delay_span));
      s.weight = weights_.excitatory;
      out.push_back(s);
    }
  };

  emit(column, quota_.own);
  const ColumnCoord here = grid_.coord_of(column);
  for (int ring = 1; ring <= 3; ++ring) {
    for (const ColumnCoord& c : neighbor_columns(grid_, here, ring))
      emit(grid_.column_id(c), quota_.per_ring(ring));
  }
}

std::vector<ThalamicEvent> Connectome::thalamic_events(TimeMs t, std::uint32_t column) const {
  std::vector<ThalamicEvent> out;
  out.reserve(thalamic_.events_per_ms_per_column);
  const Gid base = grid_.first_gid(column);
  for (std::uint32_t k = 0; k < thalamic_.events_per_ms_per_column; ++k) {
    const auto local = stateless::uniform_index(
        grid_.master_seed,
        {stateless::tag(stateless::Stream::kThalamic), static_cast<std::uint64_t>(t), column, k},
        grid_.neurons_per_column);
    out.push_back({base + static_cast<Gid>(local), thalamic_.amplitude});
  }
  return out;
}

}  // namespace dpsnn
