#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <vector>

#include "dpsnn/types.hpp"

namespace dpsnn {

struct ColumnCoord {
  std::int64_t x = 0;
  std::int64_t y = 0;

  auto operator<=>(const ColumnCoord&) const = default;
};

/// Column grid on a torus. Neurons are numbered column by column (column id
/// = y * cfx + x); within a column the excitatory block comes first.
struct GridSpec {
  std::uint32_t cfx = 1;
  std::uint32_t cfy = 1;
  std::uint32_t neurons_per_column = 1000;
  double excitatory_fraction = 0.8;
  std::uint32_t synapses_per_neuron = 200;
  std::uint32_t delay_min = 1;
  std::uint32_t delay_max = 20;
  std::uint64_t master_seed = 20140101;

  void validate() const;

  std::uint32_t columns() const noexcept { return cfx * cfy; }
  std::uint32_t total_neurons() const noexcept { return columns() * neurons_per_column; }
  std::uint64_t total_synapses() const noexcept {
    return static_cast<std::uint64_t>(total_neurons()) * synapses_per_neuron;
  }
  std::uint32_t excitatory_per_column() const noexcept;

  std::uint32_t column_of(Gid gid) const noexcept { return gid / neurons_per_column; }
  bool is_excitatory(Gid gid) const noexcept {
    return gid % neurons_per_column < excitatory_per_column();
  }
  ColumnCoord coord_of(std::uint32_t column) const noexcept {
    return {static_cast<std::int64_t>(column % cfx), static_cast<std::int64_t>(column / cfx)};
  }
  std::uint32_t column_id(ColumnCoord c) const noexcept {
    return static_cast<std::uint32_t>(c.y) * cfx + static_cast<std::uint32_t>(c.x);
  }
  Gid first_gid(std::uint32_t column) const noexcept { return column * neurons_per_column; }
};

/// Per-target-column synapse counts for an excitatory neuron. The ring
/// quotas are per neighbor column (four columns per ring).
struct ProjectionQuota {
  std::uint32_t own = 152;
  std::uint32_t per_first_neighbor = 6;
  std::uint32_t per_second_neighbor = 4;
  std::uint32_t per_third_neighbor = 2;

  std::uint32_t total() const noexcept {
    return own + 4 * (per_first_neighbor + per_second_neighbor + per_third_neighbor);
  }
  std::uint32_t per_ring(int ring) const noexcept;

  /// Quotas scaled proportionally from the 76/3/2/1 percent split. M must be a
  /// multiple of 100; anything else throws ConfigError.
  static ProjectionQuota for_synapses(std::uint32_t synapses_per_neuron);

  bool operator==(const ProjectionQuota&) const = default;
};

struct InitialWeights {
  double excitatory = 7.5;
  double inhibitory = -5.0;
};

struct ThalamicSpec {
  std::uint32_t events_per_ms_per_column = 1;
  double amplitude = 20.0;
};

struct SynapseRecord {
  Gid source_gid = 0;
  Gid target_gid = 0;
  // Position j in the source's forward list; breaks ties between synapses
  // sharing (source, delay).
  std::uint32_t projection_index = 0;
  std::uint16_t delay = 1;
  double weight = 0.0;
  double delta_accumulator = 0.0;
  TimeMs last_delivery_time = kNever;
};

struct ThalamicEvent {
  Gid target_gid = 0;
  double amplitude = 0.0;

  bool operator==(const ThalamicEvent&) const = default;
};

/// The four columns of neighbor ring 1 (axial distance 1), 2 (diagonal) or 3
/// (axial distance 2), wrapped onto the torus. Duplicates are kept.
std::array<ColumnCoord, 4> neighbor_columns(const GridSpec& grid, ColumnCoord col, int ring);

/// Deterministic wiring of the column grid. Every method is a pure function
/// of the construction parameters and its arguments.
class Connectome {
 public:
  Connectome(GridSpec grid, ProjectionQuota quota, InitialWeights weights = {},
             ThalamicSpec thalamic = {});

  const GridSpec& grid() const noexcept { return grid_; }
  const ProjectionQuota& quota() const noexcept { return quota_; }
  const InitialWeights& weights() const noexcept { return weights_; }
  const ThalamicSpec& thalamic() const noexcept { return thalamic_; }

  /// The M forward synapses of `source_gid`, in projection order.
  std::vector<SynapseRecord> project_forward_synapses(Gid source_gid) const;

  /// Appends into `out` instead of allocating.
  void project_forward_synapses(Gid source_gid, std::vector<SynapseRecord>& out) const;

  /// External stimulus for one column during millisecond `t`.
  std::vector<ThalamicEvent> thalamic_events(TimeMs t, std::uint32_t column) const;
  std::vector<ThalamicEvent> thalamic_events(TimeMs t, ColumnCoord column) const {
    return thalamic_events(t, grid_.column_id(column));
  }

 private:
  Gid draw_target(Gid source, std::uint32_t j, std::uint32_t column, std::uint32_t pool) const;

  GridSpec grid_;
  ProjectionQuota quota_;
  InitialWeights weights_;
  ThalamicSpec thalamic_;
  std::uint32_t exc_per_column_;
};

}  // namespace dpsnn
