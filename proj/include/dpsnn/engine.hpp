#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "dpsnn/block_timer.hpp"
#include "dpsnn/connectome.hpp"
#include "dpsnn/fabric.hpp"
#include "dpsnn/model.hpp"
#include "dpsnn/partition.hpp"
#include "dpsnn/types.hpp"
#include "dpsnn/wire.hpp"

namespace dpsnn {

/// Which worker pairs exchange spikes, and how many synapses each pair hosts.
/// A worker fills its own row (outgoing) and column (incoming); the harness
/// merges rows into the global view.
class ConnectivityMask {
 public:
  explicit ConnectivityMask(std::uint32_t workers = 0)
      : workers_(workers), synapses_(static_cast<std::size_t>(workers) * workers, 0) {}

  std::uint32_t workers() const noexcept { return workers_; }
  bool connected(WorkerId source, WorkerId target) const { return synapses(source, target) > 0; }
  std::uint64_t synapses(WorkerId source, WorkerId target) const {
    return synapses_.at(static_cast<std::size_t>(source) * workers_ + target);
  }
  void set(WorkerId source, WorkerId target, std::uint64_t count) {
    synapses_.at(static_cast<std::size_t>(source) * workers_ + target) = count;
  }
  std::uint32_t connected_pairs() const noexcept;

  bool operator==(const ConnectivityMask&) const = default;

 private:
  std::uint32_t workers_;
  std::vector<std::uint64_t> synapses_;
};

/// Incoming synapses of one worker, sorted by (source gid, delay, projection
/// index). Each source axon owns a run of delay groups; each group is a
/// contiguous synapse range.
class SynapseStore {
 public:
  struct DelayGroup {
    std::uint16_t delay = 0;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
  };
  struct Axon {
    Gid source = 0;
    std::uint32_t group_begin = 0;
    std::uint32_t group_end = 0;
    bool plastic = false;
  };

  SynapseStore() = default;
  /// `incoming` must target neurons in [first_gid, first_gid + local_count).
  SynapseStore(std::vector<SynapseRecord> incoming, Gid first_gid, std::uint32_t local_count,
               const GridSpec& grid);

  std::size_t size() const noexcept { return target_local.size(); }
  std::size_t axon_count() const noexcept { return axons_.size(); }

  const Axon* find_axon(Gid source) const;
  std::span<const DelayGroup> groups_of(const Axon& axon) const {
    return {groups_.data() + axon.group_begin, axon.group_end - axon.group_begin};
  }
  const DelayGroup& group(std::uint32_t index) const { return groups_[index]; }
  std::uint32_t group_index(const Axon& axon, std::size_t k) const {
    return axon.group_begin + static_cast<std::uint32_t>(k);
  }

  /// Synapse index range [first, second) with this source and delay; empty
  /// if there is none.
  std::pair<std::uint32_t, std::uint32_t> lookup(Gid source, std::uint16_t delay) const;

  /// Plastic synapses onto local neuron `local`.
  std::span<const std::uint32_t> incoming_plastic(std::uint32_t local) const {
    return {plastic_index_.data() + plastic_offsets_[local],
            plastic_offsets_[local + 1] - plastic_offsets_[local]};
  }
  const std::vector<std::uint32_t>& plastic_synapses() const noexcept { return plastic_all_; }

  /// Copies back out as records (store order).
  std::vector<SynapseRecord> records() const;

  // Structure-of-arrays synapse data, indexed by synapse id.
  std::vector<Gid> source;
  std::vector<std::uint32_t> target_local;
  std::vector<std::uint32_t> projection_index;
  std::vector<std::uint16_t> delay;
  std::vector<double> weight;
  std::vector<double> delta;
  std::vector<TimeMs> last_delivery;
  std::vector<std::uint8_t> plastic;

 private:
  Gid first_gid_ = 0;
  std::vector<Axon> axons_;
  std::vector<DelayGroup> groups_;
  std::unordered_map<Gid, std::uint32_t> axon_of_;
  std::vector<std::uint32_t> plastic_offsets_;
  std::vector<std::uint32_t> plastic_index_;
  std::vector<std::uint32_t> plastic_all_;
};

/// Delay ring: slot for time `land` is land mod horizon. Holds (axon, delay)
/// group references due at a given millisecond.
class SpikeQueue {
 public:
  struct Entry {
    std::uint64_t key = 0;  // source gid << 8 | delay; unique per slot
    std::uint32_t group = 0;
  };

  explicit SpikeQueue(std::uint32_t horizon = 20) : slots_(horizon) {}

  std::uint32_t horizon() const noexcept { return static_cast<std::uint32_t>(slots_.size()); }

  /// Throws std::logic_error if `land` is not within [now, now + horizon).
  void push(TimeMs now, TimeMs land, Entry e);

  /// Entries due at `now`, sorted by key. The slot stays valid until the next
  /// push into it; call clear_due() when done.
  std::vector<Entry>& due(TimeMs now);
  void clear_due(TimeMs now) { slot(now).clear(); }

  std::size_t pending() const noexcept;

 private:
  std::vector<Entry>& slot(TimeMs t) { return slots_[static_cast<std::size_t>(t) % slots_.size()]; }
  std::vector<std::vector<Entry>> slots_;
};

struct EngineOptions {
  IzhikevichParams excitatory = IzhikevichParams::regular_spiking();
  IzhikevichParams inhibitory = IzhikevichParams::fast_spiking();
  StdpParams stdp;
  bool plasticity = true;
  bool barrier = false;
  TimeMs ltp_lookback = 1000;
  TimeMs rate_bin = 100;
  std::vector<Gid> trace_gids;
};

struct SpikeEvent {
  TimeMs time = 0;
  Gid gid = 0;

  auto operator<=>(const SpikeEvent&) const = default;
};

struct TraceSample {
  TimeMs time = 0;
  Gid gid = 0;
  double v = 0.0;
  double u = 0.0;
};

/// Per-worker simulation kernel. All collective calls go through `endpoint`,
/// so every worker of a run must call construct_network() and then step in
/// lockstep.
class Engine {
 public:
  Engine(const Connectome& connectome, const PartitionPlan& plan, EngineOptions options,
         Endpoint& endpoint);

  /// Two-phase build: exchange per-worker synapse counts, then the synapse
  /// records themselves.
  void construct_network();

  /// Advances one millisecond. Returns the gids that fired during it.
  std::span<const Gid> simulate_step();

  /// Untimed warmup, then `duration` timed steps.
  const BlockTimerReport& run(TimeMs duration, TimeMs warmup = 0);

  /// Extra current for `gid` in the next step (must be owned by this worker).
  void add_external_current(Gid gid, double amount);

  TimeMs now() const noexcept { return now_; }
  WorkerId rank() const noexcept { return rank_; }
  const SynapseStore& store() const noexcept { return store_; }
  const ConnectivityMask& mask() const noexcept { return mask_; }
  const NeuronState& neuron(std::uint32_t local) const { return neurons_.at(local); }
  const BlockTimerReport& timers() const noexcept { return timers_; }
  std::uint64_t announced_incoming_synapses() const noexcept { return announced_incoming_; }

  // Observables accumulated since construction.
  const std::vector<SpikeEvent>& raster() const noexcept { return raster_; }
  const std::vector<TraceSample>& traces() const noexcept { return traces_; }
  /// Synaptic current events delivered, indexed by the emitting spike's time.
  const std::vector<std::uint64_t>& delivered_by_emission() const noexcept { return delivered_by_emission_; }
  /// Synaptic current events delivered, indexed by delivery time.
  const std::vector<std::uint64_t>& delivered_by_step() const noexcept { return delivered_by_step_; }
  /// Spikes received per source worker, summed over all rounds.
  const std::vector<std::uint64_t>& received_spikes() const noexcept { return received_spikes_; }
  /// Spike counts per owned column and rate bin.
  std::uint32_t first_column() const noexcept { return first_column_; }
  const std::vector<std::vector<std::uint32_t>>& column_bins() const noexcept { return column_bins_; }
  /// Histogram of plastic weights over [w_min, w_max] with `bins` equal bins.
  std::vector<std::uint64_t> weight_histogram(std::uint32_t bins) const;

 private:
  void ltp_post_spike(TimeMs t);
  void exchange_spikes(TimeMs t);
  void multicast_and_inject(TimeMs t);
  void thalamic_input(TimeMs t);
  void neural_dynamics(TimeMs t);
  void statistics(TimeMs t);
  void consolidate();

  const Connectome& connectome_;
  const GridSpec& grid_;
  PartitionPlan plan_;
  EngineOptions options_;
  Endpoint& endpoint_;
  WorkerId rank_;
  Gid first_gid_;
  std::uint32_t loc_n_;
  std::uint32_t first_column_;
  std::uint32_t last_column_;

  std::vector<NeuronState> neurons_;
  std::vector<std::uint8_t> excitatory_;
  std::vector<double> input_;
  // stdp_delta at integer lags: ltp_[k] for lag k >= 0, ltd_[k] for lag -k.
  std::vector<double> ltp_;
  std::vector<double> ltd_;
  std::vector<Gid> fired_prev_;
  std::vector<Gid> fired_now_;

  // Target workers of each local neuron's axon (CSR).
  std::vector<std::uint32_t> target_worker_offsets_;
  std::vector<WorkerId> target_workers_;

  SynapseStore store_;
  ConnectivityMask mask_;
  SpikeQueue queue_;
  std::uint64_t announced_incoming_ = 0;
  bool constructed_ = false;

  std::vector<std::vector<wire::AxonalSpike>> outgoing_;
  std::vector<std::uint64_t> received_spikes_;

  std::vector<Gid> trace_local_;
  std::vector<SpikeEvent> raster_;
  std::vector<TraceSample> traces_;
  std::vector<std::uint64_t> delivered_by_emission_;
  std::vector<std::uint64_t> delivered_by_step_;
  std::vector<std::vector<std::uint32_t>> column_bins_;

  TimeMs now_ = 0;
  BlockTimerReport timers_;
  BlockClock clock_;
};

}  // namespace dpsnn
