#include "dpsnn/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dpsnn {

namespace {

constexpr double kSubstepMs = 0.5;

std::uint64_t queue_key(Gid source, std::uint16_t delay) {
  return static_cast<std::uint64_t>(source) << 8 | delay;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConnectivityMask

std::uint32_t ConnectivityMask::connected_pairs() const noexcept {
  return static_cast<std::uint32_t>(
      std::count_if(synapses_.begin(), synapses_.end(), [](std::uint64_t n) { return n > 0; }));
}

// ---------------------------------------------------------------------------
// SynapseStore

SynapseStore::SynapseStore(std::vector<SynapseRecord> incoming, Gid first_gid,
                           std::uint32_t local_count, const GridSpec& grid)
    : first_gid_(first_gid) {
  std::sort(incoming.begin(), incoming.end(), [](const SynapseRecord& a, const SynapseRecord& b) {
    if (a.source_gid != b.source_gid) return a.source_gid < b.source_gid;
    if (a.delay != b.delay) return a.delay < b.delay;
    return a.projection_index < b.projection_index;
  });

  const std::size_t n = incoming.size();
  source.resize(n);
  target_local.resize(n);
  projection_index.resize(n);
  delay.resize(n);
  weight.resize(n);
  delta.resize(n);
  last_delivery.resize(n);
  plastic.resize(n);

  std::vector<std::uint32_t> plastic_count(local_count + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const SynapseRecord& r = incoming[i];
    if (r.target_gid < first_gid || r.target_gid - first_gid >= local_count)
      throw ConstructionError("synapse targets gid " + std::to_string(r.target_gid) +
                              " which is not owned by this worker");
    source[i] = r.source_gid;
    target_local[i] = r.target_gid - first_gid;
    projection_index[i] = r.projection_index;
    delay[i] = r.delay;
    weight[i] = r.weight;
    delta[i] = r.delta_accumulator;
    last_delivery[i] = r.last_delivery_time;
    plastic[i] = grid.is_excitatory(r.source_gid) ? 1 : 0;

    if (i == 0 || source[i] != source[i - 1]) {
      axons_.push_back({r.source_gid, static_cast<std::uint32_t>(groups_.size()),
                        static_cast<std::uint32_t>(groups_.size()), plastic[i] != 0});
    }
    if (i == 0 || source[i] != source[i - 1] || delay[i] != delay[i - 1]) {
      groups_.push_back({r.delay, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i)});
      axons_.back().group_end = static_cast<std::uint32_t>(groups_.size());
    }
    groups_.back().end = static_cast<std::uint32_t>(i + 1);
    if (plastic[i]) {
      ++plastic_count[target_local[i] + 1];
      plastic_all_.push_back(static_cast<std::uint32_t>(i));
    }
  }

  axon_of_.reserve(axons_.size());
  for (std::uint32_t a = 0; a < axons_.size(); ++a) axon_of_.emplace(axons_[a].source, a);

  plastic_offsets_.resize(local_count + 1, 0);
  std::partial_sum(plastic_count.begin(), plastic_count.end(), plastic_offsets_.begin());
  plastic_index_.resize(plastic_offsets_.back());
  std::vector<std::uint32_t> cursor(plastic_offsets_.begin(), plastic_offsets_.end() - 1);
  for (std::uint32_t i : plastic_all_) plastic_index_[cursor[target_local[i]]++] = i;
}

const SynapseStore::Axon* SynapseStore::find_axon(Gid src) const {
  const auto it = axon_of_.find(src);
  return it == axon_of_.end() ? nullptr : &axons_[it->second];
}

std::pair<std::uint32_t, std::uint32_t> SynapseStore::lookup(Gid src, std::uint16_t d) const {
  const Axon* axon = find_axon(src);
  if (axon == nullptr) return {0, 0};
  for (const DelayGroup& g : groups_of(*axon)) {
    if (g.delay == d) return {g.begin, g.end};
  }
  return {0, 0};
}

std::vector<SynapseRecord> SynapseStore::records() const {
  std::vector<SynapseRecord> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out[i].source_gid = source[i];
    out[i].target_gid = first_gid_ + target_local[i];
    out[i].projection_index = projection_index[i];
    out[i].delay = delay[i];
    out[i].weight = weight[i];
    out[i].delta_accumulator = delta[i];
    out[i].last_delivery_time = last_delivery[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// SpikeQueue

void SpikeQueue::push(TimeMs now, TimeMs land, Entry e) {
  if (land < now || land - now >= static_cast<TimeMs>(slots_.size()))
    throw std::logic_error("spike due at " + std::to_string(land) + " outside queue horizon at t=" +
                           std::to_string(now));
  slot(land).push_back(e);
}

std::vector<SpikeQueue::Entry>& SpikeQueue::due(TimeMs now) {
  auto& s = slot(now);
  std::sort(s.begin(), s.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
  return s;
}

std::size_t SpikeQueue::pending() const noexcept {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.size();
  return n;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(const Connectome& connectome, const PartitionPlan& plan, EngineOptions options,
               Endpoint& endpoint)
    : connectome_(connectome),
      grid_(connectome.grid()),
      plan_(plan),
      options_(std::move(options)),
      endpoint_(endpoint),
      rank_(endpoint.rank()),
      first_gid_(0),
      loc_n_(plan.local_count()),
      first_column_(0),
      last_column_(0),
      mask_(plan.workers()),
      queue_(grid_.delay_max),
      clock_(timers_) {
  if (endpoint.size() != plan.workers())
    throw ConfigError("workers", "fabric has " + std::to_string(endpoint.size()) +
                                     " endpoints but the plan has " + std::to_string(plan.workers()));
  if (plan.total_neurons() != grid_.total_neurons())
    throw ConfigError("workers", "partition plan does not match the grid");
  options_.excitatory.validate();
  options_.inhibitory.validate();
  options_.stdp.validate();
  if (options_.ltp_lookback < 0) throw ConfigError("ltp_lookback_ms", "must be >= 0");
  if (options_.rate_bin <= 0) throw ConfigError("rate_bin_ms", "must be > 0");

  ltp_.resize(static_cast<std::size_t>(options_.ltp_lookback) + 1);
  ltd_.resize(static_cast<std::size_t>(options_.ltp_lookback) + 1);
  for (std::size_t k = 0; k < ltp_.size(); ++k) {
    ltp_[k] = stdp_delta(static_cast<double>(k), 0.0, 0.0, options_.stdp);
    ltd_[k] = k == 0 ? 0.0 : stdp_delta(-static_cast<double>(k), 0.0, 0.0, options_.stdp);
  }

  first_gid_ = plan_.first_gid(rank_);
  first_column_ = grid_.column_of(first_gid_);
  last_column_ = grid_.column_of(first_gid_ + loc_n_ - 1);

  neurons_.resize(loc_n_);
  excitatory_.resize(loc_n_);
  input_.assign(loc_n_, 0.0);
  for (std::uint32_t i = 0; i < loc_n_; ++i) {
    const bool exc = grid_.is_excitatory(first_gid_ + i);
    excitatory_[i] = exc ? 1 : 0;
    const IzhikevichParams& p = exc ? options_.excitatory : options_.inhibitory;
    neurons_[i] = NeuronState{p.c, p.b * p.c, kNever};
  }
  for (Gid g : options_.trace_gids) {
    if (g >= grid_.total_neurons()) throw ConfigError("trace_gids", "gid " + std::to_string(g) + " out of range");
    if (plan_.owner_of(g) == rank_) trace_local_.push_back(g - first_gid_);
  }
  std::sort(trace_local_.begin(), trace_local_.end());
  trace_local_.erase(std::unique(trace_local_.begin(), trace_local_.end()), trace_local_.end());

  outgoing_.resize(plan_.workers());
  received_spikes_.assign(plan_.workers(), 0);
  column_bins_.resize(last_column_ - first_column_ + 1);
  timers_.barrier_enabled = options_.barrier;
}

void Engine::construct_network() {
  if (constructed_) throw ConstructionError("network already constructed");
  const std::uint32_t h = plan_.workers();

  std::vector<std::uint32_t> counts(h, 0);
  std::vector<Bytes> payload(h);
  std::vector<SynapseRecord> projected;
  projected.reserve(grid_.synapses_per_neuron);
  std::vector<WorkerId> owners;
  target_worker_offsets_.assign(1, 0);
  for (std::uint32_t i = 0; i < loc_n_; ++i) {
    projected.clear();
    connectome_.project_forward_synapses(first_gid_ + i, projected);
    owners.clear();
    for (const SynapseRecord& s : projected) {
      const WorkerId w = plan_.owner_of(s.target_gid);
      ++counts[w];
      wire::append_synapse(payload[w], s);
      owners.push_back(w);
    }
    std::sort(owners.begin(), owners.end());
    owners.erase(std::unique(owners.begin(), owners.end()), owners.end());
    target_workers_.insert(target_workers_.end(), owners.begin(), owners.end());
    target_worker_offsets_.push_back(static_cast<std::uint32_t>(target_workers_.size()));
  }

  const std::vector<std::uint32_t> incoming = endpoint_.exchange_counts(counts);
  std::vector<std::uint64_t> expected(h);
  for (WorkerId s = 0; s < h; ++s) {
    expected[s] = static_cast<std::uint64_t>(incoming[s]) * wire::kSynapseRecordBytes;
    mask_.set(rank_, s, counts[s]);
    mask_.set(s, rank_, incoming[s]);
    announced_incoming_ += incoming[s];
  }

  std::vector<Bytes> received = endpoint_.exchange_payloads(std::move(payload), expected);
  std::vector<SynapseRecord> records;
  records.reserve(announced_incoming_);
  for (WorkerId s = 0; s < h; ++s) {
    auto part = wire::decode_synapses(received[s]);
    if (part.size() != incoming[s])
      throw ConstructionError("worker " + std::to_string(s) + " announced " + std::to_string(incoming[s]) +
                              " synapses but sent " + std::to_string(part.size()));
    records.insert(records.end(), part.begin(), part.end());
    Bytes{}.swap(received[s]);
  }
  store_ = SynapseStore(std::move(records), first_gid_, loc_n_, grid_);
  if (store_.size() != announced_incoming_)
    throw ConstructionError("stored synapse count differs from the announced count");
  constructed_ = true;
}

void Engine::add_external_current(Gid gid, double amount) {
  const LocalAddress a = plan_.local_index(gid);
  if (a.worker != rank_) throw std::out_of_range("gid " + std::to_string(gid) + " is not owned by this worker");
  input_[a.local] += amount;
}

std::span<const Gid> Engine::simulate_step() {
  if (!constructed_) throw ConstructionError("simulate_step before construct_network");
  const TimeMs t = now_;
  clock_.start();

  ltp_post_spike(t);
  clock_.lap(Block::kLtpPostSpike);

  if (options_.barrier) {
    endpoint_.barrier();
    clock_.lap(Block::kBarrier);
  }

  exchange_spikes(t);  // laps the count and payload blocks itself
  multicast_and_inject(t);

  thalamic_input(t);
  clock_.lap(Block::kThalamicInput);

  neural_dynamics(t);
  clock_.lap(Block::kNeuralDynamics);

  statistics(t);
  clock_.lap(Block::kStatistics);

  if (options_.plasticity && (t + 1) % options_.stdp.consolidation_period == 0) consolidate();
  clock_.lap(Block::kLongTermPlasticity);

  std::swap(fired_prev_, fired_now_);
  ++now_;
  return fired_prev_;
}

const BlockTimerReport& Engine::run(TimeMs duration, TimeMs warmup) {
  if (duration <= 0) throw ConfigError("measure_ms", "duration must be > 0");
  if (warmup < 0) throw ConfigError("warmup_ms", "must be >= 0");
  clock_.set_enabled(false);
  for (TimeMs i = 0; i < warmup; ++i) simulate_step();
  clock_.set_enabled(true);
  const auto start = BlockClock::clock::now();
  for (TimeMs i = 0; i < duration; ++i) simulate_step();
  timers_.total_seconds += std::chrono::duration<double>(BlockClock::clock::now() - start).count();
  clock_.set_enabled(false);
  return timers_;
}

// Potentiate incoming synapses of neurons that fired in the previous step.
void Engine::ltp_post_spike(TimeMs t) {
  if (!options_.plasticity) return;
  // Lag is t_post - t_pre - delay = t_post - arrival.
  const TimeMs t_post = t - 1;
  for (Gid gid : fired_prev_) {
    for (std::uint32_t syn : store_.incoming_plastic(gid - first_gid_)) {
      const TimeMs arrived = store_.last_delivery[syn];
      if (arrived == kNever || t_post - arrived > options_.ltp_lookback) continue;
      store_.delta[syn] += ltp_[static_cast<std::size_t>(t_post - arrived)];
    }
  }
}

// Announce spike counts, then ship AER batches to connected workers.
void Engine::exchange_spikes(TimeMs t) {
  const std::uint32_t h = plan_.workers();
  for (auto& o : outgoing_) o.clear();
  for (Gid gid : fired_prev_) {
    const std::uint32_t local = gid - first_gid_;
    for (std::uint32_t k = target_worker_offsets_[local]; k < target_worker_offsets_[local + 1]; ++k)
      outgoing_[target_workers_[k]].push_back({gid, t - 1});
  }
  std::vector<std::uint32_t> counts(h);
  for (WorkerId w = 0; w < h; ++w) counts[w] = static_cast<std::uint32_t>(outgoing_[w].size());

  const std::vector<std::uint32_t> announced = endpoint_.exchange_counts(counts);
  clock_.lap(Block::kSpikeCountExchange);

  std::vector<Bytes> payload(h);
  std::vector<std::uint64_t> expected(h);
  for (WorkerId w = 0; w < h; ++w) {
    if (!outgoing_[w].empty()) payload[w] = wire::encode_spike_batch(rank_, outgoing_[w]);
    expected[w] = wire::spike_batch_bytes(announced[w]);
  }
  const std::vector<Bytes> received = endpoint_.exchange_payloads(std::move(payload), expected);

  // Queue every (axon, delay) group at its landing time.
  for (WorkerId s = 0; s < h; ++s) {
    if (announced[s] == 0) continue;
    const wire::SpikeBatch batch = wire::decode_spike_batch(received[s]);
    if (batch.source_worker != s || batch.spikes.size() != announced[s])
      throw ProtocolError("batch from worker " + std::to_string(s) + " does not match its announcement");
    received_spikes_[s] += batch.spikes.size();
    for (const wire::AxonalSpike& spike : batch.spikes) {
      const SynapseStore::Axon* axon = store_.find_axon(spike.source_gid);
      if (axon == nullptr)
        throw ProtocolError("spike from gid " + std::to_string(spike.source_gid) +
                            " reached worker " + std::to_string(rank_) + " which hosts none of its synapses");
      const auto groups = store_.groups_of(*axon);
      for (std::size_t k = 0; k < groups.size(); ++k) {
        queue_.push(t, spike.emission_time + groups[k].delay,
                    {queue_key(spike.source_gid, groups[k].delay), store_.group_index(*axon, k)});
      }
    }
  }
  clock_.lap(Block::kSpikePayloadExchange);
}

// Fan due axonal spikes out to their synapse groups, add currents in
// (source gid, delay, projection index) order, and depress delivering synapses.
void Engine::multicast_and_inject(TimeMs t) {
  std::vector<SpikeQueue::Entry>& due = queue_.due(t);
  clock_.lap(Block::kIntraProcessMulticast);

  const bool plastic_on = options_.plasticity;
  std::uint64_t delivered = 0;
  for (const SpikeQueue::Entry& e : due) {
    const SynapseStore::DelayGroup& g = store_.group(e.group);
    const TimeMs emitted = t - g.delay;
    const std::uint32_t n = g.end - g.begin;
    delivered += n;
    if (static_cast<std::size_t>(emitted) >= delivered_by_emission_.size())
      delivered_by_emission_.resize(static_cast<std::size_t>(emitted) + 1, 0);
    delivered_by_emission_[static_cast<std::size_t>(emitted)] += n;

    for (std::uint32_t syn = g.begin; syn < g.end; ++syn) {
      const std::uint32_t target = store_.target_local[syn];
      input_[target] += store_.weight[syn];
      if (plastic_on && store_.plastic[syn]) {
        // Lag is post - emitted - delay = post - t < 0.
        const TimeMs post = neurons_[target].last_spike_time;
        if (post != kNever && t - post <= options_.ltp_lookback)
          store_.delta[syn] += ltd_[static_cast<std::size_t>(t - post)];
        store_.last_delivery[syn] = t;
      }
    }
  }
  queue_.clear_due(t);
  if (static_cast<std::size_t>(t) >= delivered_by_step_.size())
    delivered_by_step_.resize(static_cast<std::size_t>(t) + 1, 0);
  delivered_by_step_[static_cast<std::size_t>(t)] += delivered;
  clock_.lap(Block::kCurrentInjectionLtd);
}

void Engine::thalamic_input(TimeMs t) {
  const Gid end = first_gid_ + loc_n_;
  for (std::uint32_t c = first_column_; c <= last_column_; ++c) {
    for (const ThalamicEvent& e : connectome_.thalamic_events(t, c)) {
      if (e.target_gid >= first_gid_ && e.target_gid < end) input_[e.target_gid - first_gid_] += e.amplitude;
    }
  }
}

// Two half-millisecond Euler substeps, then threshold and reset.
void Engine::neural_dynamics(TimeMs t) {
  fired_now_.clear();
  for (std::uint32_t i = 0; i < loc_n_; ++i) {
    const IzhikevichParams& p = excitatory_[i] ? options_.excitatory : options_.inhibitory;
    NeuronState s = neurons_[i];
    try {
      s = membrane_substep(s, p, input_[i], kSubstepMs);
      if (s.v < p.v_peak) s = membrane_substep(s, p, input_[i], kSubstepMs);
    } catch (const NumericDivergence& e) {
      throw NumericDivergence(std::string(e.what()) + " in neuron " + std::to_string(first_gid_ + i),
                              first_gid_ + i);
    }
    const FireResult r = fire_and_reset(s, p, t);
    neurons_[i] = r.state;
    if (r.fired) fired_now_.push_back(first_gid_ + i);
    input_[i] = 0.0;
  }
}

void Engine::statistics(TimeMs t) {
  const std::size_t bin = static_cast<std::size_t>(t / options_.rate_bin);
  for (Gid gid : fired_now_) {
    raster_.push_back({t, gid});
    auto& bins = column_bins_[grid_.column_of(gid) - first_column_];
    if (bins.size() <= bin) bins.resize(bin + 1, 0);
    ++bins[bin];
  }
  for (std::uint32_t local : trace_local_) {
    const NeuronState& s = neurons_[local];
    traces_.push_back({t, first_gid_ + local, s.v, s.u});
  }
}

void Engine::consolidate() {
  const StdpParams& p = options_.stdp;
  for (std::uint32_t syn : store_.plastic_synapses()) {
    store_.weight[syn] = consolidate_weight(store_.weight[syn], store_.delta[syn], p);
    store_.delta[syn] = 0.0;
  }
}

std::vector<std::uint64_t> Engine::weight_histogram(std::uint32_t bins) const {
  std::vector<std::uint64_t> hist(bins, 0);
  if (bins == 0) return hist;
  const double lo = options_.stdp.w_min;
  const double span = options_.stdp.w_max - lo;
  for (std::uint32_t syn : store_.plastic_synapses()) {
    std::size_t b = 0;
    if (span > 0) {
      const double x = (store_.weight[syn] - lo) / span * bins;
      b = static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(bins - 1)));
    }
    ++hist[b];
  }
  return hist;
}

}  // namespace dpsnn
