#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <mutex>
#include <numeric>
#include <random>

#include "dpsnn/config.hpp"
#include "dpsnn/engine.hpp"
#include "dpsnn/harness.hpp"
#include "support.hpp"

using namespace dpsnn;
using dpsnn::testing::small_grid;
using dpsnn::testing::with_engines;

namespace {

auto record_key(const SynapseRecord& r) {
  return std::tuple(r.source_gid, r.projection_index, r.target_gid, r.delay, r.weight);
}

ThalamicSpec no_thalamus() {
  ThalamicSpec t;
  t.events_per_ms_per_column = 0;
  return t;
}

EngineOptions static_options() {
  EngineOptions o;
  o.plasticity = false;
  return o;
}

}  // namespace

TEST(SynapseStore, SingleColumnHoldsEverySynapse) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{});
  with_engines(c, 1, {}, [](Engine& e) {
    EXPECT_EQ(e.store().size(), 200000u);
    EXPECT_EQ(e.announced_incoming_synapses(), 200000u);
    EXPECT_EQ(e.mask().connected_pairs(), 1u);
    EXPECT_TRUE(e.mask().connected(0, 0));
  });
}

TEST(SynapseStore, FourWorkersOnTwoByTwoAreFullyConnected) {
  const Connectome c(small_grid(2, 2), ProjectionQuota{});
  std::mutex m;
  std::uint64_t stored = 0;
  ConnectivityMask merged(4);
  with_engines(c, 4, {}, [&](Engine& e) {
    std::lock_guard lock(m);
    stored += e.store().size();
    for (WorkerId s = 0; s < 4; ++s)
      if (e.mask().synapses(s, e.rank()) > 0) merged.set(s, e.rank(), e.mask().synapses(s, e.rank()));
  });
  EXPECT_EQ(stored, 800000u);
  EXPECT_EQ(merged.connected_pairs(), 16u);
}

TEST(SynapseStore, GlobalSynapseSetIndependentOfWorkerCount) {
  const Connectome c(small_grid(2, 2), ProjectionQuota{});
  std::vector<std::vector<SynapseRecord>> per_h;
  for (std::uint32_t h : {1u, 2u, 4u}) {
    std::vector<SynapseRecord> all;
    std::mutex m;
    with_engines(c, h, {}, [&](Engine& e) {
      auto recs = e.store().records();
      std::lock_guard lock(m);
      all.insert(all.end(), recs.begin(), recs.end());
    });
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return record_key(a) < record_key(b); });
    per_h.push_back(std::move(all));
  }
  ASSERT_EQ(per_h[0].size(), 800000u);
  for (std::size_t k = 1; k < per_h.size(); ++k) {
    ASSERT_EQ(per_h[k].size(), per_h[0].size());
    for (std::size_t i = 0; i < per_h[0].size(); ++i)
      ASSERT_EQ(record_key(per_h[k][i]), record_key(per_h[0][i])) << "index " << i;
  }
}

TEST(SynapseStore, LookupBySourceAndDelay) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{});
  with_engines(c, 1, {}, [&](Engine& e) {
    const auto& store = e.store();
    for (Gid src : {0u, 17u, 799u, 800u, 999u}) {
      const auto forward = c.project_forward_synapses(src);
      for (std::uint16_t d = 1; d <= 20; ++d) {
        const auto [first, last] = store.lookup(src, d);
        const auto expected = std::count_if(forward.begin(), forward.end(), [d](const auto& r) { return r.delay == d; });
        ASSERT_EQ(static_cast<long>(last - first), expected) << src << " d=" << d;
        for (auto i = first; i < last; ++i) {
          ASSERT_EQ(store.source[i], src);
          ASSERT_EQ(store.delay[i], d);
          if (i > first) {
            ASSERT_LT(store.projection_index[i - 1], store.projection_index[i]);
          }
        }
      }
    }
  });
}

TEST(SpikeQueue, RejectsLandingOutsideHorizon) {
  SpikeQueue q(20);
  EXPECT_NO_THROW(q.push(5, 24, {1, 0}));
  EXPECT_THROW(q.push(5, 25, {1, 0}), std::logic_error);
  EXPECT_THROW(q.push(5, 4, {1, 0}), std::logic_error);
  EXPECT_EQ(q.pending(), 1u);
}

TEST(SpikeQueue, DueOrderMakesSumsIndependentOfArrivalOrder) {
  // Addends whose floating-point sum depends on evaluation order.
  const std::vector<std::pair<std::uint64_t, double>> items = {
      {(5ull << 8) | 3, 1e16}, {(2ull << 8) | 1, 1.0}, {(9ull << 8) | 2, -1e16}, {(2ull << 8) | 7, 1.0},
      {(7ull << 8) | 1, 3.5e-3}};
  std::vector<std::size_t> perm(items.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::set<double> naive_sums;
  std::set<double> queue_sums;
  do {
    SpikeQueue q(20);
    double naive = 0.0;
    for (std::size_t i : perm) {
      q.push(0, 4, {items[i].first, static_cast<std::uint32_t>(i)});
      naive += items[i].second;
    }
    naive_sums.insert(naive);
    double ordered = 0.0;
    std::uint64_t prev = 0;
    for (const auto& e : q.due(4)) {
      ASSERT_GT(e.key, prev);
      prev = e.key;
      ordered += items[e.group].second;
    }
    q.clear_due(4);
    queue_sums.insert(ordered);
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_GT(naive_sums.size(), 1u);
  EXPECT_EQ(queue_sums.size(), 1u);
}

TEST(Engine, QuiescentWithoutStimulus) {
  ExperimentConfig cfg;
  cfg.grid = small_grid(2, 2);
  cfg.thalamic.events_per_ms_per_column = 0;
  cfg.warmup_ms = 0;
  cfg.measure_ms = 200;
  const auto r = simulate(cfg, 4);
  EXPECT_TRUE(r.raster.empty());
  for (auto b : r.simulation_bytes) EXPECT_EQ(b, 0u);
}

TEST(Engine, SingleSpikeArrivesAfterItsDelay) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{}, InitialWeights{}, no_thalamus());
  const PartitionPlan plan(1, c.grid());
  LoopbackEndpoint ep1, ep2;
  Engine probe(c, plan, static_options(), ep1), control(c, plan, static_options(), ep2);
  probe.construct_network();
  control.construct_network();

  const Gid src = 42;
  const auto forward = c.project_forward_synapses(src);
  // A target whose earliest synapse from `src` has delay 7.
  std::map<Gid, std::uint16_t> earliest;
  for (const auto& r : forward) {
    auto [pos, inserted] = earliest.try_emplace(r.target_gid, r.delay);
    if (!inserted) pos->second = std::min(pos->second, r.delay);
  }
  const auto it = std::find_if(earliest.begin(), earliest.end(), [](const auto& kv) { return kv.second == 7; });
  ASSERT_NE(it, earliest.end());
  const Gid target = it->first;

  probe.add_external_current(src, 1000.0);
  for (TimeMs t = 0; t <= 25; ++t) {
    const auto fired = probe.simulate_step();
    control.simulate_step();
    if (t == 0) {
      ASSERT_EQ(std::vector<Gid>(fired.begin(), fired.end()), std::vector<Gid>{src});
    } else {
      ASSERT_TRUE(fired.empty()) << "t=" << t;
    }
    const bool same = probe.neuron(target) == control.neuron(target);
    if (t < 7) {
      EXPECT_TRUE(same) << "t=" << t;
    } else if (t == 7) {
      EXPECT_FALSE(same);
    }
  }
  for (std::uint16_t d = 1; d <= 20; ++d) {
    const auto expected = std::count_if(forward.begin(), forward.end(), [d](const auto& r) { return r.delay == d; });
    EXPECT_EQ(static_cast<long>(probe.delivered_by_step()[d]), expected) << "d=" << d;
  }
  EXPECT_EQ(probe.delivered_by_step()[0], 0u);
  EXPECT_EQ(probe.delivered_by_emission()[0], 200u);
}

TEST(Engine, CausalPairingPotentiatesAndAntiCausalDepresses) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{}, InitialWeights{}, no_thalamus());
  const PartitionPlan plan(1, c.grid());
  const EngineOptions opts;
  const Gid pre = 10;
  const auto forward = c.project_forward_synapses(pre);
  const SynapseRecord& link = forward[0];
  const Gid post = link.target_gid;
  const TimeMs d = link.delay;

  auto synapse_of = [&](const Engine& e) {
    const auto [first, last] = e.store().lookup(pre, link.delay);
    for (auto i = first; i < last; ++i)
      if (e.store().projection_index[i] == link.projection_index) return i;
    return last;
  };

  {
    LoopbackEndpoint ep;
    Engine e(c, plan, opts, ep);
    e.construct_network();
    for (TimeMs t = 0; t <= d + 2; ++t) {
      if (t == 0) e.add_external_current(pre, 1000.0);
      if (t == d) e.add_external_current(post, 1000.0);
      e.simulate_step();
    }
    const auto syn = synapse_of(e);
    ASSERT_EQ(e.store().last_delivery[syn], d);
    EXPECT_EQ(e.store().delta[syn], stdp_delta(d, 0, d, opts.stdp));
    EXPECT_EQ(e.store().delta[syn], opts.stdp.a_plus);
  }
  {
    LoopbackEndpoint ep;
    Engine e(c, plan, opts, ep);
    e.construct_network();
    for (TimeMs t = 0; t <= d + 3; ++t) {
      if (t == 0) e.add_external_current(post, 1000.0);
      if (t == 1) e.add_external_current(pre, 1000.0);
      e.simulate_step();
    }
    const auto syn = synapse_of(e);
    EXPECT_EQ(e.store().delta[syn], stdp_delta(0, 1, d, opts.stdp));
    EXPECT_LT(e.store().delta[syn], 0.0);
  }
}

TEST(Engine, NonFiniteStateReportsNeuron) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{});
  with_engines(c, 1, {}, [](Engine& e) {
    e.add_external_current(123, INFINITY);
    try {
      e.simulate_step();
      FAIL() << "expected NumericDivergence";
    } catch (const NumericDivergence& err) {
      EXPECT_EQ(err.gid(), 123);
    }
  });
}

TEST(Engine, ForeignGidRejected) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{});
  with_engines(c, 2, {}, [](Engine& e) {
    const Gid foreign = e.rank() == 0 ? 999 : 0;
    EXPECT_THROW(e.add_external_current(foreign, 1.0), std::out_of_range);
  });
}

TEST(Engine, OneStepRunAdvancesOnce) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{});
  with_engines(c, 1, {}, [](Engine& e) {
    e.run(1, 0);
    EXPECT_EQ(e.now(), 1);
    EXPECT_EQ(e.delivered_by_step().size(), 1u);
  });
}

TEST(Engine, RepeatedRunsAreIdentical) {
  const Connectome c(small_grid(1, 1), ProjectionQuota{});
  std::vector<std::vector<SpikeEvent>> rasters;
  for (int k = 0; k < 2; ++k)
    with_engines(c, 1, {}, [&](Engine& e) {
      for (int t = 0; t < 300; ++t) e.simulate_step();
      rasters.push_back(e.raster());
    });
  EXPECT_FALSE(rasters[0].empty());
  EXPECT_EQ(rasters[0], rasters[1]);
}

TEST(Engine, BlockTimersCoverTheLoop) {
  const Connectome c(small_grid(2, 2), ProjectionQuota{});
  with_engines(c, 1, {}, [](Engine& e) {
    const auto& r = e.run(300, 50);
    ASSERT_GT(r.total_seconds, 0.0);
    EXPECT_EQ(r[Block::kBarrier], 0.0);
    EXPECT_LT(std::fabs(r.residue_seconds()) / r.total_seconds, 0.05);
    EXPECT_EQ(e.now(), 350);
  });
}

TEST(Engine, SmallNetworkRasterIndependentOfWorkerCount) {
  ExperimentConfig cfg;
  cfg.grid = small_grid(2, 2, 100, 100);
  cfg.warmup_ms = 0;
  cfg.measure_ms = 400;
  std::vector<std::vector<SpikeEvent>> rasters;
  for (std::uint32_t h : {1u, 2u, 4u, 8u}) rasters.push_back(simulate(cfg, h).raster);
  ASSERT_FALSE(rasters[0].empty());
  for (std::size_t k = 1; k < rasters.size(); ++k) EXPECT_EQ(rasters[k], rasters[0]) << "H index " << k;
}

TEST(Engine, EverySpikeDeliversMCurrentEvents) {
  ExperimentConfig cfg;
  cfg.grid = small_grid(2, 2);
  cfg.engine.plasticity = false;
  cfg.warmup_ms = 0;
  cfg.measure_ms = 330;
  const auto r = simulate(cfg, 2);
  std::vector<std::uint64_t> spikes(300, 0);
  for (const auto& s : r.raster)
    if (s.time < 300) ++spikes[s.time];
  for (TimeMs t = 0; t < 300; ++t) {
    const std::uint64_t got = t < static_cast<TimeMs>(r.delivered_by_emission.size()) ? r.delivered_by_emission[t] : 0;
    ASSERT_EQ(got, spikes[t] * 200) << "t=" << t;
  }
}
