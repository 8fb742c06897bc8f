#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "dpsnn/connectome.hpp"
#include "dpsnn/random.hpp"

using namespace dpsnn;

namespace {

GridSpec grid(std::uint32_t cfx, std::uint32_t cfy) {
  GridSpec g;
  g.cfx = cfx;
  g.cfy = cfy;
  return g;
}

using Coords = std::vector<ColumnCoord>;

Coords as_vector(const std::array<ColumnCoord, 4>& a) { return {a.begin(), a.end()}; }

}  // namespace

TEST(NeighborColumns, FirstRingWrapsAtOrigin) {
  EXPECT_EQ(as_vector(neighbor_columns(grid(8, 8), {0, 0}, 1)), (Coords{{1, 0}, {7, 0}, {0, 1}, {0, 7}}));
}

TEST(NeighborColumns, SingleColumnMapsOntoItself) {
  for (int ring = 1; ring <= 3; ++ring)
    EXPECT_EQ(as_vector(neighbor_columns(grid(1, 1), {0, 0}, ring)), (Coords(4, ColumnCoord{0, 0})));
}

TEST(NeighborColumns, ThirdRingKeepsDuplicates) {
  EXPECT_EQ(as_vector(neighbor_columns(grid(4, 4), {3, 3}, 3)), (Coords{{1, 3}, {1, 3}, {3, 1}, {3, 1}}));
}

TEST(NeighborColumns, DiagonalRing) {
  EXPECT_EQ(as_vector(neighbor_columns(grid(8, 8), {0, 0}, 2)), (Coords{{1, 1}, {1, 7}, {7, 1}, {7, 7}}));
  EXPECT_THROW(neighbor_columns(grid(8, 8), {0, 0}, 4), std::invalid_argument);
}

TEST(StatelessUniform, PureFunctionOfSeedAndKey) {
  EXPECT_EQ(stateless::uniform(42, {1, 2, 3}), stateless::uniform(42, {1, 2, 3}));
  EXPECT_EQ(stateless::hash(0, {}), stateless::hash(0, {}));
}

TEST(StatelessUniform, DistinctKeysAndSeedsGiveDistinctBits) {
  std::mt19937_64 rng(1);
  std::set<std::uint64_t> seen;
  for (int n = 0; n < 1000; ++n) {
    const std::uint64_t a = rng(), b = rng(), c = rng();
    seen.insert(stateless::hash(99, {a, b, c}));
  }
  EXPECT_EQ(seen.size(), 1000u);

  // Keys that differ only in order or by one in a single word.
  EXPECT_NE(stateless::hash(99, {1, 2}), stateless::hash(99, {2, 1}));
  EXPECT_NE(stateless::hash(99, {1, 2}), stateless::hash(99, {1, 3}));
  EXPECT_NE(stateless::hash(99, {0}), stateless::hash(99, {0, 0}));

  seen.clear();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) seen.insert(stateless::hash(seed, {7, 7, 7}));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(StatelessUniform, RangeAndChiSquareUniformity) {
  constexpr int kBins = 100;
  constexpr int kDraws = 100000;
  std::vector<int> counts(kBins, 0);
  for (std::uint64_t i = 0; i < kDraws; ++i) {
    const double u = stateless::uniform(2024, {3, i});
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++counts[static_cast<int>(u * kBins)];
  }
  const double expected = static_cast<double>(kDraws) / kBins;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(kBins - 1);
  const double critical = boost::math::quantile(dist, 0.999);
  EXPECT_LT(chi2, critical) << "critical value " << critical;
}

TEST(StatelessUniform, IndexDrawStaysInRange) {
  for (std::uint64_t i = 0; i < 10000; ++i) ASSERT_LT(stateless::uniform_index(5, {i}, 7), 7u);
}

TEST(ProjectionQuota, DefaultAndScaled) {
  const ProjectionQuota q;
  EXPECT_EQ(q.total(), 200u);
  EXPECT_EQ(ProjectionQuota::for_synapses(200), q);
  EXPECT_EQ(ProjectionQuota::for_synapses(1000), (ProjectionQuota{760, 30, 20, 10}));
  EXPECT_EQ(ProjectionQuota::for_synapses(100), (ProjectionQuota{76, 3, 2, 1}));
  EXPECT_THROW(ProjectionQuota::for_synapses(150), ConfigError);
  EXPECT_THROW(ProjectionQuota::for_synapses(0), ConfigError);
}

TEST(Connectome, RejectsInconsistentSetups) {
  GridSpec g = grid(2, 2);
  EXPECT_THROW(Connectome(g, ProjectionQuota{100, 6, 4, 2}), ConfigError);
  g.neurons_per_column = 2;
  g.excitatory_fraction = 0.5;  // one excitatory neuron per column
  g.synapses_per_neuron = 200;
  EXPECT_THROW(Connectome(g, ProjectionQuota{}), ConstructionError);
  g = grid(1, 1);
  g.excitatory_fraction = 0.8005;
  EXPECT_THROW(Connectome(g, ProjectionQuota{}), ConfigError);
  g = grid(0, 1);
  EXPECT_THROW(Connectome(g, ProjectionQuota{}), ConfigError);
}

TEST(Connectome, EveryNeuronProjectsExactlyM) {
  const Connectome c(grid(2, 2), ProjectionQuota{});
  for (Gid g : {0u, 799u, 800u, 3999u}) {
    const auto syn = c.project_forward_synapses(g);
    ASSERT_EQ(syn.size(), 200u);
    for (std::uint32_t j = 0; j < syn.size(); ++j) {
      EXPECT_EQ(syn[j].projection_index, j);
      EXPECT_EQ(syn[j].source_gid, g);
    }
  }
  EXPECT_THROW(c.project_forward_synapses(4000), std::out_of_range);
}

TEST(Connectome, InhibitoryProjectsOnlyToLocalExcitatory) {
  const GridSpec g = grid(4, 4);
  const Connectome c(g, ProjectionQuota{});
  for (Gid src : {800u, 999u, 5 * 1000u + 850u}) {
    const std::uint32_t col = g.column_of(src);
    for (const auto& s : c.project_forward_synapses(src)) {
      EXPECT_EQ(s.delay, 1);
      EXPECT_EQ(g.column_of(s.target_gid), col);
      EXPECT_TRUE(g.is_excitatory(s.target_gid));
      EXPECT_EQ(s.weight, c.weights().inhibitory);
    }
  }
}

TEST(Connectome, ExcitatoryColumnTalliesOnEightByEight) {
  const GridSpec g = grid(8, 8);
  const Connectome c(g, ProjectionQuota{});
  // Independent enumeration of the 12 neighbor offsets and their quotas.
  const int offsets[12][3] = {{1, 0, 6},  {-1, 0, 6},  {0, 1, 6},  {0, -1, 6},  {1, 1, 4},  {1, -1, 4},
                              {-1, 1, 4}, {-1, -1, 4}, {2, 0, 2},  {-2, 0, 2},  {0, 2, 2},  {0, -2, 2}};
  for (Gid src : {0u, 123u, 27 * 1000u + 5u, 63 * 1000u + 799u}) {
    const auto col = g.coord_of(g.column_of(src));
    std::map<std::uint32_t, int> expected;
    expected[g.column_of(src)] += 152;
    for (const auto& o : offsets) {
      const ColumnCoord n{(col.x + o[0] + 8) % 8, (col.y + o[1] + 8) % 8};
      expected[g.column_id(n)] += o[2];
    }
    std::map<std::uint32_t, int> tally;
    for (const auto& s : c.project_forward_synapses(src)) {
      ++tally[g.column_of(s.target_gid)];
      EXPECT_NE(s.target_gid, src);
      EXPECT_GE(s.delay, 1);
      EXPECT_LE(s.delay, 20);
      EXPECT_EQ(s.weight, c.weights().excitatory);
    }
    EXPECT_EQ(tally, expected);
    std::vector<int> counts;
    for (const auto& [col_id, n] : tally) counts.push_back(n);
    std::sort(counts.rbegin(), counts.rend());
    EXPECT_EQ(counts, (std::vector<int>{152, 6, 6, 6, 6, 4, 4, 4, 4, 2, 2, 2, 2}));
  }
}

TEST(Connectome, SingleColumnProjectsEverythingToItselfWithoutAutapses) {
  const GridSpec g = grid(1, 1);
  const Connectome c(g, ProjectionQuota{});
  for (Gid src = 0; src < g.total_neurons(); ++src) {
    for (const auto& s : c.project_forward_synapses(src)) {
      ASSERT_NE(s.target_gid, src);
      ASSERT_LT(s.target_gid, g.total_neurons());
    }
  }
}

TEST(Connectome, DelaysUniformOnFourByFour) {
  const GridSpec g = grid(4, 4);
  const Connectome c(g, ProjectionQuota{});
  std::vector<std::uint64_t> hist(21, 0);
  std::uint64_t total = 0;
  std::vector<SynapseRecord> buf;
  for (Gid src = 0; src < g.total_neurons(); ++src) {
    if (!g.is_excitatory(src)) continue;
    buf.clear();
    c.project_forward_synapses(src, buf);
    for (const auto& s : buf) {
      ++hist[s.delay];
      ++total;
    }
  }
  const double p = 1.0 / 20.0;
  const double sd = std::sqrt(total * p * (1 - p));
  for (int d = 1; d <= 20; ++d) EXPECT_NEAR(static_cast<double>(hist[d]), total * p, 3 * sd) << "delay " << d;
}

TEST(Connectome, ThalamicEventsOnePerColumnPerMs) {
  const GridSpec g = grid(2, 2);
  const Connectome c(g, ProjectionQuota{});
  for (TimeMs t = 0; t < 1000; ++t) {
    for (std::uint32_t col = 0; col < g.columns(); ++col) {
      const auto ev = c.thalamic_events(t, col);
      ASSERT_EQ(ev.size(), 1u);
      EXPECT_EQ(g.column_of(ev[0].target_gid), col);
      EXPECT_EQ(ev[0].amplitude, 20.0);
    }
  }
  // Same inputs on another instance (as another worker would hold it).
  const Connectome other(g, ProjectionQuota{});
  EXPECT_EQ(c.thalamic_events(77, ColumnCoord{1, 1}), other.thalamic_events(77, 3u));

  ThalamicSpec none;
  none.events_per_ms_per_column = 0;
  const Connectome quiet(g, ProjectionQuota{}, InitialWeights{}, none);
  EXPECT_TRUE(quiet.thalamic_events(5, 0u).empty());
}

TEST(Connectome, ThalamicTargetsCoverColumnUniformly) {
  const GridSpec g = grid(1, 1);
  const Connectome c(g, ProjectionQuota{});
  std::vector<int> hits(10, 0);
  for (TimeMs t = 0; t < 20000; ++t) ++hits[c.thalamic_events(t, 0u)[0].target_gid / 100];
  for (int h : hits) EXPECT_NEAR(h, 2000, 3 * std::sqrt(20000 * 0.1 * 0.9));
}
