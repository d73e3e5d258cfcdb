#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "relloc/ranging_protocol.hpp"

using namespace relloc;

namespace {

class StaticMedium : public CollisionDomainView {
 public:
  explicit StaticMedium(double radius = 60.0) : radius_(radius) {}
  void place(NodeId id, const Vec3& p) { positions_[id] = p; }
  Vec3 position(NodeId node, double) const override { return positions_.at(node); }
  double radio_radius() const override { return radius_; }

 private:
  double radius_;
  std::map<NodeId, Vec3> positions_;
};

// Nodes on a 2 m circle: every pair within radio range.
StaticMedium clique_medium(std::size_t k) {
  StaticMedium m;
  for (std::size_t i = 0; i < k; ++i) {
    const double a = kTwoPi * static_cast<double>(i) / static_cast<double>(k);
    m.place(static_cast<NodeId>(i + 1), Vec3(2.0 * std::cos(a), 0.0, 2.0 * std::sin(a)));
  }
  return m;
}

RadioNode active_node(std::vector<NodeId> neighbors) {
  RadioNode n;
  n.node_id = 1;
  n.mode = RadioMode::kActive;
  n.wants_session = true;
  for (NodeId id : neighbors) n.neighbors.push_back({id, 0.0, -50.0});
  return n;
}

// Poll start times per responder over [0, duration) stepping in 1 ms ticks.
std::map<NodeId, std::vector<double>> drive_polls(RadioNode& node, double duration,
                                                  const ProtocolConfig& cfg) {
  StaticMedium medium;
  std::map<NodeId, std::vector<double>> starts;
  for (int tick = 0; tick * 1e-3 < duration; ++tick) {
    const double now = tick * 1e-3;
    for (auto& n : node.neighbors) n.last_seen = now;
    for (const auto& ev : advance(node, now, medium, cfg)) {
      if (ev.kind == RadioEventKind::kTwrStart) starts[ev.responder].push_back(ev.time);
    }
  }
  return starts;
}

// Mean of Exponential(mean m) truncated to [0, T].
double truncated_exponential_mean(double m, double t) {
  const double e = std::exp(-t / m);
  return m - t * e / (1.0 - e);
}

// P(|X - Y| < d) for independent truncated exponentials, small-d limit:
// 2 d * integral of the squared density.
double near_coincidence_probability(double m, double t, double d) {
  const double e = std::exp(-t / m);
  const double integral_f2 = (1.0 - e * e) / (2.0 * m * (1.0 - e) * (1.0 - e));
  return 2.0 * d * integral_f2;
}

}  // namespace

TEST(RangingProtocol_Config, DefaultsMatchStatedValues) {
  const ProtocolConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.t_ble, 0.2);
  EXPECT_DOUBLE_EQ(cfg.t_uwb, 0.1);
  EXPECT_GE(cfg.eviction_timeout, 10.0);
  EXPECT_LE(cfg.eviction_timeout, 20.0);
  EXPECT_DOUBLE_EQ(cfg.idle_power_mw, 10.0);
  EXPECT_DOUBLE_EQ(cfg.active_power_mw, 800.0);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RangingProtocol_Config, ValidateRejectsBadPeriods) {
  ProtocolConfig cfg;
  cfg.t_uwb = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ProtocolConfig{};
  cfg.exchange_duration = cfg.t_uwb;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ProtocolConfig{};
  cfg.discovery_latency_min = 3.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(RangingProtocol_Density, LookupUsesFirstMatchingRow) {
  const auto table = default_density_table();
  EXPECT_DOUBLE_EQ(lookup_t_uwb(table, 2), 0.1);
  EXPECT_DOUBLE_EQ(lookup_t_uwb(table, 3), 0.1);
  EXPECT_DOUBLE_EQ(lookup_t_uwb(table, 4), 0.2);
  EXPECT_DOUBLE_EQ(lookup_t_uwb(table, 10), 0.22);
  // Past the last row the per-node airtime share is kept.
  EXPECT_DOUBLE_EQ(lookup_t_uwb(table, 50), 1.1);
  EXPECT_THROW(lookup_t_uwb({}, 3), std::invalid_argument);
}

TEST(RangingProtocol_Rssi, LogDistance) {
  EXPECT_DOUBLE_EQ(rssi_at(1.0), -41.0);
  EXPECT_DOUBLE_EQ(rssi_at(10.0), -61.0);
  EXPECT_DOUBLE_EQ(rssi_at(0.0), rssi_at(0.1));
}

TEST(RangingProtocol_Advance, SingleNeighborPolledEveryPeriod) {
  ProtocolConfig cfg;
  RadioNode node = active_node({2});
  const auto starts = drive_polls(node, 2.0, cfg);
  const auto& t = starts.at(2);
  ASSERT_GE(t.size(), 19u);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_NEAR(t[i] - t[i - 1], cfg.t_uwb, 1.01e-3);
}

TEST(RangingProtocol_Advance, ThreeNeighborsCycleRoundRobin) {
  ProtocolConfig cfg;
  RadioNode node = active_node({2, 3, 4});
  const auto starts = drive_polls(node, 3.0, cfg);
  ASSERT_EQ(starts.size(), 3u);
  for (const auto& [id, t] : starts) {
    ASSERT_GE(t.size(), 9u);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_NEAR(t[i] - t[i - 1], 3 * cfg.t_uwb, 3.01e-3);
  }
  EXPECT_LT(node.round_robin_index, node.neighbors.size());
}

TEST(RangingProtocol_Advance, EmptyNeighborListOnlyAdvertises) {
  ProtocolConfig cfg;
  RadioNode node = active_node({});
  StaticMedium medium;
  std::size_t ads = 0;
  for (int tick = 0; tick < 1000; ++tick) {
    for (const auto& ev : advance(node, tick * 1e-3, medium, cfg)) {
      EXPECT_EQ(ev.kind, RadioEventKind::kAdvertisement);
      EXPECT_TRUE(ev.active_flag);
      ++ads;
    }
  }
  EXPECT_EQ(ads, 5u);
}

TEST(RangingProtocol_Medium, DisjointExchangesSucceed) {
  const auto out = resolve_medium({{0.0, 1, 2}, {0.05, 3, 4}}, 0.003);
  EXPECT_EQ(out, (std::vector<ExchangeOutcome>{ExchangeOutcome::kSuccess, ExchangeOutcome::kSuccess}));
}

TEST(RangingProtocol_Medium, OverlappingExchangesCollide) {
  const auto out = resolve_medium({{0.0, 1, 2}, {0.001, 3, 4}}, 0.003);
  EXPECT_EQ(out, (std::vector<ExchangeOutcome>{ExchangeOutcome::kCollision, ExchangeOutcome::kCollision}));
}

TEST(RangingProtocol_Medium, ThreeWayOverlapAllCollide) {
  const auto out = resolve_medium({{0.0, 1, 2}, {0.001, 3, 4}, {0.002, 5, 6}, {0.5, 7, 8}}, 0.003);
  EXPECT_EQ(out[0], ExchangeOutcome::kCollision);
  EXPECT_EQ(out[1], ExchangeOutcome::kCollision);
  EXPECT_EQ(out[2], ExchangeOutcome::kCollision);
  EXPECT_EQ(out[3], ExchangeOutcome::kSuccess);
}

TEST(RangingProtocol_Backoff, OffsetsTruncatedToPeriodWithExpectedMean) {
  ProtocolConfig cfg;
  RadioNode node;
  Rng rng(17);
  const int n = 100000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double o = apply_backoff(node, rng, cfg);
    ASSERT_GE(o, 0.0);
    ASSERT_LE(o, cfg.t_uwb);
    sum += o;
    sum_sq += o * o;
  }
  EXPECT_TRUE(node.pending_backoff);
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, truncated_exponential_mean(cfg.t_uwb / 2.0, cfg.t_uwb), 3.0 * se);
}

TEST(RangingProtocol_Backoff, RepeatCollisionProbabilityIsLow) {
  ProtocolConfig cfg;
  RadioNode a;
  RadioNode b;
  Rng ra(1);
  Rng rb(2);
  const int trials = 200000;
  int again = 0;
  for (int i = 0; i < trials; ++i) {
    const double oa = apply_backoff(a, ra, cfg);
    const double ob = apply_backoff(b, rb, cfg);
    if (std::abs(oa - ob) < cfg.exchange_duration) ++again;
  }
  const double p = static_cast<double>(again) / trials;
  const double expected = near_coincidence_probability(cfg.t_uwb / 2.0, cfg.t_uwb, cfg.exchange_duration);
  EXPECT_NEAR(expected, 0.0788, 5e-4);
  EXPECT_NEAR(p, expected, 0.01);
  EXPECT_LT(p, 0.2);
}

TEST(RangingProtocol_Backoff, NoCollisionNoOffset) {
  // Two isolated nodes: every exchange succeeds and polls stay on the grid.
  ProtocolConfig cfg;
  StaticMedium medium = clique_medium(2);
  ProtocolSimulator sim(cfg, medium, 5);
  sim.add_node(1, true);
  sim.add_node(2, false);
  sim.run_until(20.0);
  std::vector<double> starts;
  for (const auto& ev : sim.take_events()) {
    EXPECT_NE(ev.kind, RadioEventKind::kTwrCollision);
    if (ev.kind == RadioEventKind::kTwrStart && ev.initiator == 1) starts.push_back(ev.time);
  }
  ASSERT_GT(starts.size(), 100u);
  for (std::size_t i = 1; i < starts.size(); ++i) EXPECT_NEAR(starts[i] - starts[i - 1], cfg.t_uwb, 1e-9);
  EXPECT_EQ(sim.stats().collisions, 0u);
}

TEST(RangingProtocol_Evict, SilentNeighborEvicted) {
  ProtocolConfig cfg;
  RadioNode node = active_node({2, 3});
  node.neighbors[1].last_seen = 10.0;
  const auto ev = evict_stale(node, 16.0, cfg);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, RadioEventKind::kEviction);
  EXPECT_EQ(ev[0].responder, 2u);
  ASSERT_EQ(node.neighbors.size(), 1u);
  EXPECT_EQ(node.neighbors[0].node_id, 3u);
}

TEST(RangingProtocol_Evict, RefreshedNeighborRetained) {
  ProtocolConfig cfg;
  RadioNode node = active_node({2});
  node.neighbors[0].last_seen = 15.0;
  EXPECT_TRUE(evict_stale(node, 16.0, cfg).empty());
  EXPECT_TRUE(node.has_neighbor(2));
  // Exactly at the timeout the entry survives.
  node.neighbors[0].last_seen = 1.0;
  EXPECT_TRUE(evict_stale(node, 16.0, cfg).empty());
}

TEST(RangingProtocol_Evict, CursorWrapsWithoutSkipping) {
  ProtocolConfig cfg;
  RadioNode node = active_node({2, 3, 4});
  node.round_robin_index = 2;
  node.neighbors[2].last_seen = -20.0;
  evict_stale(node, 0.0, cfg);
  EXPECT_EQ(node.round_robin_index, 0u);
  EXPECT_EQ(node.neighbors[node.round_robin_index].node_id, 2u);

  node = active_node({2, 3, 4});
  node.round_robin_index = 1;  // next up: node 3
  node.neighbors[0].last_seen = -20.0;
  evict_stale(node, 0.0, cfg);
  EXPECT_EQ(node.neighbors[node.round_robin_index].node_id, 3u);

  node = active_node({2});
  node.neighbors[0].last_seen = -20.0;
  evict_stale(node, 0.0, cfg);
  EXPECT_TRUE(node.neighbors.empty());
  EXPECT_EQ(node.round_robin_index, 0u);
}

TEST(RangingProtocol_DutyCycle, IdleNodesDrawIdlePower) {
  ProtocolConfig cfg;
  StaticMedium medium = clique_medium(4);
  ProtocolSimulator sim(cfg, medium, 3);
  for (NodeId id = 1; id <= 4; ++id) sim.add_node(id, false);
  sim.run_until(60.0);
  sim.finalize(60.0);
  for (const auto& [id, node] : sim.nodes()) {
    EXPECT_NE(node.mode, RadioMode::kActive);
    const double total = node.energy_mj[0] + node.energy_mj[1] + node.energy_mj[2];
    EXPECT_NEAR(total / 60.0, cfg.idle_power_mw, 1e-9);
  }
  EXPECT_EQ(sim.stats().attempts, 0u);
}

TEST(RangingProtocol_DutyCycle, ActiveSessionDrawsActivePower) {
  ProtocolConfig cfg;
  StaticMedium medium = clique_medium(2);
  ProtocolSimulator sim(cfg, medium, 3);
  sim.add_node(1, true);
  sim.run_until(30.0);
  sim.finalize(30.0);
  const RadioNode& n = sim.nodes().at(1);
  EXPECT_NEAR(n.energy_mj[static_cast<std::size_t>(RadioMode::kActive)] / 30.0, cfg.active_power_mw, 1e-9);
}

TEST(RangingProtocol_DutyCycle, ActiveNodeReturnsToScanningAfterTimeout) {
  ProtocolConfig cfg;
  RadioNode node;
  node.node_id = 2;
  duty_cycle(node, 1.0, true, cfg);
  EXPECT_EQ(node.mode, RadioMode::kActive);
  EXPECT_TRUE(duty_cycle(node, 1.0 + cfg.active_timeout, false, cfg).empty());
  const auto ev = duty_cycle(node, 1.1 + cfg.active_timeout, false, cfg);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, RadioEventKind::kSleep);
  EXPECT_EQ(node.mode, RadioMode::kScanning);
  // Idle power before the wake, active power for the session.
  EXPECT_NEAR(node.energy_mj[static_cast<std::size_t>(RadioMode::kSleeping)], cfg.idle_power_mw * 1.0, 1e-9);
  EXPECT_NEAR(node.energy_mj[static_cast<std::size_t>(RadioMode::kActive)],
              cfg.active_power_mw * (0.1 + cfg.active_timeout), 1e-6);
}

TEST(RangingProtocol_DutyCycle, WakePropagatesWithinOneAdvertisementPeriod) {
  ProtocolConfig cfg;
  StaticMedium medium = clique_medium(6);
  medium.place(7, Vec3(500.0, 0.0, 0.0));  // out of radio range
  ProtocolSimulator sim(cfg, medium, 11);
  sim.add_node(1, true);
  for (NodeId id = 2; id <= 7; ++id) sim.add_node(id, false);
  sim.run_until(5.0);
  std::map<NodeId, double> woke;
  std::map<NodeId, double> found_session_node;
  for (const auto& ev : sim.take_events()) {
    if (ev.kind == RadioEventKind::kWake && !woke.count(ev.initiator)) woke[ev.initiator] = ev.time;
    if (ev.kind == RadioEventKind::kDiscovery && ev.responder == 1) found_session_node[ev.initiator] = ev.time;
  }
  for (NodeId id = 2; id <= 6; ++id) {
    ASSERT_TRUE(woke.count(id)) << id;
    EXPECT_LE(woke[id], cfg.t_ble);
    ASSERT_TRUE(found_session_node.count(id)) << id;
    EXPECT_LE(found_session_node[id], cfg.t_ble + cfg.discovery_latency_max);
  }
  EXPECT_EQ(woke.count(7), 0u);
  EXPECT_NE(sim.nodes().at(7).mode, RadioMode::kActive);
}

TEST(RangingProtocol_Simulator, TenNodeCliqueRangesAtOneHertz) {
  ProtocolConfig cfg;
  cfg.t_uwb = lookup_t_uwb(default_density_table(), 10);
  StaticMedium medium = clique_medium(10);
  ProtocolSimulator sim(cfg, medium, 21);
  for (NodeId id = 1; id <= 10; ++id) sim.add_node(id, true);
  sim.run_until(10.0);
  const ProtocolStats warm = sim.stats();
  sim.run_until(70.0);
  const ProtocolStats& end = sim.stats();
  double total_rate = 0.0;
  std::size_t pairs = 0;
  for (const auto& [pair, count] : end.pair_successes) {
    const auto before = warm.pair_successes.count(pair) ? warm.pair_successes.at(pair) : 0;
    const double rate = static_cast<double>(count - before) / 60.0;
    EXPECT_NEAR(rate, 1.0, 0.35) << pair.first << "-" << pair.second;
    total_rate += rate;
    ++pairs;
  }
  EXPECT_EQ(pairs, 45u);
  EXPECT_NEAR(total_rate / static_cast<double>(pairs), 1.0, 0.2);
}

TEST(RangingProtocol_Simulator, SmallCliquesDeliverNinetyPercent) {
  for (std::size_t k = 2; k <= 5; ++k) {
    ProtocolConfig cfg;
    cfg.t_uwb = lookup_t_uwb(default_density_table(), k);
    StaticMedium medium = clique_medium(k);
    ProtocolSimulator sim(cfg, medium, 100 + k);
    for (NodeId id = 1; id <= k; ++id) sim.add_node(id, true);
    sim.run_until(60.0);
    const auto& s = sim.stats();
    ASSERT_GT(s.attempts, 0u);
    EXPECT_GE(static_cast<double>(s.successes) / static_cast<double>(s.attempts), 0.9) << "k=" << k;
  }
}

TEST(RangingProtocol_Simulator, RoundRobinPollCountsStayBalanced) {
  ProtocolConfig cfg;
  cfg.t_uwb = lookup_t_uwb(default_density_table(), 6);
  StaticMedium medium = clique_medium(6);
  ProtocolSimulator sim(cfg, medium, 8);
  for (NodeId id = 1; id <= 6; ++id) sim.add_node(id, true);
  // Once every neighbor is known the cycle is exact.
  sim.run_until(5.0);
  for (const auto& [id, node] : sim.nodes()) ASSERT_EQ(node.neighbors.size(), 5u);
  std::map<NodeId, std::map<NodeId, std::uint64_t>> start;
  for (const auto& [id, node] : sim.nodes()) start[id] = node.polls;
  sim.run_until(65.0);
  for (const auto& [id, node] : sim.nodes()) {
    std::uint64_t lo = UINT64_MAX;
    std::uint64_t hi = 0;
    for (const auto& [peer, count] : node.polls) {
      const std::uint64_t n = count - start[id][peer];
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    EXPECT_LE(hi - lo, 1u) << "node " << id;
  }
}

TEST(RangingProtocol_Simulator, DeterministicAndOrdered) {
  auto run = [] {
    ProtocolConfig cfg;
    cfg.t_uwb = 0.2;
    StaticMedium medium = clique_medium(5);
    ProtocolSimulator sim(cfg, medium, 77);
    sim.add_node(1, true);
    for (NodeId id = 2; id <= 5; ++id) sim.add_node(id, false, 0.5 * id);
    sim.run_until(20.0);
    return sim.take_events();
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].kind, b[i].kind);
    EXPECT_EQ(a[i].time, b[i].time);
    EXPECT_EQ(a[i].initiator, b[i].initiator);
    EXPECT_EQ(a[i].responder, b[i].responder);
    if (i > 0) EXPECT_GE(a[i].time, a[i - 1].time);
  }
}
