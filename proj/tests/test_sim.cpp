// Copyright 2026 The underflow Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "underflow/sim.hpp"

using namespace underflow;

namespace {

ValidatedSpec finite(const char* name, int N, double alpha) {
  auto p = oracle::load(name).spec();
  p.horizon = N;
  p.alpha = alpha;
  return validate(p);
}

/// Sends nothing, ever.
class Idle : public Policy {
 public:
  std::string name() const override { return "idle"; }
  std::size_t receivers() const override { return 1; }
  void act(int, std::span<const double>, std::span<const std::size_t>,
           std::span<double> z) const override {
    z[0] = 0.0;
  }
};

/// Oracle: plain recursion over channel paths, no code shared with the
/// simulator.
double path_expectation(const ValueGrid1D& vg, const ProblemSpec& p, int n, double x,
                        std::size_t s) {
  const auto& rx = p.receivers[0];
  const auto dec = vg.decide(n, s, x);
  const double cost = oracle::raw_power(rx.channel.curves[s], dec.z) + rx.holding(dec.y - rx.demand);
  if (n == 1) return cost;
  double cont = 0.0;
  for (std::size_t t = 0; t < rx.channel.size(); ++t)
    cont += rx.channel.prob(s, t) * path_expectation(vg, p, n - 1, dec.y - rx.demand, t);
  return cost + p.alpha * cont;
}

}  // namespace

TEST_CASE("counter generator") {
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  double sum = 0.0;
  for (std::uint64_t k = 0; k < 100000; ++k) {
    const double u = counter_uniform(7, k, 3, 0);
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
  CHECK(counter_uniform(1, 2, 3, 4) == counter_uniform(1, 2, 3, 4));
  CHECK(counter_uniform(1, 2, 3, 4) != counter_uniform(1, 2, 4, 3));
  const double p[] = {0.25, 0.0, 0.75};
  CHECK(sample_index(p, 0.1) == 0);
  CHECK(sample_index(p, 0.25) == 2);
  CHECK(sample_index(p, 0.9999999) == 2);
  CHECK(sample_index(p, 1.0) == 2);
}

TEST_CASE("just in time on a single state costs N c d") {
  const auto spec = finite("single_state.json", 7, 1.0);
  auto p = spec.spec();
  p.receivers[0].holding = HoldingCost::linear(0.0);
  const auto v = validate(p);
  SimOptions opt;
  opt.episodes = 10;
  const auto res = simulate(JustInTimePolicy(v), v, opt);
  CHECK(res.stats.mean == 7 * 1.5 * 1.0);
  CHECK(res.stats.std_error == 0.0);
  CHECK(res.stats.average == 1.5);
  CHECK(res.stats.aborted == 0);
}

TEST_CASE("exhaustive expectation equals the DP value") {
  for (const char* name : {"two_state.json", "three_state_iid.json", "pwl_two_state.json"}) {
    INFO(name);
    const auto spec = oracle::load(name);
    auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec));
    const GridPolicy1D policy(vg);
    const int N = spec.horizon();
    for (std::size_t s = 0; s < vg->states(); ++s) {
      const double x0[] = {0.0};
      const std::size_t s0[] = {s};
      const double e = exhaustive_expectation(policy, spec, N, x0, s0);
      CHECK(std::abs(e - vg->value(N, s, 0)) <= 1e-10);
      CHECK(std::abs(e - path_expectation(*vg, spec.spec(), N, 0.0, s)) <= 1e-10);
    }
  }
}

TEST_CASE("monte carlo mean within three standard errors of the DP value") {
  const auto spec = oracle::load("three_state_iid.json");
  auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec));
  SimOptions opt;
  opt.episodes = 20000;
  opt.s0 = {1};
  opt.seed = 11;
  const auto res = simulate(GridPolicy1D(vg), spec, opt);
  CHECK(res.stats.aborted == 0);
  const double exact = vg->value(spec.horizon(), 1, 0);
  CHECK(std::abs(res.stats.mean - exact) <= 3.0 * res.stats.std_error);
  CHECK(res.stats.min <= res.stats.mean);
  CHECK(res.stats.max >= res.stats.mean);
}

TEST_CASE("too many paths is a config error") {
  const auto spec = finite("three_state_iid.json", 11, 0.95);
  const JustInTimePolicy jit(spec);
  const double x0[] = {0.0};
  const std::size_t s0[] = {0};
  try {
    exhaustive_expectation(jit, spec, 11, x0, s0);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
}

TEST_CASE("the DP policy beats just in time") {
  const auto spec = oracle::load("two_state.json");
  auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec));
  SimOptions opt;
  opt.episodes = 10000;
  const auto dp = simulate(GridPolicy1D(vg), spec, opt);
  const auto jit = simulate(JustInTimePolicy(spec), spec, opt);
  // Same seed, same channel paths: compare episode by episode.
  std::vector<double> diff(opt.episodes);
  for (std::size_t e = 0; e < opt.episodes; ++e) diff[e] = jit.costs[e] - dp.costs[e];
  double mean = 0.0, sq = 0.0;
  for (double d : diff) mean += d;
  mean /= static_cast<double>(diff.size());
  for (double d : diff) sq += (d - mean) * (d - mean);
  const double se = std::sqrt(sq / (diff.size() - 1.0) / diff.size());
  CHECK(mean - 1.96 * se > 0.0);
}

TEST_CASE("threshold and DP policies act identically on shared seeds") {
  const auto spec = oracle::load("three_state_iid.json");
  const BaseStockSimPolicy thr(BaseStockPolicy::from_spec(spec));
  auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec));
  const GridPolicy1D dp(vg);
  SimOptions opt;
  opt.episodes = 2000;
  opt.keep_trajectories = true;
  const auto a = simulate(thr, spec, opt);
  const auto b = simulate(dp, spec, opt);
  REQUIRE(a.trajectories.size() == b.trajectories.size());
  std::size_t differ = 0;
  for (std::size_t e = 0; e < a.trajectories.size(); ++e) {
    const auto& ra = a.trajectories[e].records;
    const auto& rb = b.trajectories[e].records;
    REQUIRE(ra.size() == rb.size());
    for (std::size_t t = 0; t < ra.size(); ++t)
      if (std::abs(ra[t].z[0] - rb[t].z[0]) > 1e-9) ++differ;
  }
  CHECK(differ == 0);
  CHECK(a.stats.mean == doctest::Approx(b.stats.mean).epsilon(1e-12));
}

TEST_CASE("seed determinism") {
  const auto spec = oracle::load("two_state.json");
  const OpportunisticGreedyPolicy pol(spec);
  SimOptions opt;
  opt.seed = 42;
  auto dump = [&](std::uint64_t seed, unsigned workers) {
    opt.seed = seed;
    opt.workers = workers;
    std::ostringstream out;
    for (std::uint64_t e = 0; e < 50; ++e)
      write_trajectory_csv(simulate_episode(pol, spec, opt, e, true), out);
    return out.str();
  };
  CHECK(dump(42, 1) == dump(42, 1));
  CHECK(dump(42, 1) != dump(43, 1));
  opt.episodes = 64;
  opt.seed = 5;
  opt.workers = 1;
  const auto one = simulate(pol, spec, opt);
  opt.workers = 4;
  const auto four = simulate(pol, spec, opt);
  CHECK(one.costs == four.costs);
  CHECK(one.stats.mean == four.stats.mean);
}

TEST_CASE("trajectories obey the dynamics and constraints") {
  for (const char* name : {"tight_2rx.json", "markov_2rx.json", "example2.json"}) {
    INFO(name);
    const auto spec = oracle::load(name);
    GridOptions g;
    g.step = 0.25;
    auto vg = std::make_shared<const ValueGrid2D>(solve_2rx(spec, g));
    const GridPolicy2D dp(vg);
    const StructuredPolicy structured(RegionPolicy(vg, {}));
    const OpportunisticGreedyPolicy greedy(spec);
    const JustInTimePolicy jit(spec);
    for (const Policy* pol : std::initializer_list<const Policy*>{&dp, &structured, &greedy, &jit}) {
      INFO(pol->name());
      SimOptions opt;
      opt.episodes = 200;
      opt.keep_trajectories = true;
      const auto res = simulate(*pol, spec, opt);
      CHECK(res.stats.aborted == 0);
      for (const auto& tr : res.trajectories) {
        for (std::size_t t = 0; t < tr.records.size(); ++t) {
          const auto& r = tr.records[t];
          CHECK(r.power <= spec.peak_power() + 1e-9);
          for (std::size_t m = 0; m < 2; ++m) {
            const double d = spec.receiver(m).demand;
            CHECK(r.x[m] + r.z[m] >= d - 1e-9);
            if (t + 1 < tr.records.size())
              CHECK(tr.records[t + 1].x[m] == doctest::Approx(r.x[m] + r.z[m] - d));
          }
        }
      }
    }
  }
}

TEST_CASE("infeasible actions abort the episode") {
  const auto spec = oracle::load("two_state.json");
  SimOptions opt;
  opt.episodes = 5;
  const auto res = simulate(Idle(), spec, opt);
  CHECK(res.stats.aborted == 5);
  CHECK(res.stats.episodes == 0);
  CHECK(std::isnan(res.costs[0]));
  REQUIRE_FALSE(res.abort_reasons.empty());
  CHECK(res.abort_reasons[0].find("underflow") != std::string::npos);
  const double x0[] = {0.0};
  const std::size_t s0[] = {0};
  try {
    exhaustive_expectation(Idle(), spec, 3, x0, s0);
    FAIL("expected PolicyInfeasibleAction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PolicyInfeasibleAction);
  }
  CHECK_THROWS_AS(simulate(Idle(), oracle::load("tight_2rx.json"), opt), Error);
}

TEST_CASE("csv output") {
  const auto spec = oracle::load("two_state.json");
  SimOptions opt;
  const auto tr = simulate_episode(JustInTimePolicy(spec), spec, opt, 0, true);
  std::ostringstream t;
  write_trajectory_csv(tr, t);
  CHECK(t.str().rfind("seed,episode,n,s1,x1,z1,power,holding\n1,0,3,", 0) == 0);
  std::ostringstream s;
  write_stats_csv("jit", CostStats{}, s);
  CHECK(s.str().rfind("policy,episodes,aborted,mean,stderr,min,max,average_per_slot\njit,0,0,", 0) == 0);
}
