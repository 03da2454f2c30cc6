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
#include "underflow/bounds.hpp"

using namespace underflow;

namespace {

const char* const kTwoRx[] = {"tight_2rx.json", "markov_2rx.json", "symmetric_2rx.json",
                              "decoupled_2rx.json", "example2.json"};

GridOptions coarse() {
  GridOptions g;
  g.step = 0.1;
  return g;
}

}  // namespace

TEST_CASE("one receiver: the separable bound is exact") {
  for (const char* name : {"two_state.json", "three_state_iid.json", "pwl_two_state.json"}) {
    INFO(name);
    const auto spec = oracle::load(name);
    const auto vg = solve_1rx(spec);
    BoundOptions opt;
    for (std::size_t s = 0; s < vg.states(); ++s) {
      opt.s = {s};
      const auto r = separable_bound(spec, opt);
      CHECK(r.value == doctest::Approx(vg.value(vg.horizon, s, 0)).epsilon(1e-12));
    }
    // The greedy policy on the exact bound is the optimal policy.
    opt.s.clear();
    const auto greedy = greedy_feasible(spec, separable_bound(spec, opt));
    for (int n = 1; n <= vg.horizon; ++n)
      for (std::size_t s = 0; s < vg.states(); ++s)
        for (std::size_t i = 0; i < vg.nodes(); ++i) {
          const double x[] = {vg.model.grid.x(i)};
          const std::size_t st[] = {s};
          double z[1];
          greedy.act(n, x, st, z);
          CHECK(z[0] == doctest::Approx(vg.packets(n, s, i)).epsilon(1e-12));
        }
  }
}

TEST_CASE("decoupled receivers: both bounds are exact") {
  const auto spec = oracle::load("decoupled_2rx.json");
  const auto vg = solve_2rx(spec, coarse());
  BoundOptions opt;
  opt.grid = coarse();
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b) {
      opt.s = {a, b};
      const double exact = exact_value(spec, vg, opt);
      CHECK(separable_bound(spec, opt).value == doctest::Approx(exact).epsilon(1e-12));
      const auto lag = lagrangian_bound(spec, opt);
      CHECK(lag.lambda == 0.0);
      CHECK(lag.value == doctest::Approx(exact).epsilon(1e-12));
    }
}

TEST_CASE("bounds sit below the exact value") {
  for (const char* name : kTwoRx) {
    INFO(name);
    const auto spec = oracle::load(name);
    const auto vg = solve_2rx(spec, coarse());
    BoundOptions opt;
    opt.grid = coarse();
    for (std::size_t a = 0; a < spec.model(0).curves.size(); ++a)
      for (std::size_t b = 0; b < spec.model(1).curves.size(); ++b) {
        opt.s = {a, b};
        const double exact = exact_value(spec, vg, opt);
        auto sep = separable_bound(spec, opt);
        auto lag = lagrangian_bound(spec, opt);
        CHECK(sep.value <= exact + 1e-8);
        CHECK(lag.value <= exact + 1e-8);
        CHECK(lag.value >= sep.value - 1e-12);
        CHECK(trace_concave(lag));
        for (double lambda : {0.5, 2.0, 7.0})
          CHECK(dual_bound(spec, lambda, opt).value <= lag.value + 1e-9);
      }
  }
}

TEST_CASE("four-state benchmark: the bound is strictly below the exact value") {
  const auto spec = oracle::load("example2.json");
  const auto vg = solve_2rx(spec, coarse());
  BoundOptions opt;
  opt.grid = coarse();
  opt.x = {0.0, 0.0};
  auto lag = lagrangian_bound(spec, opt);
  lag.set_exact(exact_value(spec, vg, opt));
  CHECK(lag.gap > 0.05);
  CHECK(lag.value >= separable_bound(spec, opt).value - 1e-12);
}

TEST_CASE("greedy feasible policy against the exact value") {
  for (const char* name : kTwoRx) {
    INFO(name);
    const auto spec = oracle::load(name);
    const auto vg = solve_2rx(spec, coarse());
    BoundOptions opt;
    opt.grid = coarse();
    const auto lag = lagrangian_bound(spec, opt);
    const double exact = exact_value(spec, vg, opt);
    const auto policy = greedy_feasible(spec, lag);
    SimOptions so;
    so.episodes = 100000 / static_cast<std::size_t>(spec.horizon()) + 1;
    so.seed = 3;
    const auto res = simulate(policy, spec, so);
    CHECK(res.stats.aborted == 0);
    CHECK(res.stats.mean <= 1.10 * exact);
    CHECK(res.stats.mean >= lag.value - 3.0 * res.stats.std_error);
  }
}

TEST_CASE("greedy actions spend at most the peak power") {
  const auto spec = oracle::load("tight_2rx.json");
  const auto lag = lagrangian_bound(spec, {});
  const auto policy = greedy_feasible(spec, lag);
  std::size_t binding = 0;
  for (int n = 1; n <= spec.horizon(); ++n)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        for (double x1 = 0.0; x1 <= 3.0; x1 += 0.35)
          for (double x2 = 0.0; x2 <= 3.0; x2 += 0.35) {
            const double x[] = {x1, x2};
            const std::size_t s[] = {a, b};
            double z[2];
            policy.act(n, x, s, z);
            const double p = spec.model(0).curves[a].power_of(z[0]) +
                             spec.model(1).curves[b].power_of(z[1]);
            CHECK(p <= spec.peak_power() * (1 + 1e-12));
            CHECK(x1 + z[0] >= 1.0 - 1e-12);
            CHECK(x2 + z[1] >= 1.0 - 1e-12);
            if (p > spec.peak_power() * (1 - 1e-9)) ++binding;
          }
  CHECK(binding > 0);
}

TEST_CASE("dual search") {
  const auto found = search_dual([](double l) { return -(l - 1.5) * (l - 1.5); }, 10.0, 1e-9);
  CHECK(found.lambda == doctest::Approx(1.5).epsilon(1e-6));
  CHECK(std::is_sorted(found.trace.begin(), found.trace.end()));
  try {
    search_dual([](double l) { return l; }, 10.0, 1e-9);
    FAIL("expected DualSearchDiverged");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DualSearchDiverged);
  }
  BoundReport r;
  r.trace = {{0, 0}, {1, 1}, {2, 0}};
  CHECK(trace_concave(r));
  r.trace = {{0, 1}, {1, 0}, {2, 1}};
  CHECK_FALSE(trace_concave(r));
}

TEST_CASE("bad inputs") {
  const auto spec = oracle::load("tight_2rx.json");
  BoundOptions opt;
  opt.x = {0.0};
  CHECK_THROWS_AS(separable_bound(spec, opt), Error);
  CHECK_THROWS_AS(dual_bound(spec, -1.0, {}), Error);
  const auto one = separable_bound(oracle::load("two_state.json"), {});
  CHECK_THROWS_AS(greedy_feasible(spec, one), Error);
}

TEST_CASE("bound csv") {
  const auto spec = oracle::load("tight_2rx.json");
  auto sep = separable_bound(spec, {});
  auto lag = lagrangian_bound(spec, {});
  lag.set_exact(lag.value + 0.25);
  std::ostringstream out;
  write_bound_csv({sep, lag}, out);
  const auto text = out.str();
  CHECK(text.rfind("kind,lambda,value,v1,v2,gap\nseparable,0,", 0) == 0);
  CHECK(text.find("\nlagrangian,") != std::string::npos);
  CHECK(text.find(",0.25\n") != std::string::npos);
}
