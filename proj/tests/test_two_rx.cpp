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

#include <sstream>

#include "oracles.hpp"
#include "underflow/two_rx.hpp"

using namespace underflow;

namespace {

std::shared_ptr<const ValueGrid2D> solved(const char* name, double step) {
  GridOptions opt;
  opt.step = step;
  return std::make_shared<const ValueGrid2D>(solve_2rx(oracle::load(name), opt));
}

}  // namespace

TEST_CASE("four-state benchmark at a coarse grid") {
  const RegionPolicy policy(solved("example2.json", 0.1));
  const auto& m = policy.grid().model;
  const std::size_t s = m.joint(1, 2);  // costs (2.000, 2.001)
  const auto b = policy.target(3, s);
  CHECK(b[0] == doctest::Approx(101.0 / 75.0).epsilon(1e-6));
  CHECK(b[1] == doctest::Approx(101.0 / 75.0).epsilon(1e-6));
  // The table minimizer alone is well off the continuous one.
  const auto gb = policy.grid_target(3, s);
  CHECK(std::abs(gb[0] - b[0]) + std::abs(gb[1] - b[1]) > 0.05);

  const auto dec = policy.decide(3, s, 0.2, 0.2);
  CHECK(dec.region == Region::IVB);
  CHECK_FALSE(dec.fallback);
  CHECK(dec.y[0] == doctest::Approx(1.4996).epsilon(1e-4));
  CHECK(dec.y[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(dec.y[0] > b[0] + policy.epsilon());
  CHECK(2.0 * (dec.y[0] - 0.2) + 2.001 * (dec.y[1] - 0.2) == doctest::Approx(4.2));
}

TEST_CASE("targets and boundaries are consistent on every fixture") {
  for (const char* name :
       {"tight_2rx.json", "markov_2rx.json", "symmetric_2rx.json", "decoupled_2rx.json"}) {
    INFO(name);
    const RegionPolicy policy(solved(name, 0.25));
    for (int n = 1; n <= policy.horizon(); ++n)
      for (std::size_t s = 0; s < policy.grid().joint_states(); ++s) {
        const auto r = check_region_policy(policy, n, s, 1e-5);
        CHECK(r.ok());
        if (!r.ok()) MESSAGE(r.failures.front());
      }
  }
}

TEST_CASE("decoupled receivers have flat boundary curves") {
  const RegionPolicy policy(solved("decoupled_2rx.json", 0.25));
  for (int n = 1; n <= policy.horizon(); ++n)
    for (std::size_t s = 0; s < policy.grid().joint_states(); ++s) {
      const auto& f1 = policy.f1_samples(n, s);
      const auto& f2 = policy.f2_samples(n, s);
      for (double v : f1) CHECK(v == doctest::Approx(f1.front()).epsilon(1e-6));
      for (double v : f2) CHECK(v == doctest::Approx(f2.front()).epsilon(1e-6));
    }
}

TEST_CASE("symmetric receivers have mirrored boundary curves") {
  const RegionPolicy policy(solved("symmetric_2rx.json", 0.25));
  const auto& m = policy.grid().model;
  for (int n = 1; n <= policy.horizon(); ++n)
    for (std::size_t a = 0; a < m.states(0); ++a) {
      const std::size_t s = m.joint(a, a);
      const auto& f1 = policy.f1_samples(n, s);
      const auto& f2 = policy.f2_samples(n, s);
      REQUIRE(f1.size() == f2.size());
      for (std::size_t k = 0; k < f1.size(); ++k)
        CHECK(f1[k] == doctest::Approx(f2[k]).epsilon(1e-6));
      const auto b = policy.target(n, s);
      CHECK(b[0] == doctest::Approx(b[1]).epsilon(1e-6));
    }
}

TEST_CASE("edges of the region definitions") {
  const RegionPolicy policy(solved("tight_2rx.json", 0.25));
  for (std::size_t s = 0; s < policy.grid().joint_states(); ++s) {
    const auto b = policy.target(3, s);
    auto dec = policy.decide(3, s, b[0], b[1]);
    CHECK(dec.region == Region::II);
    CHECK(dec.y[0] == b[0]);
    CHECK(dec.y[1] == b[1]);
    dec = policy.decide(3, s, b[0] + 0.7, b[1] + 0.3);
    CHECK(dec.region == Region::I);
    CHECK(dec.y[0] == b[0] + 0.7);
    CHECK(dec.y[1] == b[1] + 0.3);
  }
  CHECK_THROWS_AS(policy.classify(0, 0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(policy.classify(1, 0, -1.0, 1.0), Error);
}

TEST_CASE("structured actions are feasible and as good as the grid optimum") {
  for (const char* name : {"tight_2rx.json", "markov_2rx.json"}) {
    INFO(name);
    const RegionPolicy policy(solved(name, 0.25));
    const auto& vg = policy.grid();
    const auto& m = vg.model;
    std::size_t full = 0;
    for (int n = 1; n <= vg.horizon; ++n)
      for (std::size_t s = 0; s < vg.joint_states(); ++s) {
        const auto st = m.split(s);
        const double c1 = m.slope[0][st[0]], c2 = m.slope[1][st[1]];
        for (std::size_t i = 0; i < vg.n1(); i += 2)
          for (std::size_t j = 0; j < vg.n2(); j += 2) {
            const double x1 = m.grid[0].x(i), x2 = m.grid[1].x(j);
            const auto dec = policy.decide(n, s, x1, x2);
            CHECK(dec.y[0] >= std::max(x1, m.demand[0]) - 1e-12);
            CHECK(dec.y[1] >= std::max(x2, m.demand[1]) - 1e-12);
            const double power = c1 * (dec.y[0] - x1) + c2 * (dec.y[1] - x2);
            CHECK(power <= m.peak_power + 1e-9);

            const auto grid_best = vg.decide(n, s, x1, x2);
            const double mine = policy.g(n, s, dec.y[0], dec.y[1]);
            const double theirs = policy.g(n, s, grid_best.y[0], grid_best.y[1]);
            CHECK(mine <= theirs + 1e-6 * (1.0 + std::abs(theirs)));
            // Same value up to the envelope's off-node slack.
            CHECK(mine - c1 * x1 - c2 * x2 ==
                  doctest::Approx(vg.value(n, s, i, j)).epsilon(1e-2));
            if (full_power(dec.region)) {
              ++full;
              CHECK(power == doctest::Approx(m.peak_power).epsilon(1e-9));
            }
          }
      }
    CHECK(full > 0);
  }
}

TEST_CASE("region II matches the grid value") {
  const RegionPolicy policy(solved("tight_2rx.json", 0.25));
  const auto& vg = policy.grid();
  const auto& m = vg.model;
  std::size_t seen = 0;
  for (int n = 1; n <= vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.joint_states(); ++s)
      for (std::size_t i = 0; i < vg.n1(); ++i)
        for (std::size_t j = 0; j < vg.n2(); ++j) {
          const double x1 = m.grid[0].x(i), x2 = m.grid[1].x(j);
          if (policy.classify(n, s, x1, x2) != Region::II) continue;
          ++seen;
          const auto st = m.split(s);
          const auto b = policy.target(n, s);
          const double structured =
              policy.g(n, s, b[0], b[1]) - m.slope[0][st[0]] * x1 - m.slope[1][st[1]] * x2;
          CHECK(std::abs(structured - vg.value(n, s, i, j)) <=
                1e-8 * (1.0 + std::abs(vg.value(n, s, i, j))));
        }
  CHECK(seen > 0);
}

TEST_CASE("region csv") {
  const RegionPolicy policy(solved("tight_2rx.json", 0.25));
  std::ostringstream out;
  write_region_csv(policy, 2, 1, 0.5, 2.0, out);
  const auto text = out.str();
  CHECK(text.rfind("x1,x2,region,y1,y2\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 25);
}
