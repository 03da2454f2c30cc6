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

// End-to-end acceptance run. One PASS/FAIL line per criterion; exit status is
// the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "underflow/bounds.hpp"
#include "underflow/horizon.hpp"
#include "underflow/sim.hpp"
#include "underflow/threshold.hpp"
#include "underflow/two_rx.hpp"

using namespace underflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1. The four-state two-receiver benchmark at step 0.02.
Outcome benchmark() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = oracle::load("example2.json");
  GridOptions g;
  g.step = 0.02;
  g.workers = 0;
  auto vg = std::make_shared<const ValueGrid2D>(solve_2rx(spec, g));
  const RegionPolicy policy(vg);
  const std::size_t s = vg->model.joint(1, 2);  // costs (2.000, 2.001)
  const auto b = policy.target(3, s);
  const auto dec = policy.decide(3, s, 0.2, 0.2);
  const double secs = seconds_since(t0);

  const double target = 101.0 / 75.0;
  const bool a = std::abs(b[0] - target) <= 0.02 && std::abs(b[1] - target) <= 0.02;
  const bool y = std::abs(dec.y[0] - 1.4996) <= 0.01 && std::abs(dec.y[1] - 1.0) <= 0.01;
  const bool c = dec.region == Region::IVB && !dec.fallback && dec.y[0] > b[0];
  std::ostringstream d;
  d << "b_3 = (" << b[0] << ", " << b[1] << "), y*(0.2, 0.2) = (" << dec.y[0] << ", "
    << dec.y[1] << "), region " << to_string(dec.region) << ", " << fmt("%.1f s", secs);
  return {a && y && c && secs < 300.0, d.str()};
}

// 2. Threshold policy against the DP on random instances.
Outcome threshold_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2026);
  int instances = 0;
  std::size_t cost_fail = 0, action_fail = 0, compared = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 24; ++trial) {
    const auto spec = validate(oracle::random_threshold_instance(rng, trial % 2 == 1));
    const auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec));
    const BaseStockPolicy thr = BaseStockPolicy::from_spec(spec);
    const BaseStockSimPolicy sim_thr(thr);
    const int N = spec.horizon();
    const double d = spec.receiver(0).demand;
    ++instances;
    for (std::size_t s = 0; s < vg->states(); ++s) {
      const double x0[] = {0.0};
      const std::size_t s0[] = {s};
      const double e = exhaustive_expectation(sim_thr, spec, N, x0, s0, 100000);
      const double v = vg->value(N, s, 0);
      const double rel = std::abs(e - v) / std::max(1.0, std::abs(v));
      worst = std::max(worst, rel);
      if (rel > 1e-8) ++cost_fail;
    }
    for (int n = 1; n <= N; ++n)
      for (std::size_t s = 0; s < vg->states(); ++s)
        for (int j = 0; j * d <= vg->model.grid.x_max() + 1e-12 && j <= N; ++j) {
          const double x = j * d;
          ++compared;
          if (std::abs(thr.action(n, x, s).z - vg->decide(n, s, x).z) > 1e-8) ++action_fail;
        }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << instances << " instances, worst relative cost gap " << worst << ", " << action_fail
    << "/" << compared << " actions differ, " << fmt("%.1f s", secs);
  return {instances >= 20 && cost_fail == 0 && action_fail == 0 && secs < 60.0, d.str()};
}

// 3. Structural properties on bundled and random fixtures.
Outcome structural_suite() {
  std::size_t checked = 0, violations = 0;
  std::string first;
  auto add = [&](const std::string& where, const CheckReport& r) {
    checked += r.checked;
    violations += r.failures;
    if (!r.ok() && first.empty()) first = where;
  };
  auto one_rx = [&](const ValidatedSpec& spec, const std::string& name) {
    const auto vg = solve_1rx(spec);
    add(name + " convexity", check_convexity(vg));
    add(name + " monotone in n", check_monotone_in_n(vg));
    const auto issues = check_criticals(criticals_from_values(vg), spec);
    ++checked;
    violations += issues.size();
    if (!issues.empty() && first.empty()) first = name + " " + issues.front();
  };
  auto two_rx = [&](const ValidatedSpec& spec, const std::string& name, double step) {
    GridOptions g;
    g.step = step;
    const auto vg = solve_2rx(spec, g);
    add(name + " convexity", check_convexity(vg));
    add(name + " supermodularity", check_supermodularity(vg));
    add(name + " monotone in n", check_monotone_in_n(vg));
  };

  int fixtures = 0;
  for (const char* name : {"two_state.json", "three_state_iid.json", "pwl_two_state.json"}) {
    one_rx(oracle::load(name), name);
    ++fixtures;
  }
  for (const char* name : {"tight_2rx.json", "markov_2rx.json", "symmetric_2rx.json",
                           "decoupled_2rx.json", "example2.json"}) {
    const auto spec = oracle::load(name);
    two_rx(spec, name, 0.1);
    for (std::size_t m = 0; m < 2; ++m) one_rx(spec.single(m), std::string(name) + " rx");
    ++fixtures;
  }
  std::mt19937_64 rng(7);
  int random = 0;
  for (int trial = 0; trial < 20; ++trial, ++random)
    one_rx(validate(oracle::random_threshold_instance(rng, trial % 2 == 1)),
           "random threshold " + std::to_string(trial));
  for (int trial = 0; trial < 10; ++trial, ++random) {
    const auto spec = validate(oracle::random_two_rx_instance(rng));
    two_rx(spec, "random 2-rx " + std::to_string(trial), 0.25);
    one_rx(spec.single(0), "random markov " + std::to_string(trial));
  }
  std::ostringstream d;
  d << fixtures << " bundled + " << random << " random fixtures, " << checked
    << " checks, " << violations << " violations";
  if (!first.empty()) d << " (first: " << first << ")";
  return {violations == 0, d.str()};
}

// 4. Value iteration on the 2-state instance.
Outcome infinite_horizon() {
  const auto spec = oracle::load("two_state_discounted.json");
  ViOptions opt;
  opt.tol = 1e-8;
  const auto sol = value_iterate(spec, opt);
  const bool conv = sol.status.converged && sol.status.residual < 1e-8;

  std::size_t dom_fail = 0;
  for (int N = 1; N <= 30; ++N) {
    auto p = spec.spec();
    p.horizon = N;
    GridOptions g;
    g.x_max = sol.grid.model.grid.x_max();
    const auto fin = criticals_from_values(solve_1rx(validate(p), g));
    for (std::size_t s = 0; s < sol.b_inf.size(); ++s)
      for (std::size_t k = 0; k < sol.b_inf[s].size(); ++k)
        if (sol.b_inf[s][k] < fin.at(N, s, k) - 1e-12) ++dom_fail;
  }

  const auto pe = evaluate_stationary(sol.grid);
  double pe_gap = 0.0;
  for (std::size_t s = 0; s < sol.grid.states(); ++s)
    for (std::size_t i = 0; i < sol.grid.nodes(); ++i)
      pe_gap = std::max(pe_gap, std::abs(pe[s * sol.grid.nodes() + i] - sol.value(s, i)));

  std::ostringstream d;
  d << "residual " << sol.status.residual << " after " << sol.status.iterations
    << " sweeps, b_inf = (" << sol.b_inf[0][0] << ", " << sol.b_inf[1][0] << "), "
    << dom_fail << " b_N above b_inf for N = 1..30, policy evaluation gap " << pe_gap;
  return {conv && dom_fail == 0 && pe_gap <= 1e-7, d.str()};
}

// 5. Average cost.
Outcome average_cost() {
  const auto single = estimate_rho(oracle::load("single_state.json"));
  const double cd = 1.5 * 1.0;
  const bool a = std::abs(single.rho_star - cd) <= 1e-6;
  const auto two = estimate_rho(oracle::load("two_state_discounted.json"));
  const double rel = std::abs(two.rho_star - two.simulated_average) / two.simulated_average;
  std::ostringstream d;
  d << "single state rho* " << single.rho_star << " (c d = " << cd << "), two state rho* "
    << two.rho_star << " vs simulated " << two.simulated_average << " ("
    << fmt("%.2f%%", 100.0 * rel) << ")";
  return {a && std::isfinite(rel) && rel <= 0.02, d.str()};
}

// 6. Bounds sandwich and the greedy feasible policy.
Outcome bounds_sandwich() {
  int instances = 0;
  std::size_t above = 0, far = 0, aborted = 0;
  double worst_ratio = 0.0;
  for (const char* name : {"tight_2rx.json", "markov_2rx.json", "symmetric_2rx.json",
                           "decoupled_2rx.json", "example2.json"}) {
    const auto spec = oracle::load(name);
    GridOptions g;
    g.step = 0.1;
    const auto vg = solve_2rx(spec, g);
    BoundOptions opt;
    opt.grid = g;
    for (std::size_t a = 0; a < spec.model(0).curves.size(); ++a)
      for (std::size_t b = 0; b < spec.model(1).curves.size(); ++b) {
        opt.s = {a, b};
        const double exact = exact_value(spec, vg, opt);
        if (separable_bound(spec, opt).value > exact + 1e-8) ++above;
        if (lagrangian_bound(spec, opt).value > exact + 1e-8) ++above;
      }
    opt.s.clear();
    const double exact = exact_value(spec, vg, opt);
    const auto policy = greedy_feasible(spec, lagrangian_bound(spec, opt));
    SimOptions so;
    so.episodes = 100000 / static_cast<std::size_t>(spec.horizon()) + 1;
    so.seed = 3;
    const auto res = simulate(policy, spec, so);
    aborted += res.stats.aborted;
    const double ratio = res.stats.mean / exact;
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio > 1.10) ++far;
    ++instances;
  }
  std::ostringstream d;
  d << instances << " instances, " << above << " bounds above the exact value, greedy/exact up to "
    << worst_ratio << ", " << aborted << " infeasible episodes over >= 1e5 slots each";
  return {instances >= 5 && above == 0 && far == 0 && aborted == 0, d.str()};
}

// 7. Simulator exactness.
Outcome simulator() {
  std::size_t exact_fail = 0, mc_fail = 0, compared = 0;
  double worst = 0.0, worst_z = 0.0;
  for (const char* name : {"three_state_iid.json", "two_state.json", "pwl_two_state.json"}) {
    const auto spec = oracle::load(name);
    const auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec));
    const GridPolicy1D policy(vg);
    const int N = spec.horizon();
    for (std::size_t s = 0; s < vg->states(); ++s) {
      const double x0[] = {0.0};
      const std::size_t s0[] = {s};
      const double v = vg->value(N, s, 0);
      const double e = exhaustive_expectation(policy, spec, N, x0, s0);
      worst = std::max(worst, std::abs(e - v));
      if (std::abs(e - v) > 1e-10) ++exact_fail;
      SimOptions opt;
      opt.episodes = 20000;
      opt.s0 = {s};
      opt.seed = 100 + s;
      const auto res = simulate(policy, spec, opt);
      const double z = std::abs(res.stats.mean - v) / res.stats.std_error;
      worst_z = std::max(worst_z, z);
      if (!(z <= 3.0) || res.stats.aborted > 0) ++mc_fail;
      ++compared;
    }
  }
  std::ostringstream d;
  d << compared << " start states, largest exhaustive gap " << worst
    << ", largest Monte Carlo deviation " << fmt("%.2f", worst_z) << " SE";
  return {exact_fail == 0 && mc_fail == 0, d.str()};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"four-state benchmark", benchmark},
      {"threshold and DP equivalence", threshold_equivalence},
      {"structural suite", structural_suite},
      {"infinite-horizon consistency", infinite_horizon},
      {"average-cost sanity", average_cost},
      {"bounds sandwich", bounds_sandwich},
      {"simulator exactness", simulator},
  };
  int failures = 0, k = 0;
  for (const auto& [name, check] : criteria) {
    ++k;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k << "] " << name << ": " << o.detail
              << std::endl;
  }
  return failures;
}
