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

#include "underflow/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <new>
#include <sstream>

#include "CLI11.hpp"
#include "underflow/bounds.hpp"
#include "underflow/dp.hpp"
#include "underflow/errors.hpp"
#include "underflow/horizon.hpp"
#include "underflow/sim.hpp"
#include "underflow/spec_io.hpp"
#include "underflow/threshold.hpp"
#include "underflow/two_rx.hpp"
#include "underflow/util.hpp"

#ifndef UNDERFLOW_VERSION
#define UNDERFLOW_VERSION "0.0.0"
#endif

namespace underflow::cli {

namespace fs = std::filesystem;

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"solve-finite", "thresholds", "two-rx",
                                              "infinite",     "average-cost", "bounds",
                                              "simulate",     "verify-all"};
  return names;
}

namespace {

/// Collects artifacts of one run; everything is written at the end.
class Run {
 public:
  Run(const ExperimentConfig& cfg, const ValidatedSpec& spec, std::ostream& log)
      : cfg(cfg), spec(spec), log(log), hash(spec_hash(spec.spec())) {
    grid.step = cfg.grid_step;
    grid.workers = cfg.workers;
  }

  /// Main table when `suffix` is empty, else <command>-<hash>-<suffix>.csv.
  std::ostream& table(const std::string& suffix = "") {
    auto& slot = tables_[suffix];
    if (!slot) slot = std::make_unique<std::ostringstream>();
    return *slot;
  }

  void note(const std::string& key, Json value) { notes_[key] = std::move(value); }

  std::string stem() const { return cfg.command + "-" + hash; }

  std::vector<std::string> flush() const {
    fs::create_directories(cfg.out_dir);
    std::vector<std::string> written;
    for (const auto& [suffix, text] : tables_) {
      const auto name = stem() + (suffix.empty() ? "" : "-" + suffix) + ".csv";
      std::ofstream f(fs::path(cfg.out_dir) / name, std::ios::binary);
      f << text->str();
      if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + name);
      written.push_back(name);
      log << "wrote " << (fs::path(cfg.out_dir) / name).string() << "\n";
    }
    return written;
  }

  const Json& notes() const { return notes_; }

  const ExperimentConfig& cfg;
  const ValidatedSpec& spec;
  std::ostream& log;
  std::string hash;
  GridOptions grid;

 private:
  std::map<std::string, std::unique_ptr<std::ostringstream>> tables_;
  Json notes_ = Json::object();
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

bool all_linear(const ValidatedSpec& spec) {
  for (std::size_t m = 0; m < spec.receiver_count(); ++m)
    for (const auto& c : spec.model(m).curves)
      if (c.segments() != 1) return false;
  return true;
}

void need_receivers(const ValidatedSpec& spec, std::size_t lo, std::size_t hi) {
  const auto M = spec.receiver_count();
  if (M < lo || M > hi)
    throw Error(ErrorCode::ConfigError, "command needs " + std::to_string(lo) + ".." +
                                            std::to_string(hi) + " receivers, spec has " +
                                            std::to_string(M));
}

/// Slots after which alpha^T drops below 1e-8 of the first slot's weight.
int effective_slots(double alpha) {
  return static_cast<int>(std::ceil(std::log(1e-8) / std::log(alpha)));
}

ViOptions vi_options(const Run& r) {
  ViOptions opt;
  opt.grid = r.grid;
  opt.keep_trace = true;
  // Two-receiver sweeps cost about 100x more per node; without an explicit
  // step use a coarser plane (step d/4, up to 5 d).
  if (r.spec.receiver_count() == 2 && r.grid.step == 0.0) {
    const double d = std::min(r.spec.receiver(0).demand, r.spec.receiver(1).demand);
    opt.grid.step = d / 4.0;
    opt.grid.x_max = 5.0 * std::max(r.spec.receiver(0).demand, r.spec.receiver(1).demand);
  }
  return opt;
}

// ---------------------------------------------------------------------------

int cmd_solve_finite(Run& r) {
  need_receivers(r.spec, 1, 2);
  if (r.spec.receiver_count() == 1) {
    const auto vg = solve_1rx(r.spec, r.grid);
    write_values_csv(vg, r.table());
    write_criticals_csv(criticals_from_values(vg), r.table("criticals"));
    r.note("value_at_start", vg.value_at(vg.horizon, 0, r.spec.receiver(0).initial_x));
  } else {
    write_values_csv(solve_2rx(r.spec, r.grid), r.table());
  }
  return kOk;
}

int cmd_thresholds(Run& r) {
  need_receivers(r.spec, 1, 1);
  const auto table = compute_gamma(r.spec);
  const auto crit = criticals_from_gamma(table, r.spec);
  write_criticals_csv(crit, r.table());
  write_gamma_csv(table, r.table("gamma"));
  const auto issues = check_criticals(crit, r.spec);
  for (const auto& i : issues) r.log << "violation: " << i << "\n";
  return issues.empty() ? kOk : kViolation;
}

/// Buffers k d / 10 up to `hi`.
std::vector<double> lattice(double d, double hi) {
  std::vector<double> xs;
  for (int k = 0; k * d / 10.0 <= hi + 1e-12; ++k) xs.push_back(k * d / 10.0);
  return xs;
}

int cmd_two_rx(Run& r) {
  need_receivers(r.spec, 2, 2);
  std::shared_ptr<const ValueGrid2D> vg;
  if (r.spec.finite()) {
    vg = std::make_shared<const ValueGrid2D>(solve_2rx(r.spec, r.grid));
  } else {
    auto sol = value_iterate_2rx(r.spec, vi_options(r));
    sol.status.require_converged();
    vg = std::make_shared<const ValueGrid2D>(std::move(sol.grid));
  }
  const RegionPolicy policy(vg);
  policy.precompute(r.cfg.workers);
  const auto& m = vg->model;
  const int first = r.spec.finite() ? 1 : vg->horizon;
  const double d1 = r.spec.receiver(0).demand, d2 = r.spec.receiver(1).demand;
  const double reach = r.spec.finite() ? r.spec.horizon() : 10.0;
  const auto xs1 = lattice(d1, reach * d1), xs2 = lattice(d2, reach * d2);

  CsvWriter targets(r.table("targets"), {"n", "s1", "s2", "b1", "b2", "grid_b1", "grid_b2"});
  CsvWriter rows(r.table(), {"n", "s1", "s2", "x1", "x2", "region", "y1", "y2"});
  std::size_t fallbacks = 0;
  for (int n = first; n <= vg->horizon; ++n)
    for (std::size_t s = 0; s < vg->joint_states(); ++s) {
      const auto st = m.split(s);
      const auto b = policy.target(n, s);
      const auto gb = policy.grid_target(n, s);
      targets.cell(n).cell(st[0]).cell(st[1]).cell(b[0]).cell(b[1]).cell(gb[0]).cell(gb[1]);
      targets.end_row();
      for (double x1 : xs1)
        for (double x2 : xs2) {
          const auto dec = policy.decide(n, s, x1, x2);
          if (dec.fallback) ++fallbacks;
          rows.cell(n).cell(st[0]).cell(st[1]).cell(x1).cell(x2);
          rows.cell(std::string(to_string(dec.region))).cell(dec.y[0]).cell(dec.y[1]);
          rows.end_row();
        }
    }
  r.note("region_fallbacks", fallbacks);
  if (fallbacks > 0) r.log << "violation: " << fallbacks << " lattice points fell back\n";
  return fallbacks == 0 ? kOk : kViolation;
}

int cmd_infinite(Run& r) {
  need_receivers(r.spec, 1, 2);
  const auto opt = vi_options(r);
  ViStatus status;
  if (r.spec.receiver_count() == 1) {
    auto sol = value_iterate(r.spec, opt);
    write_values_csv(sol.grid, r.table("values"));
    status = std::move(sol.status);
  } else {
    auto sol = value_iterate_2rx(r.spec, opt);
    write_values_csv(sol.grid, r.table("values"));
    status = std::move(sol.status);
  }
  write_trace_csv(status, r.table());
  r.note("iterations", status.iterations);
  r.note("residual", status.residual);
  r.note("converged", status.converged);
  if (!status.converged) {
    r.log << "value iteration stopped at max_iter, residual " << status.residual << "\n";
    return kResource;
  }
  return status.monotone_failures == 0 ? kOk : kViolation;
}

int cmd_average_cost(Run& r) {
  RhoOptions opt;
  opt.vi = vi_options(r);
  opt.vi.keep_trace = false;
  opt.alphas = r.cfg.alpha_ladder;
  opt.sim_slots = r.cfg.sim_slots;
  opt.seed = r.cfg.seed;
  opt.workers = r.cfg.workers;
  const auto est = estimate_rho(r.spec, opt);
  write_rho_csv(est, r.table());
  r.note("rho_star", est.rho_star);
  r.note("fit_residual", est.fit_residual);
  if (std::isfinite(est.simulated_average)) r.note("simulated_average", est.simulated_average);
  return kOk;
}

int cmd_bounds(Run& r) {
  BoundOptions opt;
  opt.grid = r.grid;
  auto sep = separable_bound(r.spec, opt);
  auto lag = lagrangian_bound(r.spec, opt);
  int status = kOk;
  if (r.spec.receiver_count() == 2 && all_linear(r.spec)) {
    const auto vg = solve_2rx(r.spec, r.grid);
    const double exact = exact_value(r.spec, vg, opt);
    sep.set_exact(exact);
    lag.set_exact(exact);
    if (sep.value > exact + 1e-8 || lag.value > exact + 1e-8) {
      r.log << "violation: bound above the exact value\n";
      status = kViolation;
    }
  }
  write_bound_csv({sep, lag}, r.table());
  return status;
}

int cmd_simulate(Run& r) {
  need_receivers(r.spec, 1, 2);
  SimOptions opt;
  opt.episodes = r.cfg.episodes;
  opt.seed = r.cfg.seed;
  opt.workers = r.cfg.workers;
  if (!r.spec.finite()) opt.slots = effective_slots(r.spec.alpha());

  std::vector<std::unique_ptr<Policy>> policies;
  const bool two = r.spec.receiver_count() == 2;
  if (!two) {
    if (r.spec.finite()) {
      policies.push_back(std::make_unique<GridPolicy1D>(
          std::make_shared<const ValueGrid1D>(solve_1rx(r.spec, r.grid))));
      try {
        policies.push_back(
            std::make_unique<BaseStockSimPolicy>(BaseStockPolicy::from_spec(r.spec)));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::PreconditionViolated) throw;
        r.log << "threshold policy skipped: " << e.what() << "\n";
      }
    } else {
      auto sol = value_iterate(r.spec, vi_options(r));
      sol.status.require_converged();
      policies.push_back(std::make_unique<GridPolicy1D>(
          std::make_shared<const ValueGrid1D>(std::move(sol.grid)), true));
    }
  } else if (all_linear(r.spec)) {
    std::shared_ptr<const ValueGrid2D> vg;
    const bool finite = r.spec.finite();
    if (finite) {
      vg = std::make_shared<const ValueGrid2D>(solve_2rx(r.spec, r.grid));
    } else {
      auto sol = value_iterate_2rx(r.spec, vi_options(r));
      sol.status.require_converged();
      vg = std::make_shared<const ValueGrid2D>(std::move(sol.grid));
    }
    policies.push_back(std::make_unique<GridPolicy2D>(vg, !finite));
    if (finite) {
      policies.push_back(std::make_unique<StructuredPolicy>(RegionPolicy(vg)));
      BoundOptions bo;
      bo.grid = r.grid;
      policies.push_back(std::make_unique<GreedyFeasiblePolicy>(
          greedy_feasible(r.spec, lagrangian_bound(r.spec, bo))));
    }
  }
  policies.push_back(std::make_unique<OpportunisticGreedyPolicy>(r.spec));
  policies.push_back(std::make_unique<JustInTimePolicy>(r.spec));

  std::vector<std::pair<std::string, CostStats>> rows;
  std::size_t aborted = 0;
  for (const auto& p : policies) {
    const auto res = simulate(*p, r.spec, opt);
    rows.emplace_back(p->name(), res.stats);
    aborted += res.stats.aborted;
    if (!res.abort_reasons.empty())
      r.log << p->name() << ": " << res.abort_reasons.front() << "\n";
  }
  write_stats_csv(rows, r.table());
  r.note("slots", opt.slots > 0 ? opt.slots : r.spec.horizon());
  return aborted == 0 ? kOk : kViolation;
}

// ---------------------------------------------------------------------------
// verify-all

struct CheckRow {
  std::string check;
  std::string scope;
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // check-specific extreme, see the note column
  std::string status;  // ok | fail | skipped
  std::string note;
};

class Checks {
 public:
  void add(CheckRow row) {
    if (row.status.empty()) row.status = row.failures == 0 ? "ok" : "fail";
    rows_.push_back(std::move(row));
  }
  void add(const std::string& check, const std::string& scope, const CheckReport& rep) {
    CheckRow row{check, scope, rep.checked, rep.failures, rep.worst, "", "most negative difference"};
    if (!rep.violations.empty()) row.note = rep.violations.front().where;
    add(std::move(row));
  }
  void skip(const std::string& check, const std::string& why) {
    add({check, "-", 0, 0, 0.0, "skipped", why});
  }
  std::size_t failures() const {
    std::size_t f = 0;
    for (const auto& r : rows_) f += r.failures;
    return f;
  }
  void write(std::ostream& out) const {
    CsvWriter csv(out, {"check", "scope", "checked", "failures", "worst", "status", "note"});
    for (const auto& r : rows_) {
      csv.cell(r.check).cell(r.scope).cell(r.checked).cell(r.failures).cell(r.worst);
      csv.cell(r.status).cell(r.note);
      csv.end_row();
    }
  }

 private:
  std::vector<CheckRow> rows_;
};

/// Largest |a - b| / max(1, |b|) and how many pairs exceed tol.
struct Agreement {
  std::size_t checked = 0, failures = 0;
  double worst = 0.0;
  void add(double a, double b, double tol) {
    const double e = std::abs(a - b) / std::max(1.0, std::abs(b));
    ++checked;
    worst = std::max(worst, e);
    if (e > tol) ++failures;
  }
  CheckRow row(const std::string& check, const std::string& scope,
               const std::string& note) const {
    return {check, scope, checked, failures, worst, "", note};
  }
};

void verify_1rx_finite(Run& r, Checks& checks) {
  const auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(r.spec, r.grid));
  checks.add("dp.convexity", "V_n", check_convexity(*vg));
  checks.add("dp.monotone_in_n", "V_n", check_monotone_in_n(*vg));
  const auto crit = criticals_from_values(*vg);
  const auto issues = check_criticals(crit, r.spec);
  checks.add({"dp.critical_shape", "b_n(s)", crit.b.size(), issues.size(), 0.0, "",
              issues.empty() ? "bounds, order in n, k and channel" : issues.front()});

  try {
    const auto closed = criticals_from_gamma(compute_gamma(r.spec), r.spec);
    const auto closed_issues = check_criticals(closed, r.spec);
    checks.add({"threshold.critical_shape", "b_n(s)", closed.b.size(), closed_issues.size(),
                0.0, "", closed_issues.empty() ? "" : closed_issues.front()});
    Agreement agree;
    for (int n = 1; n <= closed.horizon; ++n)
      for (std::size_t s = 0; s < closed.b[0].size(); ++s)
        for (std::size_t k = 0; k < closed.b[0][s].size(); ++k)
          agree.add(crit.at(n, s, k), closed.at(n, s, k), 1e-9);
    checks.add(agree.row("threshold.matches_dp", "b_n(s)", "largest relative difference"));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PreconditionViolated) throw;
    checks.skip("threshold.matches_dp", e.what());
  }

  const int N = vg->horizon;
  const double paths = std::pow(static_cast<double>(vg->states()), N - 1);
  if (paths <= 1e4) {
    const GridPolicy1D policy(vg);
    Agreement agree;
    const double x0[] = {r.spec.receiver(0).initial_x};
    for (std::size_t s = 0; s < vg->states(); ++s) {
      const std::size_t s0[] = {s};
      agree.add(exhaustive_expectation(policy, r.spec, N, x0, s0),
                vg->value_at(N, s, x0[0]), 1e-10);
    }
    checks.add(agree.row("sim.exhaustive_equals_dp", "V_N(x0, s)", "largest relative difference"));
  } else {
    checks.skip("sim.exhaustive_equals_dp", "more than 1e4 channel paths");
  }
}

void verify_2rx_finite(Run& r, Checks& checks) {
  const auto vg = std::make_shared<const ValueGrid2D>(solve_2rx(r.spec, r.grid));
  checks.add("dp.convexity", "V_n", check_convexity(*vg));
  checks.add("dp.supermodularity", "V_n, G_n", check_supermodularity(*vg));
  checks.add("dp.monotone_in_n", "V_n", check_monotone_in_n(*vg));
  const RegionPolicy policy(vg);
  policy.precompute(r.cfg.workers);
  CheckRow regions{"two_rx.regions", "(n, s)", 0, 0, 0.0, "", "f1/f2 shape, targets, partition"};
  for (int n = 1; n <= vg->horizon; ++n)
    for (std::size_t s = 0; s < vg->joint_states(); ++s) {
      const auto rep = check_region_policy(policy, n, s, 1e-5);
      regions.checked += rep.checked;
      regions.failures += rep.failures.size();
      if (!rep.ok() && regions.failures == rep.failures.size()) regions.note = rep.failures.front();
    }
  checks.add(std::move(regions));

  const int N = vg->horizon;
  if (std::pow(static_cast<double>(vg->joint_states()), N - 1) <= 1e4) {
    const GridPolicy2D dp(vg);
    const double x0[] = {r.spec.receiver(0).initial_x, r.spec.receiver(1).initial_x};
    Agreement agree;
    const auto& m = vg->model;
    for (std::size_t s = 0; s < vg->joint_states(); ++s) {
      const auto st = m.split(s);
      const std::size_t s0[] = {st[0], st[1]};
      agree.add(exhaustive_expectation(dp, r.spec, N, x0, s0), vg->value_at(N, s, x0[0], x0[1]),
                1e-10);
    }
    checks.add(agree.row("sim.exhaustive_equals_dp", "V_N(x0, s)", "largest relative difference"));
  } else {
    checks.skip("sim.exhaustive_equals_dp", "more than 1e4 channel paths");
  }
}

void verify_discounted(Run& r, Checks& checks) {
  auto p = r.spec.spec();
  p.horizon.reset();
  const auto inf = validate(p);
  const auto opt = vi_options(r);
  if (inf.receiver_count() == 1) {
    const auto sol = value_iterate(inf, opt);
    checks.add({"horizon.converged", "V_inf", 1, sol.status.converged ? 0u : 1u,
                sol.status.residual, "", "final residual"});
    checks.add({"horizon.monotone_iterates", "V_k", static_cast<std::size_t>(sol.status.iterations),
                sol.status.monotone_failures, sol.status.monotone_worst, "",
                "most negative V_{k+1} - V_k"});
    checks.add("horizon.convexity", "V_inf", check_convexity(sol.grid));

    const auto pe = evaluate_stationary(sol.grid);
    Agreement agree;
    for (std::size_t s = 0; s < sol.grid.states(); ++s)
      for (std::size_t i = 0; i < sol.grid.nodes(); ++i)
        agree.add(pe[s * sol.grid.nodes() + i], sol.value(s, i), 1e-7);
    checks.add(agree.row("horizon.policy_evaluation", "V_inf", "largest relative difference"));

    CheckRow dom{"horizon.b_inf_dominates", "N = 5, 10, 20", 0, 0, 0.0, "",
                 "smallest b_inf - b_N"};
    dom.worst = std::numeric_limits<double>::infinity();
    for (int N : {5, 10, 20}) {
      auto q = p;
      q.horizon = N;
      GridOptions g = r.grid;
      g.x_max = sol.grid.model.grid.x_max();
      const auto fin = criticals_from_values(solve_1rx(validate(q), g));
      for (std::size_t s = 0; s < sol.b_inf.size(); ++s)
        for (std::size_t k = 0; k < sol.b_inf[s].size(); ++k) {
          const double gap = sol.b_inf[s][k] - fin.at(N, s, k);
          ++dom.checked;
          dom.worst = std::min(dom.worst, gap);
          if (gap < -1e-12) ++dom.failures;
        }
    }
    checks.add(std::move(dom));
  } else {
    const auto sol = value_iterate_2rx(inf, opt);
    checks.add({"horizon.converged", "V_inf", 1, sol.status.converged ? 0u : 1u,
                sol.status.residual, "", "final residual"});
    checks.add({"horizon.monotone_iterates", "V_k", static_cast<std::size_t>(sol.status.iterations),
                sol.status.monotone_failures, sol.status.monotone_worst, "",
                "most negative V_{k+1} - V_k"});
    checks.add("horizon.convexity", "V_inf", check_convexity(sol.grid));
    checks.add("horizon.supermodularity", "V_inf", check_supermodularity(sol.grid));
  }
}

int cmd_verify_all(Run& r) {
  need_receivers(r.spec, 1, 2);
  Checks checks;
  const bool two = r.spec.receiver_count() == 2;
  if (r.spec.finite()) {
    if (two)
      verify_2rx_finite(r, checks);
    else
      verify_1rx_finite(r, checks);
  } else {
    checks.skip("dp", "no finite horizon");
  }
  if (two && !all_linear(r.spec)) {
    checks.skip("horizon", "two receivers need linear curves");
  } else if (r.spec.alpha() < 1.0) {
    verify_discounted(r, checks);
  } else {
    checks.skip("horizon", "undiscounted spec");
  }
  checks.write(r.table());
  r.note("violations", checks.failures());
  if (checks.failures() > 0) r.log << "violation: " << checks.failures() << " failed checks\n";
  return checks.failures() == 0 ? kOk : kViolation;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::MemoryBudgetExceeded:
    case ErrorCode::MaxIterExceeded:
      return kResource;
    case ErrorCode::PolicyInfeasibleAction:
    case ErrorCode::DualSearchDiverged:
    case ErrorCode::OutOfRange:
      return kViolation;
    default:
      return kConfig;
  }
}

}  // namespace

int run(const ExperimentConfig& cfg, std::ostream& log) {
  static const std::map<std::string, std::function<int(Run&)>> table{
      {"solve-finite", cmd_solve_finite}, {"thresholds", cmd_thresholds},
      {"two-rx", cmd_two_rx},             {"infinite", cmd_infinite},
      {"average-cost", cmd_average_cost}, {"bounds", cmd_bounds},
      {"simulate", cmd_simulate},         {"verify-all", cmd_verify_all}};
  try {
    const auto it = table.find(cfg.command);
    if (it == table.end()) throw Error(ErrorCode::ConfigError, "unknown command " + cfg.command);
    if (cfg.grid_step < 0.0) throw Error(ErrorCode::ConfigError, "grid step must be >= 0");
    const auto spec = validate(load_spec(cfg.spec_path));

    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    Run r(cfg, spec, log);
    const int status = it->second(r);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto written = r.flush();

    Json manifest;
    manifest["tool"] = "underflow";
    manifest["version"] = UNDERFLOW_VERSION;
    manifest["compiler"] = __VERSION__;
    manifest["command"] = cfg.command;
    manifest["spec"] = {{"path", cfg.spec_path}, {"hash", r.hash}};
    manifest["grid_step"] = cfg.grid_step;
    manifest["seed"] = cfg.seed;
    manifest["workers"] = cfg.workers;
    manifest["alpha_ladder"] = cfg.alpha_ladder;
    manifest["episodes"] = cfg.episodes;
    manifest["sim_slots"] = cfg.sim_slots;
    manifest["outputs"] = written;
    manifest["results"] = r.notes();
    manifest["exit_code"] = status;
    manifest["started_utc"] = started;
    manifest["elapsed_seconds"] = elapsed;
    const auto path = fs::path(cfg.out_dir) / (r.stem() + ".manifest.json");
    std::ofstream(path) << manifest.dump(2) << "\n";
    log << "wrote " << path.string() << "\n";
    return status;
  } catch (const ValidationError& e) {
    for (const auto& i : e.issues()) log << "error: " << to_string(i.code) << ": " << i.message << "\n";
    return kConfig;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::bad_alloc&) {
    log << "error: out of memory\n";
    return kResource;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kConfig;
  }
}

int main(int argc, char** argv) {
  CLI::App app{"Transmission scheduling experiments"};
  ExperimentConfig cfg;
  app.add_option("--spec", cfg.spec_path, "problem spec (JSON)")
      ->required()
      ->envname("UNDERFLOW_SPEC");
  app.add_option("--cmd", cfg.command, "command to run")
      ->required()
      ->check(CLI::IsMember(commands()))
      ->envname("UNDERFLOW_CMD");
  app.add_option("--grid-step", cfg.grid_step, "buffer grid step (0: demand / 10)")
      ->envname("UNDERFLOW_GRID_STEP");
  app.add_option("--out", cfg.out_dir, "output directory")->envname("UNDERFLOW_OUT");
  app.add_option("--seed", cfg.seed, "simulation seed")->envname("UNDERFLOW_SEED");
  app.add_option("--workers", cfg.workers, "worker threads (0: all cores)")
      ->envname("UNDERFLOW_WORKERS");
  app.add_option("--alpha-ladder", cfg.alpha_ladder, "discount factors for average-cost")
      ->delimiter(',')
      ->envname("UNDERFLOW_ALPHA_LADDER");
  app.add_option("--episodes", cfg.episodes, "simulated episodes")
      ->envname("UNDERFLOW_EPISODES");
  app.add_option("--sim-slots", cfg.sim_slots, "slots of the average-cost simulation")
      ->envname("UNDERFLOW_SIM_SLOTS");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  return run(cfg, std::cerr);
}

}  // namespace underflow::cli
