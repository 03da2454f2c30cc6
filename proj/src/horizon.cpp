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

#include "underflow/horizon.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "underflow/sim.hpp"
#include "underflow/util.hpp"

namespace underflow {

namespace {

constexpr int kDefaultSpan = 10;  // default x_max in units of d

void check_discounted(const ValidatedSpec& spec) {
  if (!(spec.alpha() < 1.0))
    throw Error(ErrorCode::PreconditionViolated, "value iteration needs alpha < 1");
}

/// Records one sweep's change from `prev` to `next` in the status.
double sweep_change(std::span<const double> prev, std::span<const double> next, double slack,
                    ViStatus& st) {
  double residual = 0.0;
  for (std::size_t k = 0; k < prev.size(); ++k) {
    const double diff = next[k] - prev[k];
    residual = std::max(residual, std::abs(diff));
    st.monotone_worst = std::min(st.monotone_worst, diff);
    if (diff < -slack * std::max(1.0, std::abs(next[k]))) ++st.monotone_failures;
  }
  return residual;
}

/// Updates the stability counter and trace with this iteration's b.
void track_b(int iter, double residual, const std::vector<double>& b,
             const std::vector<double>& last, double step, const ViOptions& opt,
             ViStatus& st) {
  double drift = last.empty() ? std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t k = 0; k < last.size(); ++k) drift = std::max(drift, std::abs(b[k] - last[k]));
  st.b_stable_for = drift < step ? st.b_stable_for + 1 : 0;
  if (opt.keep_trace) st.trace.push_back({iter, residual, b});
}

}  // namespace

void ViStatus::require_converged() const {
  if (!converged)
    throw Error(ErrorCode::MaxIterExceeded,
                "value iteration stopped after " + std::to_string(iterations) +
                    " iterations with residual " + format_double(residual));
}

InfiniteSolution1D value_iterate(const ValidatedSpec& spec, const ViOptions& opt) {
  check_discounted(spec);
  if (spec.receiver_count() != 1)
    throw Error(ErrorCode::PreconditionViolated, "value_iterate needs exactly one receiver");
  InfiniteSolution1D sol;
  auto& vg = sol.grid;
  vg.model = OneRxModel::from_spec(spec, 0, opt.grid, kDefaultSpan);
  vg.horizon = 1;
  const std::size_t plane = vg.states() * vg.nodes();
  vg.V.assign(2 * plane, 0.0);
  vg.Y.assign(2 * plane, 0.0);
  vg.W.assign(2 * plane, 0.0);
  const std::span<double> prev(vg.V.data(), plane), next(vg.V.data() + plane, plane);

  auto& st = sol.status;
  std::vector<double> last;
  for (int k = 1; k <= opt.max_iter; ++k) {
    bellman_1d(vg.model, prev, next, {vg.Y.data() + plane, plane},
               {vg.W.data() + plane, plane}, opt.grid.workers);
    st.iterations = k;
    st.residual = sweep_change(prev, next, opt.monotone_slack, st);
    sol.b_inf = criticals_from_w(vg.model, {vg.W.data() + plane, plane});
    std::vector<double> flat;
    for (const auto& row : sol.b_inf) flat.insert(flat.end(), row.begin(), row.end());
    track_b(k, st.residual, flat, last, vg.model.grid.step, opt, st);
    last = std::move(flat);
    if (st.residual < opt.tol) {
      st.converged = true;
      break;
    }
    std::copy(next.begin(), next.end(), prev.begin());
  }
  st.b_stable = st.b_stable_for >= opt.stable_window;
  return sol;
}

InfiniteSolution2D value_iterate_2rx(const ValidatedSpec& spec, const ViOptions& opt) {
  check_discounted(spec);
  InfiniteSolution2D sol;
  auto& vg = sol.grid;
  vg.model = TwoRxModel::from_spec(spec, opt.grid, kDefaultSpan);
  vg.horizon = 1;
  const std::size_t S = vg.joint_states();
  const std::size_t plane = S * vg.plane();
  const double bytes = (4.0 * sizeof(double) + 4.0) * 2.0 * static_cast<double>(plane);
  if (bytes > static_cast<double>(opt.grid.memory_cap_bytes))
    throw Error(ErrorCode::MemoryBudgetExceeded,
                "value tables need " + format_double(bytes / 1048576.0) + " MiB");
  vg.V.assign(2 * plane, 0.0);
  vg.G.assign(2 * plane, 0.0);
  vg.Y1.assign(2 * plane, 0.0);
  vg.Y2.assign(2 * plane, 0.0);
  vg.hulls.resize(2 * S);
  const std::span<double> prev(vg.V.data(), plane), next(vg.V.data() + plane, plane);

  auto& st = sol.status;
  std::vector<double> last;
  const double step = std::min(vg.model.grid[0].step, vg.model.grid[1].step);
  for (int k = 1; k <= opt.max_iter; ++k) {
    bellman_2d(vg, 1, opt.grid.workers);
    st.iterations = k;
    st.residual = sweep_change(prev, next, opt.monotone_slack, st);
    sol.b_inf.assign(S, {0.0, 0.0});
    std::vector<double> flat;
    for (std::size_t s = 0; s < S; ++s) {
      const auto g = vg.g_table(1, s);
      const std::size_t best = static_cast<std::size_t>(
          std::min_element(g.begin(), g.end()) - g.begin());
      sol.b_inf[s] = {vg.model.demand[0] + vg.model.grid[0].x(best / vg.n2()),
                      vg.model.demand[1] + vg.model.grid[1].x(best % vg.n2())};
      flat.push_back(sol.b_inf[s][0]);
      flat.push_back(sol.b_inf[s][1]);
    }
    track_b(k, st.residual, flat, last, step, opt, st);
    last = std::move(flat);
    if (st.residual < opt.tol) {
      st.converged = true;
      break;
    }
    std::copy(next.begin(), next.end(), prev.begin());
  }
  st.b_stable = st.b_stable_for >= opt.stable_window;
  return sol;
}

std::vector<double> evaluate_stationary(const ValueGrid1D& vg, double tol, int max_iter) {
  const auto& m = vg.model;
  const std::size_t S = vg.states(), I = vg.nodes();
  const double d = m.demand, step = m.grid.step;
  std::vector<double> stage(S * I), v(S * I, 0.0), w(S * I), next(S * I);
  std::vector<double> u(S * I);  // post-decision buffer y - d per state
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t i = 0; i < I; ++i) {
      const double y = vg.buffer_after(1, s, i);
      const double z = std::clamp(y - m.grid.x(i), 0.0, m.curves[s].z_max());
      stage[s * I + i] = m.power_weight * m.curves[s].power_of(z) + m.holding(y - d);
      u[s * I + i] = y - d;
    }
  for (int k = 0; k < max_iter; ++k) {
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t i = 0; i < I; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < S; ++t) acc += m.transition[s * S + t] * v[t * I + i];
        w[s * I + i] = acc;
      }
    double change = 0.0;
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t i = 0; i < I; ++i) {
        // Linear interpolation of W(., s) at the post-decision buffer.
        const double pos = std::clamp(u[s * I + i] / step, 0.0, static_cast<double>(I - 1));
        const std::size_t lo = std::min(static_cast<std::size_t>(pos), I - 2);
        const double f = pos - static_cast<double>(lo);
        const double cont = (1.0 - f) * w[s * I + lo] + f * w[s * I + lo + 1];
        const std::size_t at = s * I + i;
        next[at] = stage[at] + m.alpha * cont;
        change = std::max(change, std::abs(next[at] - v[at]));
      }
    v.swap(next);
    if (change < tol) return v;
  }
  throw Error(ErrorCode::MaxIterExceeded, "policy evaluation did not settle");
}

AverageCostEstimate estimate_rho(const ValidatedSpec& spec, const RhoOptions& opt) {
  const auto& a = opt.alphas;
  if (a.size() < 3) throw Error(ErrorCode::ConfigError, "need at least three alphas");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!(a[k] > 0.0 && a[k] < 1.0) || (k > 0 && !(a[k] > a[k - 1])))
      throw Error(ErrorCode::ConfigError, "alphas must increase strictly inside (0, 1)");
  const std::size_t M = spec.receiver_count();
  if (M > 2) throw Error(ErrorCode::PreconditionViolated, "at most two receivers");

  const std::size_t A = a.size();
  AverageCostEstimate est;
  est.alphas = a;
  est.m.resize(A);
  est.rho_points.resize(A);
  est.iterations.resize(A);
  est.w_samples.resize(A);
  std::vector<double> probes = opt.probes;
  if (probes.empty()) {
    const double d = spec.receiver(0).demand;
    probes = {0.0, d, 2.0 * d};
  }

  std::vector<ValidatedSpec> specs;
  for (double alpha : a) {
    ProblemSpec p = spec.spec();
    p.alpha = alpha;
    p.horizon.reset();
    specs.push_back(validate(p));
  }
  std::vector<std::shared_ptr<const ValueGrid1D>> g1(A);
  std::vector<std::shared_ptr<const ValueGrid2D>> g2(A);
  ViOptions vi = opt.vi;
  vi.keep_trace = false;
  parallel_for(A, opt.workers, [&](std::size_t k) {
    ViStatus st;
    if (M == 1) {
      auto sol = value_iterate(specs[k], vi);
      st = std::move(sol.status);
      const std::span<const double> v(sol.grid.V.data() + sol.grid.index(1, 0, 0),
                                      sol.grid.states() * sol.grid.nodes());
      est.m[k] = *std::min_element(v.begin(), v.end());
      for (double p : probes)
        for (std::size_t s = 0; s < sol.grid.states(); ++s)
          est.w_samples[k].push_back(sol.value_at(s, p) - est.m[k]);
      g1[k] = std::make_shared<const ValueGrid1D>(std::move(sol.grid));
    } else {
      auto sol = value_iterate_2rx(specs[k], vi);
      st = std::move(sol.status);
      const std::span<const double> v(sol.grid.V.data() + sol.grid.index(1, 0, 0, 0),
                                      sol.grid.joint_states() * sol.grid.plane());
      est.m[k] = *std::min_element(v.begin(), v.end());
      for (double p : probes)
        for (std::size_t s = 0; s < sol.grid.joint_states(); ++s)
          est.w_samples[k].push_back(sol.grid.value_at(1, s, p, p) - est.m[k]);
      g2[k] = std::make_shared<const ValueGrid2D>(std::move(sol.grid));
    }
    st.require_converged();
    est.iterations[k] = st.iterations;
    est.rho_points[k] = (1.0 - a[k]) * est.m[k];
  });

  // Least squares through the last three points.
  double su = 0, sr = 0, suu = 0, sur = 0;
  for (std::size_t k = A - 3; k < A; ++k) {
    const double u = 1.0 - a[k], r = est.rho_points[k];
    su += u;
    sr += r;
    suu += u * u;
    sur += u * r;
  }
  est.slope = (3.0 * sur - su * sr) / (3.0 * suu - su * su);
  est.rho_star = (sr - est.slope * su) / 3.0;
  for (std::size_t k = A - 3; k < A; ++k)
    est.fit_residual = std::max(
        est.fit_residual, std::abs(est.rho_star + est.slope * (1.0 - a[k]) - est.rho_points[k]));

  if (opt.sim_slots > 0) {
    SimOptions so;
    so.episodes = 1;
    so.slots = static_cast<int>(opt.sim_slots);
    so.seed = opt.seed;
    const auto& top = specs.back();
    const auto res = M == 1 ? simulate(GridPolicy1D(g1.back(), true), top, so)
                            : simulate(GridPolicy2D(g2.back(), true), top, so);
    if (res.stats.aborted > 0)
      throw Error(ErrorCode::PolicyInfeasibleAction, res.abort_reasons.front());
    est.simulated_average = res.stats.average;
  }
  return est;
}

void write_trace_csv(const ViStatus& status, std::ostream& out) {
  std::vector<std::string> header{"iter", "residual"};
  const std::size_t B = status.trace.empty() ? 0 : status.trace.front().b.size();
  for (std::size_t k = 0; k < B; ++k) header.push_back("b" + std::to_string(k + 1));
  CsvWriter csv(out, header);
  for (const auto& t : status.trace) {
    csv.cell(t.iter).cell(t.residual);
    for (double b : t.b) csv.cell(b);
    csv.end_row();
  }
}

void write_rho_csv(const AverageCostEstimate& est, std::ostream& out) {
  CsvWriter csv(out, {"alpha", "m", "rho_point"});
  for (std::size_t k = 0; k < est.alphas.size(); ++k) {
    csv.cell(est.alphas[k]).cell(est.m[k]).cell(est.rho_points[k]);
    csv.end_row();
  }
  csv.cell(1.0).cell(std::string()).cell(est.rho_star);
  csv.end_row();
}

}  // namespace underflow
