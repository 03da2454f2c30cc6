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

#include "underflow/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "underflow/util.hpp"

namespace underflow {

std::string_view to_string(BoundKind k) noexcept {
  return k == BoundKind::Separable ? "separable" : "lagrangian";
}

namespace {

std::vector<double> start_buffers(const ValidatedSpec& spec, const BoundOptions& opt) {
  if (!opt.x.empty()) {
    if (opt.x.size() != spec.receiver_count())
      throw Error(ErrorCode::ConfigError, "start buffers do not match the receivers");
    return opt.x;
  }
  std::vector<double> x;
  for (std::size_t m = 0; m < spec.receiver_count(); ++m) x.push_back(spec.receiver(m).initial_x);
  return x;
}

/// V^m_N(x^m, .) weighted by the start law of receiver m.
double start_value(const ValidatedSpec& spec, const ValueGrid1D& vg, std::size_t m, double x,
                   const BoundOptions& opt) {
  const int N = vg.horizon;
  if (!opt.s.empty()) return vg.value_at(N, opt.s.at(m), x);
  const auto& pi = spec.model(m).stationary;
  double v = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) v += pi[s] * vg.value_at(N, s, x);
  return v;
}

double discount_sum(double alpha, int N) {
  double sum = 0.0, w = 1.0;
  for (int t = 0; t < N; ++t, w *= alpha) sum += w;
  return sum;
}

}  // namespace

BoundReport dual_bound(const ValidatedSpec& spec, double lambda, const BoundOptions& opt) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::ConfigError, "multiplier must be >= 0");
  if (!opt.s.empty() && opt.s.size() != spec.receiver_count())
    throw Error(ErrorCode::ConfigError, "start states do not match the receivers");
  const auto x = start_buffers(spec, opt);
  const int N = spec.horizon();
  BoundReport r;
  r.kind = lambda == 0.0 ? BoundKind::Separable : BoundKind::Lagrangian;
  r.lambda = lambda;
  GridOptions g = opt.grid;
  g.power_weight = 1.0 + lambda;
  for (std::size_t m = 0; m < spec.receiver_count(); ++m) {
    auto vg = std::make_shared<const ValueGrid1D>(solve_1rx(spec.single(m), g));
    r.per_receiver.push_back(start_value(spec, *vg, m, x[m], opt));
    r.receivers.push_back(std::move(vg));
  }
  r.offset = lambda * spec.peak_power() * discount_sum(spec.alpha(), N);
  r.value = pairwise_sum(r.per_receiver) - r.offset;
  r.trace.emplace_back(lambda, r.value);
  return r;
}

BoundReport separable_bound(const ValidatedSpec& spec, const BoundOptions& opt) {
  return dual_bound(spec, 0.0, opt);
}

DualSearch search_dual(const std::function<double(double)>& dual, double lambda_max,
                       double tol) {
  DualSearch out;
  out.value = -std::numeric_limits<double>::infinity();
  auto eval = [&](double lambda) {
    const double v = dual(lambda);
    out.trace.emplace_back(lambda, v);
    if (v > out.value) {
      out.value = v;
      out.lambda = lambda;
    }
    return -v;
  };
  golden_section(eval, 0.0, lambda_max, tol);
  std::sort(out.trace.begin(), out.trace.end());
  if (out.lambda >= lambda_max * (1.0 - 1e-3))
    throw Error(ErrorCode::DualSearchDiverged,
                "dual still increasing at lambda_max = " + format_double(lambda_max));
  return out;
}

BoundReport lagrangian_bound(const ValidatedSpec& spec, const BoundOptions& opt) {
  double c_max = 0.0;
  for (std::size_t m = 0; m < spec.receiver_count(); ++m)
    c_max = std::max(c_max, spec.model(m).c_max);
  const double hi = opt.lambda_max > 0.0 ? opt.lambda_max : 10.0 * c_max;
  const auto found = search_dual(
      [&](double lambda) { return dual_bound(spec, lambda, opt).value; }, hi,
      opt.lambda_tol * hi);
  auto best = dual_bound(spec, found.lambda, opt);
  best.kind = BoundKind::Lagrangian;
  best.trace = found.trace;
  return best;
}

bool trace_concave(const BoundReport& report, double tol) {
  const auto& t = report.trace;
  for (std::size_t k = 1; k + 1 < t.size(); ++k) {
    const auto [a, fa] = t[k - 1];
    const auto [b, fb] = t[k];
    const auto [c, fc] = t[k + 1];
    if (c - a <= 0.0) continue;
    const double chord = fa + (fc - fa) * (b - a) / (c - a);
    if (fb < chord - tol * std::max(1.0, std::abs(fb))) return false;
  }
  return true;
}

double exact_value(const ValidatedSpec& spec, const ValueGrid2D& vg, const BoundOptions& opt) {
  const auto x = start_buffers(spec, opt);
  const auto& m = vg.model;
  const int N = vg.horizon;
  if (!opt.s.empty()) return vg.value_at(N, m.joint(opt.s.at(0), opt.s.at(1)), x[0], x[1]);
  const auto& p1 = spec.model(0).stationary;
  const auto& p2 = spec.model(1).stationary;
  double v = 0.0;
  for (std::size_t a = 0; a < p1.size(); ++a)
    for (std::size_t b = 0; b < p2.size(); ++b)
      v += p1[a] * p2[b] * vg.value_at(N, m.joint(a, b), x[0], x[1]);
  return v;
}

// ---------------------------------------------------------------------------

GreedyFeasiblePolicy::GreedyFeasiblePolicy(const ValidatedSpec& spec, const BoundReport& bound)
    : grids_(bound.receivers), peak_(spec.peak_power()) {
  if (grids_.size() != spec.receiver_count())
    throw Error(ErrorCode::ConfigError, "bound does not match the spec's receivers");
}

void GreedyFeasiblePolicy::act(int n, std::span<const double> x,
                               std::span<const std::size_t> s, std::span<double> z) const {
  const std::size_t M = grids_.size();
  std::vector<OneRxModel> local;
  local.reserve(M);
  for (const auto& g : grids_) {
    if (n < 1 || n > g->horizon) throw Error(ErrorCode::OutOfRange, "stage outside 1..N");
    local.push_back(g->model);
  }
  auto power = [&](const std::vector<double>& y) {
    double p = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const auto& c = local[m].curves[s[m]];
      p += c.power_of(std::clamp(y[m] - x[m], 0.0, c.z_max()));
    }
    return p;
  };
  // Best response to a power price mu on top of the true cost.
  auto respond = [&](double mu, std::vector<double>& y) {
    for (std::size_t m = 0; m < M; ++m) {
      local[m].power_weight = 1.0 + mu;
      y[m] = minimize_1d(local[m], grids_[m]->w_row(n, s[m]), s[m], x[m]).y;
    }
    return power(y);
  };

  const double budget = peak_ * (1.0 + 1e-12);
  std::vector<double> y(M), y_hi(M);
  if (respond(0.0, y) <= budget) {
    for (std::size_t m = 0; m < M; ++m) z[m] = std::max(0.0, y[m] - x[m]);
    return;
  }
  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 200 && respond(hi, y) > budget; ++k) hi *= 2.0;
  for (int k = 0; k < 200 && hi - lo > 1e-13 * (1.0 + hi); ++k) {
    const double mid = 0.5 * (lo + hi);
    (respond(mid, y) > budget ? lo : hi) = mid;
  }
  respond(hi, y);
  respond(lo, y_hi);
  if (power(y) > budget) {
    // Price search failed; the smallest feasible buffers are always allowed.
    for (std::size_t m = 0; m < M; ++m)
      y[m] = std::max(x[m], grids_[m]->model.demand);
  } else {
    // Any blend of the two responses is optimal at the critical price; take
    // the one that spends the budget.
    std::vector<double> mix(M);
    double a = 0.0, b = 1.0;
    for (int k = 0; k < 100; ++k) {
      const double t = 0.5 * (a + b);
      for (std::size_t m = 0; m < M; ++m) mix[m] = y[m] + t * (y_hi[m] - y[m]);
      (power(mix) <= budget ? a : b) = t;
    }
    for (std::size_t m = 0; m < M; ++m) y[m] += a * (y_hi[m] - y[m]);
  }
  for (std::size_t m = 0; m < M; ++m) z[m] = std::max(0.0, y[m] - x[m]);
}

GreedyFeasiblePolicy greedy_feasible(const ValidatedSpec& spec, const BoundReport& bound) {
  return GreedyFeasiblePolicy(spec, bound);
}

void write_bound_csv(const std::vector<BoundReport>& reports, std::ostream& out) {
  const std::size_t M = reports.empty() ? 0 : reports.front().per_receiver.size();
  std::vector<std::string> header{"kind", "lambda", "value"};
  for (std::size_t m = 0; m < M; ++m) header.push_back("v" + std::to_string(m + 1));
  header.push_back("gap");
  CsvWriter csv(out, header);
  for (const auto& r : reports) {
    csv.cell(std::string(to_string(r.kind))).cell(r.lambda).cell(r.value);
    for (double v : r.per_receiver) csv.cell(v);
    if (r.exact)
      csv.cell(r.gap);
    else
      csv.cell(std::string());
    csv.end_row();
  }
}

}  // namespace underflow
