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

#include "underflow/two_rx.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>

#include "underflow/errors.hpp"
#include "underflow/util.hpp"

namespace underflow {

std::string_view to_string(Region r) noexcept {
  switch (r) {
    case Region::I: return "I";
    case Region::II: return "II";
    case Region::IIIA: return "IIIA";
    case Region::IIIB: return "IIIB";
    case Region::IVA: return "IVA";
    case Region::IVB: return "IVB";
    case Region::IVC: return "IVC";
  }
  return "?";
}

namespace {

// Golden section, then bisection towards lo for the smallest point whose
// value is within vtol of the minimum. f must be convex on [lo, hi].
double smallest_argmin(const std::function<double(double)>& f, double lo, double hi,
                       double tol) {
  if (hi - lo <= tol) return lo;
  const double x = golden_section(f, lo, hi, tol);
  const double fx = f(x);
  const double thr = fx + 1e-12 * (1.0 + std::abs(fx));
  if (f(lo) <= thr) return lo;
  double a = lo, b = x;
  while (b - a > tol) {
    const double mid = 0.5 * (a + b);
    if (f(mid) <= thr) b = mid;
    else a = mid;
  }
  return b;
}

}  // namespace

struct RegionPolicy::Cache {
  std::once_flag b_once, f1_once, f2_once;
  std::array<double, 2> b{0.0, 0.0};
  std::vector<double> f1, f2;
};

RegionPolicy::RegionPolicy(std::shared_ptr<const ValueGrid2D> grid, RegionOptions opt)
    : grid_(std::move(grid)), opt_(opt) {
  if (!grid_) throw Error(ErrorCode::ConfigError, "region policy needs a solved grid");
  const auto& m = grid_->model;
  eps_ = opt_.epsilon >= 0.0 ? opt_.epsilon
                             : 0.5 * std::min(m.grid[0].step, m.grid[1].step);
  caches_.resize(static_cast<std::size_t>(grid_->horizon + 1) * m.joint_states());
  for (auto& c : caches_) c = std::make_shared<Cache>();
}

RegionPolicy::Cache& RegionPolicy::cache(int n, std::size_t s) const {
  if (n < 1 || n > grid_->horizon) throw Error(ErrorCode::OutOfRange, "stage outside 1..N");
  if (s >= grid_->joint_states()) throw Error(ErrorCode::OutOfRange, "joint state out of range");
  return *caches_[static_cast<std::size_t>(n) * grid_->joint_states() + s];
}

double RegionPolicy::g(int n, std::size_t s, double y1, double y2) const {
  cache(n, s);  // range check
  const auto& m = grid_->model;
  const auto st = m.split(s);
  const double u1 = y1 - m.demand[0], u2 = y2 - m.demand[1];
  double acc = 0.0;
  if (n > 1)
    for (std::size_t t = 0; t < m.joint_states(); ++t) {
      const double p = m.joint_prob(s, t);
      if (p > 0.0) acc += p * grid_->value_at(n - 1, t, u1, u2);
    }
  return m.slope[0][st[0]] * y1 + m.slope[1][st[1]] * y2 + m.holding[0](u1) +
         m.holding[1](u2) + m.alpha * acc;
}

std::array<double, 2> RegionPolicy::grid_target(int n, std::size_t s) const {
  cache(n, s);
  const auto g = grid_->g_table(n, s);
  const auto& m = grid_->model;
  const double lowest = *std::min_element(g.begin(), g.end());
  const double thr = lowest + 1e-12 * (1.0 + std::abs(lowest));
  const std::size_t I2 = grid_->n2();
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g[k] <= thr)
      return {m.demand[0] + m.grid[0].x(k / I2), m.demand[1] + m.grid[1].x(k % I2)};
  return {m.demand[0], m.demand[1]};
}

double RegionPolicy::line_argmin(int n, std::size_t s, int axis, double fixed, double lo,
                                 double hi) const {
  auto f = [&](double v) { return axis == 0 ? g(n, s, v, fixed) : g(n, s, fixed, v); };
  return smallest_argmin(f, lo, hi, opt_.search_tol);
}

std::array<double, 2> RegionPolicy::target(int n, std::size_t s) const {
  auto& c = cache(n, s);
  std::call_once(c.b_once, [&] {
    const auto& m = grid_->model;
    const double lo1 = m.demand[0], hi1 = m.y_max(0);
    const double lo2 = m.demand[1], hi2 = m.y_max(1);
    auto inner = [&](double y1) { return line_argmin(n, s, 1, y1, lo2, hi2); };
    auto profile = [&](double y1) { return g(n, s, y1, inner(y1)); };
    const double b1 = smallest_argmin(profile, lo1, hi1, opt_.search_tol);
    c.b = {b1, inner(b1)};
  });
  return c.b;
}

const std::vector<double>& RegionPolicy::f1_samples(int n, std::size_t s) const {
  auto& c = cache(n, s);
  std::call_once(c.f1_once, [&] {
    const auto& m = grid_->model;
    const auto g = grid_->g_table(n, s);
    const std::size_t I1 = grid_->n1(), I2 = grid_->n2();
    c.f1.resize(I2);
    for (std::size_t j = 0; j < I2; ++j) {
      double lowest = g[j];
      for (std::size_t i = 1; i < I1; ++i) lowest = std::min(lowest, g[i * I2 + j]);
      const double thr = lowest + 1e-12 * (1.0 + std::abs(lowest));
      std::size_t k = 0;
      while (g[k * I2 + j] > thr) ++k;
      // The continuous minimizer of a convex row lies within one node of the
      // discrete one.
      const double lo = m.demand[0] + m.grid[0].x(k == 0 ? 0 : k - 1);
      const double hi = m.demand[0] + m.grid[0].x(std::min(k + 1, I1 - 1));
      c.f1[j] = line_argmin(n, s, 0, m.demand[1] + m.grid[1].x(j), lo, hi);
    }
  });
  return c.f1;
}

const std::vector<double>& RegionPolicy::f2_samples(int n, std::size_t s) const {
  auto& c = cache(n, s);
  std::call_once(c.f2_once, [&] {
    const auto& m = grid_->model;
    const auto g = grid_->g_table(n, s);
    const std::size_t I1 = grid_->n1(), I2 = grid_->n2();
    c.f2.resize(I1);
    for (std::size_t i = 0; i < I1; ++i) {
      const double* row = g.data() + i * I2;
      const double lowest = *std::min_element(row, row + I2);
      const double thr = lowest + 1e-12 * (1.0 + std::abs(lowest));
      std::size_t k = 0;
      while (row[k] > thr) ++k;
      const double lo = m.demand[1] + m.grid[1].x(k == 0 ? 0 : k - 1);
      const double hi = m.demand[1] + m.grid[1].x(std::min(k + 1, I2 - 1));
      c.f2[i] = line_argmin(n, s, 1, m.demand[0] + m.grid[0].x(i), lo, hi);
    }
  });
  return c.f2;
}

namespace {

// Position of v on the node axis lo + k * step: node index when v is within
// 1e-9 of a node, otherwise the bracketing pair.
struct AxisPos {
  std::size_t k = 0;
  bool on_node = false;
};

AxisPos locate(double v, double lo, double step, std::size_t count) {
  const double q = (v - lo) / step;
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q)))
    return {static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(count - 1))), true};
  const double f = std::floor(q);
  return {static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(count - 2))), false};
}

}  // namespace

double RegionPolicy::f1(int n, std::size_t s, double x2) const {
  const auto& m = grid_->model;
  const auto& samples = f1_samples(n, s);
  x2 = std::clamp(x2, m.demand[1], m.y_max(1));
  const auto pos = locate(x2, m.demand[1], m.grid[1].step, samples.size());
  if (pos.on_node) return samples[pos.k];
  // f1 is nonincreasing, so it lies between the neighbouring samples; one
  // step of slack on each side absorbs search error.
  const double step = m.grid[0].step;
  const double lo = std::max(m.demand[0], std::min(samples[pos.k], samples[pos.k + 1]) - step);
  const double hi = std::min(m.y_max(0), std::max(samples[pos.k], samples[pos.k + 1]) + step);
  return line_argmin(n, s, 0, x2, lo, hi);
}

double RegionPolicy::f2(int n, std::size_t s, double x1) const {
  const auto& m = grid_->model;
  const auto& samples = f2_samples(n, s);
  x1 = std::clamp(x1, m.demand[0], m.y_max(0));
  const auto pos = locate(x1, m.demand[0], m.grid[0].step, samples.size());
  if (pos.on_node) return samples[pos.k];
  const double step = m.grid[1].step;
  const double lo = std::max(m.demand[1], std::min(samples[pos.k], samples[pos.k + 1]) - step);
  const double hi = std::min(m.y_max(1), std::max(samples[pos.k], samples[pos.k + 1]) + step);
  return line_argmin(n, s, 1, x1, lo, hi);
}

std::array<double, 2> RegionPolicy::full_power_action(int n, std::size_t s, double x1,
                                                      double x2) const {
  const auto& m = grid_->model;
  const auto st = m.split(s);
  const double c1 = m.slope[0][st[0]], c2 = m.slope[1][st[1]];
  const double lo1 = std::max(x1, m.demand[0]), lo2 = std::max(x2, m.demand[1]);
  const double budget = m.peak_power - c1 * (lo1 - x1) - c2 * (lo2 - x2);
  if (budget <= 0.0) return {lo1, lo2};
  // y1 runs over the power-exhausting segment, clipped to the grid box.
  auto y2_of = [&](double y1) { return lo2 + (budget - c1 * (y1 - lo1)) / c2; };
  const double a = std::max(lo1, lo1 + (budget - c2 * (m.y_max(1) - lo2)) / c1);
  const double b = std::min(m.y_max(0), lo1 + budget / c1);
  if (b <= a) return {a, std::min(y2_of(a), m.y_max(1))};
  auto f = [&](double y1) { return g(n, s, y1, y2_of(y1)); };
  const double y1 = smallest_argmin(f, a, b, opt_.search_tol);
  return {y1, y2_of(y1)};
}

RegionDecision RegionPolicy::classify_impl(int n, std::size_t s, double x1, double x2) const {
  if (x1 < 0.0 || x2 < 0.0) throw Error(ErrorCode::OutOfRange, "negative buffer level");
  const auto& m = grid_->model;
  const auto st = m.split(s);
  const double c1 = m.slope[0][st[0]], c2 = m.slope[1][st[1]];
  const double P = m.peak_power;
  const double ptol = 1e-9 * (1.0 + P);
  const double e = eps_;
  const auto b = target(n, s);
  const double d1 = m.demand[0], d2 = m.demand[1];

  std::optional<double> F1, F2;
  auto f1x = [&] {
    if (!F1) F1 = f1(n, s, x2);
    return *F1;
  };
  auto f2x = [&] {
    if (!F2) F2 = f2(n, s, x1);
    return *F2;
  };

  RegionDecision out;
  // Moves to (y1, y2) >= (d v x), trimming y1 or y2 if power would run out.
  auto move = [&](Region r, double y1, double y2, int trim_axis) {
    y1 = std::max({y1, x1, d1});
    y2 = std::max({y2, x2, d2});
    const double over = c1 * (y1 - x1) + c2 * (y2 - x2) - P;
    if (over > 0.0) {
      if (trim_axis == 0) y1 = std::max(std::max(x1, d1), y1 - over / c1);
      else y2 = std::max(std::max(x2, d2), y2 - over / c2);
    }
    out.region = r;
    out.y = {y1, y2};
    return out;
  };
  auto full = [&](Region r) {
    out.region = r;
    out.y = full_power_action(n, s, x1, x2);
    return out;
  };

  const double need = c1 * std::max(b[0] - x1, 0.0) + c2 * std::max(b[1] - x2, 0.0);
  const bool below_b = x1 <= b[0] + e && x2 <= b[1] + e;
  if (below_b && need <= P + ptol) return move(Region::II, b[0], b[1], 0);
  if (x2 >= d2 - e && x1 >= d1 - e && x1 >= f1x() - e && x2 >= f2x() - e)
    return move(Region::I, x1, x2, 0);
  if (x2 > b[1] - e && x1 >= f1x() - P / c1 - e && x1 < f1x() + e)
    return move(Region::IIIA, f1x(), x2, 0);
  if (x1 > b[0] - e && x2 >= f2x() - P / c2 - e && x2 < f2x() + e)
    return move(Region::IIIB, x1, f2x(), 1);
  if (below_b) return full(Region::IVB);
  if (x2 > b[1] - e && x1 < f1x() - P / c1 + e) return full(Region::IVA);
  if (x1 > b[0] - e && x2 < f2x() - P / c2 + e) return full(Region::IVC);

  out.fallback = true;
  if (x2 > b[1]) return move(Region::IIIA, f1x(), x2, 0);
  if (x1 > b[0]) return move(Region::IIIB, x1, f2x(), 1);
  return full(Region::IVB);
}

Region RegionPolicy::classify(int n, std::size_t s, double x1, double x2) const {
  return classify_impl(n, s, x1, x2).region;
}

RegionDecision RegionPolicy::decide(int n, std::size_t s, double x1, double x2) const {
  return classify_impl(n, s, x1, x2);
}

void RegionPolicy::precompute(unsigned workers) const {
  const std::size_t S = grid_->joint_states();
  const std::size_t total = static_cast<std::size_t>(grid_->horizon) * S;
  parallel_for(total, workers, [&](std::size_t k) {
    const int n = 1 + static_cast<int>(k / S);
    const std::size_t s = k % S;
    target(n, s);
    f1_samples(n, s);
    f2_samples(n, s);
  });
}

RegionPolicy build_region_policy(std::shared_ptr<const ValueGrid2D> grid,
                                 const RegionOptions& opt) {
  return RegionPolicy(std::move(grid), opt);
}

RegionCheck check_region_policy(const RegionPolicy& policy, int n, std::size_t s, double tol) {
  RegionCheck out;
  auto fail = [&](const std::string& what) {
    std::ostringstream o;
    o << "n=" << n << " s=" << s << ": " << what;
    out.failures.push_back(o.str());
  };
  for (const auto* f : {&policy.f1_samples(n, s), &policy.f2_samples(n, s)}) {
    for (std::size_t k = 1; k < f->size(); ++k) {
      ++out.checked;
      if ((*f)[k] > (*f)[k - 1] + tol) fail("boundary curve increases at node " + std::to_string(k));
    }
  }
  const auto b = policy.target(n, s);
  ++out.checked;
  if (std::abs(policy.f1(n, s, b[1]) - b[0]) > tol) fail("f1(b2) != b1");
  ++out.checked;
  if (std::abs(policy.f2(n, s, b[0]) - b[1]) > tol) fail("f2(b1) != b2");
  const auto& m = policy.grid().model;
  for (std::size_t i = 0; i < m.grid[0].count; ++i)
    for (std::size_t j = 0; j < m.grid[1].count; ++j) {
      ++out.checked;
      const auto dec = policy.decide(n, s, m.grid[0].x(i), m.grid[1].x(j));
      if (dec.fallback)
        fail("no region at x=(" + format_double(m.grid[0].x(i)) + "," +
             format_double(m.grid[1].x(j)) + ")");
    }
  return out;
}

void write_region_csv(const RegionPolicy& policy, int n, std::size_t s, double step,
                      double x_max, std::ostream& out) {
  CsvWriter csv(out, {"x1", "x2", "region", "y1", "y2"});
  const auto count = static_cast<std::size_t>(std::floor(x_max / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = 0; j < count; ++j) {
      const double x1 = static_cast<double>(i) * step, x2 = static_cast<double>(j) * step;
      const auto dec = policy.decide(n, s, x1, x2);
      csv.cell(x1).cell(x2).cell(std::string(to_string(dec.region))).cell(dec.y[0]).cell(dec.y[1]);
      csv.end_row();
    }
}

}  // namespace underflow
