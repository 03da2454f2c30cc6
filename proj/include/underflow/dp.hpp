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

// Backward induction on a discretized buffer grid, one or two receivers.
//
// Values live on grid nodes x = i * step. Between nodes the continuation value
// is replaced by the convex envelope of the node values and each stage
// minimizes it exactly over the continuous action set. In 1-D the envelope is
// the linear interpolant and every kink (grid node, curve breakpoint, bound)
// is a candidate. In 2-D it is the lower convex hull of the G table and the
// minimization is a small linear program over node weights, priced row by
// row. Either way V_n is a convex function of x, not just approximately.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "underflow/model.hpp"
#include "underflow/threshold.hpp"

namespace underflow {

struct Grid1D {
  double step = 0.1;
  std::size_t count = 0;  // nodes 0..count-1

  /// GridMisaligned unless `step` divides `demand` (relative 1e-9).
  /// x_max is rounded up to a whole number of steps.
  static Grid1D make(double step, double demand, double x_max);

  double x(std::size_t i) const noexcept { return static_cast<double>(i) * step; }
  double x_max() const noexcept { return x(count - 1); }
};

struct GridOptions {
  double step = 0.0;   // 0 -> demand / 10
  double x_max = 0.0;  // 0 -> horizon * demand + step
  unsigned workers = 0;
  /// Stage power cost is multiplied by this (1 + lambda in relaxations).
  double power_weight = 1.0;
  std::size_t memory_cap_bytes = std::size_t{2} << 30;
};

/// Everything one stage of the single-receiver recursion needs.
struct OneRxModel {
  Grid1D grid;
  std::vector<EffectiveCurve> curves;
  std::vector<double> transition;  // row-major |S| x |S|
  HoldingCost holding;
  double demand = 1.0;
  double alpha = 1.0;
  double power_weight = 1.0;

  std::size_t states() const noexcept { return curves.size(); }
  /// Receiver m of a validated spec; `horizon` sizes the default grid.
  static OneRxModel from_spec(const ValidatedSpec& spec, std::size_t m,
                              const GridOptions& opt, int horizon);
};

struct Decision1D {
  double y = 0.0;      // buffer after sending
  double z = 0.0;      // packets sent
  double value = 0.0;  // stage cost + discounted continuation
};

/// Minimizes w c(y - x, s) + h(y - d) + alpha W(y - d) over the feasible y,
/// where W is given on the grid and interpolated linearly. Ties go to the
/// smallest y.
Decision1D minimize_1d(const OneRxModel& m, std::span<const double> w_row,
                       std::size_t s, double x);

/// One Bellman sweep: next[s][i] from prev[s][i]. Also fills the argmin and
/// the expected continuation table used for the sweep.
void bellman_1d(const OneRxModel& m, std::span<const double> prev,
                std::span<double> next, std::span<double> y_out,
                std::span<double> w_out, unsigned workers);

class ValueGrid1D {
 public:
  OneRxModel model;
  int horizon = 0;
  /// Index ((n * S) + s) * I + i for n = 0..N. V[0] is zero; Y and W are
  /// meaningful for n >= 1.
  std::vector<double> V, Y, W;

  std::size_t states() const noexcept { return model.states(); }
  std::size_t nodes() const noexcept { return model.grid.count; }
  std::size_t index(int n, std::size_t s, std::size_t i) const {
    return (static_cast<std::size_t>(n) * states() + s) * nodes() + i;
  }
  double value(int n, std::size_t s, std::size_t i) const { return V[index(n, s, i)]; }
  double buffer_after(int n, std::size_t s, std::size_t i) const { return Y[index(n, s, i)]; }
  double packets(int n, std::size_t s, std::size_t i) const {
    return Y[index(n, s, i)] - model.grid.x(i);
  }
  std::span<const double> w_row(int n, std::size_t s) const {
    return {W.data() + index(n, s, 0), nodes()};
  }
  /// Linear interpolation of V_n(., s); x is clamped to the grid.
  double value_at(int n, std::size_t s, double x) const;
  /// Optimal decision at an arbitrary buffer level with n slots left.
  Decision1D decide(int n, std::size_t s, double x) const;
};

ValueGrid1D solve_1rx(const OneRxModel& model, int horizon,
                      std::size_t memory_cap_bytes = std::size_t{2} << 30);
/// Receiver 0 of a one-receiver spec. Throws PreconditionViolated otherwise.
ValueGrid1D solve_1rx(const ValidatedSpec& spec, const GridOptions& opt = {});

/// b_{n,k}(s): smallest minimizer over y >= d of c_k(s) y + h(y - d) +
/// alpha W_n(y - d, s), read off the solved grid.
CriticalNumbers criticals_from_values(const ValueGrid1D& vg);
/// Same for one stage, from its continuation plane W[s][i].
std::vector<std::vector<double>> criticals_from_w(const OneRxModel& m,
                                                  std::span<const double> w);

struct Violation {
  std::string where;
  double amount = 0.0;  // how far below the allowed slack
};

struct CheckReport {
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::vector<Violation> violations;  // first few failures, for messages
  double worst = 0.0;                 // most negative tested quantity

  bool ok() const noexcept { return failures == 0; }
  void add(const std::string& where, double value, double slack);
  void merge(const CheckReport& other);
};

/// Second differences V[i-1] - 2V[i] + V[i+1] >= -eps for every (n, s).
/// eps = rel_eps * max(1, max |V|).
CheckReport check_convexity(const ValueGrid1D& vg, double rel_eps = 1e-9);
/// V_n <= V_{n+1} pointwise.
CheckReport check_monotone_in_n(const ValueGrid1D& vg, double rel_eps = 1e-9);

// ---------------------------------------------------------------------------
// Two receivers, linear power-rate curves.

struct TwoRxModel {
  std::array<Grid1D, 2> grid;
  std::array<std::vector<double>, 2> slope;       // c_s per receiver state
  std::array<std::vector<double>, 2> transition;  // per receiver
  std::array<HoldingCost, 2> holding;
  std::array<double, 2> demand{1.0, 1.0};
  double peak_power = 0.0;
  double alpha = 1.0;

  std::size_t states(std::size_t m) const noexcept { return slope[m].size(); }
  std::size_t joint_states() const noexcept { return states(0) * states(1); }
  std::size_t joint(std::size_t s1, std::size_t s2) const noexcept { return s1 * states(1) + s2; }
  std::array<std::size_t, 2> split(std::size_t s) const noexcept {
    return {s / states(1), s % states(1)};
  }
  double joint_prob(std::size_t from, std::size_t to) const;
  double y_max(std::size_t m) const noexcept { return demand[m] + grid[m].x_max(); }

  static TwoRxModel from_spec(const ValidatedSpec& spec, const GridOptions& opt,
                              int horizon);
};

struct Decision2D {
  std::array<double, 2> y{0.0, 0.0};
  double value = 0.0;  // interpolated G at y
};

/// Lower convex hull of each row (i fixed, j varying) of a node table. Used
/// to price node columns of the envelope LP in O(log cols) per row.
struct RowHulls {
  std::vector<std::uint32_t> start;  // rows + 1 offsets into idx
  std::vector<std::uint32_t> idx;    // hull vertices (column indices) per row
  double scale = 1.0;                // max |value|, for tolerances

  static RowHulls build(std::span<const double> table, std::size_t rows, std::size_t cols);
};

/// Convex envelope of a G table (stored over u = y - d) at y: the smallest
/// convex combination of node values whose nodes average to y.
double envelope_g(const TwoRxModel& m, std::span<const double> g, const RowHulls& hulls,
                  double y1, double y2);

/// Exact minimum of the convex envelope of G over the action polygon
/// {y >= d v x, c_s . (y - x) <= P, y <= y_max}. Among optimal points the
/// lexicographically smallest y is returned unless `lexicographic` is false,
/// in which case y is just some optimal point.
Decision2D minimize_2d(const TwoRxModel& m, std::span<const double> g, const RowHulls& hulls,
                       std::size_t s, double x1, double x2, bool lexicographic = true);

class ValueGrid2D {
 public:
  TwoRxModel model;
  int horizon = 0;
  /// Index ((n * S) + s) * I1 * I2 + i * I2 + j, n = 0..N.
  /// V over x = (i, j) * step; G over y = d + (i, j) * step.
  std::vector<double> V, G, Y1, Y2;
  std::vector<RowHulls> hulls;  // per (n, s), n = 0..N; empty at n = 0

  std::size_t joint_states() const noexcept { return model.joint_states(); }
  std::size_t n1() const noexcept { return model.grid[0].count; }
  std::size_t n2() const noexcept { return model.grid[1].count; }
  std::size_t plane() const noexcept { return n1() * n2(); }
  std::size_t index(int n, std::size_t s, std::size_t i, std::size_t j) const {
    return (static_cast<std::size_t>(n) * joint_states() + s) * plane() + i * n2() + j;
  }
  std::span<const double> g_table(int n, std::size_t s) const {
    return {G.data() + index(n, s, 0, 0), plane()};
  }
  std::span<const double> v_table(int n, std::size_t s) const {
    return {V.data() + index(n, s, 0, 0), plane()};
  }
  double value(int n, std::size_t s, std::size_t i, std::size_t j) const {
    return V[index(n, s, i, j)];
  }
  /// V_n at an arbitrary buffer pair: the stage minimization itself, so it
  /// agrees with the table at nodes.
  double value_at(int n, std::size_t s, double x1, double x2) const;
  const RowHulls& hull(int n, std::size_t s) const {
    return hulls[static_cast<std::size_t>(n) * joint_states() + s];
  }
  /// Convex envelope of G_n(., s) at y.
  double g_at(int n, std::size_t s, double y1, double y2) const {
    return envelope_g(model, g_table(n, s), hull(n, s), y1, y2);
  }
  Decision2D decide(int n, std::size_t s, double x1, double x2) const;
};

ValueGrid2D solve_2rx(const TwoRxModel& model, int horizon,
                      std::size_t memory_cap_bytes = std::size_t{2} << 30,
                      unsigned workers = 0);
/// Stage n of an allocated grid from stage n - 1, in place.
void bellman_2d(ValueGrid2D& vg, int n, unsigned workers);
/// Two-receiver spec with linear curves; PreconditionViolated otherwise.
ValueGrid2D solve_2rx(const ValidatedSpec& spec, const GridOptions& opt = {});

/// Convexity along rows, columns and both diagonals of V_n (n >= 1).
CheckReport check_convexity(const ValueGrid2D& vg, double rel_eps = 1e-9);
/// Cross differences of V_n (n >= 1) and of G_n when `include_g`.
CheckReport check_supermodularity(const ValueGrid2D& vg, bool include_g = true,
                                  double rel_eps = 1e-9);
CheckReport check_monotone_in_n(const ValueGrid2D& vg, double rel_eps = 1e-9);

void write_values_csv(const ValueGrid1D& vg, std::ostream& out);
void write_values_csv(const ValueGrid2D& vg, std::ostream& out);

/// Binary cache keyed by a caller-provided key (spec hash + grid params).
void save_cache(const ValueGrid1D& vg, const std::string& key, const std::string& path);
std::optional<ValueGrid1D> load_cache(const OneRxModel& model, int horizon,
                                      const std::string& key, const std::string& path);

}  // namespace underflow
