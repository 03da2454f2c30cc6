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

#include "underflow/dp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "underflow/util.hpp"

namespace underflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kIdxTol = 1e-9;

std::size_t ceil_index(double a, std::size_t count) {
  const double c = std::ceil(a - kIdxTol);
  if (c <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(c), count);
}

// Returns count when a < 0 (empty range marker is handled by callers).
long long floor_index(double a, std::size_t count) {
  const double f = std::floor(a + kIdxTol);
  if (f < 0.0) return -1;
  return std::min(static_cast<long long>(f), static_cast<long long>(count) - 1);
}

double interp_row(std::span<const double> row, double step, double u) {
  const std::size_t I = row.size();
  double a = std::clamp(u / step, 0.0, static_cast<double>(I - 1));
  std::size_t i = std::min(static_cast<std::size_t>(a), I - 2);
  const double t = a - static_cast<double>(i);
  return row[i] + t * (row[i + 1] - row[i]);
}

// Keeps the best (value, y) seen; near ties go to the smaller y.
struct Best1D {
  double value = kInf;
  double y = 0.0;
  void consider(double y_new, double v) {
    const double eps = 1e-12 * (1.0 + std::abs(value));
    if (value == kInf || v < value - eps || (v <= value + eps && y_new < y)) {
      value = v;
      y = y_new;
    }
  }
};


}  // namespace

Grid1D Grid1D::make(double step, double demand, double x_max) {
  if (!(step > 0.0) || !std::isfinite(step))
    throw Error(ErrorCode::ConfigError, "grid step must be positive");
  if (!near_multiple(demand, step, 1e-9))
    throw Error(ErrorCode::GridMisaligned, "grid step " + format_double(step) +
                                               " does not divide demand " +
                                               format_double(demand));
  Grid1D g;
  g.step = step;
  const double cells = std::ceil(x_max / step - 1e-9);
  g.count = static_cast<std::size_t>(std::max(cells, 1.0)) + 1;
  return g;
}

OneRxModel OneRxModel::from_spec(const ValidatedSpec& spec, std::size_t m,
                                 const GridOptions& opt, int horizon) {
  OneRxModel out;
  const auto& rx = spec.receiver(m);
  out.demand = rx.demand;
  const double step = opt.step > 0.0 ? opt.step : rx.demand / 10.0;
  const double x_max = opt.x_max > 0.0 ? opt.x_max : horizon * rx.demand + step;
  out.grid = Grid1D::make(step, rx.demand, x_max);
  out.curves = spec.model(m).curves;
  out.transition = rx.channel.transition;
  out.holding = rx.holding;
  out.alpha = spec.alpha();
  out.power_weight = opt.power_weight;
  return out;
}

Decision1D minimize_1d(const OneRxModel& m, std::span<const double> w_row,
                       std::size_t s, double x) {
  const auto& curve = m.curves[s];
  const double d = m.demand;
  const double step = m.grid.step;
  const std::size_t I = m.grid.count;
  const double y_top = d + m.grid.x_max();
  const double lo = std::min(std::max(x, d), y_top);
  const double hi = std::max(lo, std::min(x + curve.z_max(), y_top));

  auto objective = [&](double y) {
    const double z = std::clamp(y - x, 0.0, curve.z_max());
    return m.power_weight * curve.power_of(z) + m.holding(y - d) +
           m.alpha * interp_row(w_row, step, y - d);
  };

  Best1D best;
  const std::size_t i_lo = ceil_index((lo - d) / step, I);
  const long long i_hi = floor_index((hi - d) / step, I);
  for (long long i = static_cast<long long>(i_lo); i <= i_hi; ++i) {
    const double y = std::clamp(d + static_cast<double>(i) * step, lo, hi);
    const double z = std::clamp(y - x, 0.0, curve.z_max());
    best.consider(y, m.power_weight * curve.power_of(z) + m.holding(y - d) +
                         m.alpha * w_row[static_cast<std::size_t>(i)]);
  }
  best.consider(lo, objective(lo));
  best.consider(hi, objective(hi));
  for (double zb : curve.breakpoints()) {
    const double y = x + zb;
    if (y > lo && y < hi) best.consider(y, objective(y));
  }
  for (double k : m.holding.kinks()) {
    const double y = d + k;
    if (y > lo && y < hi) best.consider(y, objective(y));
  }
  return {best.y, best.y - x, best.value};
}

void bellman_1d(const OneRxModel& m, std::span<const double> prev,
                std::span<double> next, std::span<double> y_out,
                std::span<double> w_out, unsigned workers) {
  const std::size_t S = m.states(), I = m.grid.count;
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t i = 0; i < I; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < S; ++t) acc += m.transition[s * S + t] * prev[t * I + i];
      w_out[s * I + i] = acc;
    }
  parallel_for(S * I, workers, [&](std::size_t k) {
    const std::size_t s = k / I, i = k % I;
    const auto dec = minimize_1d(m, w_out.subspan(s * I, I), s, m.grid.x(i));
    next[k] = dec.value;
    y_out[k] = dec.y;
  });
}

double ValueGrid1D::value_at(int n, std::size_t s, double x) const {
  return interp_row({V.data() + index(n, s, 0), nodes()}, model.grid.step, x);
}

Decision1D ValueGrid1D::decide(int n, std::size_t s, double x) const {
  if (n < 1 || n > horizon) throw Error(ErrorCode::OutOfRange, "stage outside 1..N");
  return minimize_1d(model, w_row(n, s), s, x);
}

ValueGrid1D solve_1rx(const OneRxModel& model, int horizon, std::size_t memory_cap_bytes) {
  if (model.grid.count < 2) throw Error(ErrorCode::ConfigError, "grid needs two nodes");
  const std::size_t plane = model.states() * model.grid.count;
  const std::size_t total = plane * static_cast<std::size_t>(horizon + 1);
  const double bytes = 3.0 * sizeof(double) * static_cast<double>(total);
  if (bytes > static_cast<double>(memory_cap_bytes))
    throw Error(ErrorCode::MemoryBudgetExceeded,
                "value tables need " + format_double(bytes / 1048576.0) + " MiB, cap is " +
                    format_double(static_cast<double>(memory_cap_bytes) / 1048576.0) + " MiB");
  ValueGrid1D vg;
  vg.model = model;
  vg.horizon = horizon;
  vg.V.assign(total, 0.0);
  vg.Y.assign(total, 0.0);
  vg.W.assign(total, 0.0);
  for (int n = 1; n <= horizon; ++n) {
    const std::size_t off = plane * static_cast<std::size_t>(n);
    bellman_1d(model, std::span<const double>(vg.V.data() + off - plane, plane),
               std::span<double>(vg.V.data() + off, plane),
               std::span<double>(vg.Y.data() + off, plane),
               std::span<double>(vg.W.data() + off, plane), 1);
  }
  return vg;
}

ValueGrid1D solve_1rx(const ValidatedSpec& spec, const GridOptions& opt) {
  if (spec.receiver_count() != 1)
    throw Error(ErrorCode::PreconditionViolated, "solve_1rx needs exactly one receiver");
  const int N = spec.horizon();
  return solve_1rx(OneRxModel::from_spec(spec, 0, opt, N), N, opt.memory_cap_bytes);
}

std::vector<std::vector<double>> criticals_from_w(const OneRxModel& m,
                                                  std::span<const double> w) {
  const std::size_t I = m.grid.count;
  const double d = m.demand;
  std::vector<std::vector<double>> out(m.states());
  for (std::size_t s = 0; s < m.states(); ++s) {
    const auto row = w.subspan(s * I, I);
    for (std::size_t k = 0; k < m.curves[s].segments(); ++k) {
      const double c = m.power_weight * m.curves[s].slope(k);
      Best1D best;
      for (std::size_t i = 0; i < I; ++i) {
        const double y = d + m.grid.x(i);
        best.consider(y, c * y + m.holding(y - d) + m.alpha * row[i]);
      }
      for (double kink : m.holding.kinks()) {
        const double y = d + kink;
        if (kink <= m.grid.x_max())
          best.consider(y, c * y + m.holding(kink) + m.alpha * interp_row(row, m.grid.step, kink));
      }
      out[s].push_back(best.y);
    }
  }
  return out;
}

CriticalNumbers criticals_from_values(const ValueGrid1D& vg) {
  CriticalNumbers out;
  out.horizon = vg.horizon;
  const std::size_t plane = vg.states() * vg.nodes();
  for (int n = 1; n <= vg.horizon; ++n)
    out.b.push_back(criticals_from_w(vg.model, {vg.W.data() + vg.index(n, 0, 0), plane}));
  return out;
}

void CheckReport::add(const std::string& where, double value, double slack) {
  ++checked;
  worst = std::min(worst, value);
  if (value < -slack) {
    ++failures;
    if (violations.size() < 50) violations.push_back({where, value});
  }
}

void CheckReport::merge(const CheckReport& other) {
  checked += other.checked;
  failures += other.failures;
  worst = std::min(worst, other.worst);
  for (const auto& v : other.violations)
    if (violations.size() < 50) violations.push_back(v);
}

namespace {

double max_abs(std::span<const double> v) {
  double m = 1.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string at(int n, std::size_t s, std::size_t i) {
  std::ostringstream o;
  o << "n=" << n << " s=" << s << " i=" << i;
  return o.str();
}

std::string at(int n, std::size_t s, std::size_t i, std::size_t j) {
  std::ostringstream o;
  o << "n=" << n << " s=" << s << " i=" << i << " j=" << j;
  return o.str();
}

}  // namespace

CheckReport check_convexity(const ValueGrid1D& vg, double rel_eps) {
  CheckReport r;
  const double eps = rel_eps * max_abs(vg.V);
  for (int n = 1; n <= vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.states(); ++s)
      for (std::size_t i = 1; i + 1 < vg.nodes(); ++i)
        r.add(at(n, s, i),
              vg.value(n, s, i - 1) - 2.0 * vg.value(n, s, i) + vg.value(n, s, i + 1), eps);
  return r;
}

CheckReport check_monotone_in_n(const ValueGrid1D& vg, double rel_eps) {
  CheckReport r;
  const double eps = rel_eps * max_abs(vg.V);
  for (int n = 0; n < vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.states(); ++s)
      for (std::size_t i = 0; i < vg.nodes(); ++i)
        r.add(at(n, s, i), vg.value(n + 1, s, i) - vg.value(n, s, i), eps);
  return r;
}

// ---------------------------------------------------------------------------
// Two receivers

double TwoRxModel::joint_prob(std::size_t from, std::size_t to) const {
  const auto a = split(from), b = split(to);
  return transition[0][a[0] * states(0) + b[0]] * transition[1][a[1] * states(1) + b[1]];
}

TwoRxModel TwoRxModel::from_spec(const ValidatedSpec& spec, const GridOptions& opt,
                                 int horizon) {
  if (spec.receiver_count() != 2)
    throw Error(ErrorCode::PreconditionViolated, "two-receiver solver needs exactly two receivers");
  TwoRxModel out;
  out.peak_power = spec.peak_power();
  out.alpha = spec.alpha();
  for (std::size_t m = 0; m < 2; ++m) {
    const auto& rx = spec.receiver(m);
    for (const auto& c : spec.model(m).curves) {
      if (c.segments() != 1)
        throw Error(ErrorCode::PreconditionViolated,
                    "two-receiver solver needs linear power-rate curves");
      out.slope[m].push_back(c.slope(0));
    }
    out.transition[m] = rx.channel.transition;
    out.holding[m] = rx.holding;
    out.demand[m] = rx.demand;
    const double step = opt.step > 0.0 ? opt.step : rx.demand / 10.0;
    const double x_max = opt.x_max > 0.0 ? opt.x_max : horizon * rx.demand + step;
    out.grid[m] = Grid1D::make(step, rx.demand, x_max);
  }
  return out;
}

RowHulls RowHulls::build(std::span<const double> table, std::size_t rows, std::size_t cols) {
  RowHulls h;
  h.start.reserve(rows + 1);
  h.idx.reserve(rows * 4);
  for (std::size_t r = 0; r < rows; ++r) {
    h.start.push_back(static_cast<std::uint32_t>(h.idx.size()));
    const double* g = table.data() + r * cols;
    const std::size_t base = h.idx.size();
    for (std::size_t j = 0; j < cols; ++j) {
      while (h.idx.size() - base >= 2) {
        const std::size_t a = h.idx[h.idx.size() - 2], b = h.idx.back();
        // Drop b when it lies on or above the chord a -> j.
        if ((g[b] - g[a]) * static_cast<double>(j - a) >=
            (g[j] - g[a]) * static_cast<double>(b - a))
          h.idx.pop_back();
        else
          break;
      }
      h.idx.push_back(static_cast<std::uint32_t>(j));
    }
  }
  h.start.push_back(static_cast<std::uint32_t>(h.idx.size()));
  return h;
}

namespace {

// Simplex over node weights lambda >= 0 with columns generated on demand.
// Node (i, j) has features f = (1, y1, y2, g). Row r reads
// sum lambda (a_r . f) + slack_r * s_r = rhs_r with s_r >= 0.
class EnvelopeLp {
 public:
  using Vec4 = std::array<double, 4>;
  static constexpr std::size_t kMaxRows = 6;

  EnvelopeLp(const TwoRxModel& m, std::span<const double> g, const RowHulls& hulls)
      : g_(g), hulls_(hulls), I1_(m.grid[0].count), I2_(m.grid[1].count),
        d1_(m.demand[0]), d2_(m.demand[1]), D1_(m.grid[0].step), D2_(m.grid[1].step) {}

  void add_row(Vec4 a, double rhs, int slack) { rows_.push_back({a, rhs, slack}); }
  void set_objective(Vec4 obj) { obj_ = obj; }

  // Starts from the nodes of the triangle containing y (barycentric weights).
  void start_at(double y1, double y2) {
    const double a1 = std::clamp((y1 - d1_) / D1_, 0.0, static_cast<double>(I1_ - 1));
    const double a2 = std::clamp((y2 - d2_) / D2_, 0.0, static_cast<double>(I2_ - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(a1), I1_ - 2);
    const std::size_t j = std::min(static_cast<std::size_t>(a2), I2_ - 2);
    const double t = a1 - static_cast<double>(i), u = a2 - static_cast<double>(j);
    basis_.clear();
    if (t + u <= 1.0) {
      basis_.push_back(node(i, j));
      basis_.push_back(node(i + 1, j));
      basis_.push_back(node(i, j + 1));
    } else {
      basis_.push_back(node(i + 1, j + 1));
      basis_.push_back(node(i, j + 1));
      basis_.push_back(node(i + 1, j));
    }
  }
  // Makes the slack of row r basic (used for rows the start point leaves slack).
  void add_basic_slack(std::size_t r) { basis_.push_back(slack(r)); }

  /// Runs the simplex; returns the optimal objective.
  double solve() {
    const std::size_t m = rows_.size();
    if (basis_.size() != m) throw Error(ErrorCode::OutOfRange, "envelope LP basis size mismatch");
    const double tol = 1e-12 * (1.0 + hulls_.scale + std::max(y_top(0), y_top(1)));
    int stalls = 0;
    double last = kInf;
    for (int iter = 0; iter < 20000; ++iter) {
      factor();
      const double objective = current_objective();
      if (objective < last - tol) stalls = 0;
      else ++stalls;
      last = objective;
      const bool bland = stalls > 25;

      // Duals: B^T pi = c_B.
      std::array<double, kMaxRows> pi{};
      for (std::size_t k = 0; k < m; ++k) pi[k] = cost(basis_[k]);
      solve_transposed(pi);
      Vec4 kappa = obj_;
      for (std::size_t r = 0; r < m; ++r)
        for (int q = 0; q < 4; ++q) kappa[q] -= pi[r] * rows_[r].a[q];

      Col enter{};
      double best = -tol;
      bool found = false;
      for (std::size_t r = 0; r < m; ++r) {
        if (rows_[r].slack == 0 || in_basis(slack(r))) continue;
        const double rc = -pi[r] * rows_[r].slack;
        if (rc < best) {
          best = rc;
          enter = slack(r);
          found = true;
          if (bland) break;
        }
      }
      if (!(bland && found)) {
        const auto [rc, col] = bland ? first_negative(kappa, tol) : price(kappa);
        if (rc < best && !in_basis(col)) {
          best = rc;
          enter = col;
          found = true;
        }
      }
      if (!found) return objective;

      // Direction B d = a_enter and ratio test.
      std::array<double, kMaxRows> dir{};
      column(enter, dir);
      solve_direct(dir);
      double dmax = 0.0;
      for (std::size_t k = 0; k < m; ++k) dmax = std::max(dmax, std::abs(dir[k]));
      std::size_t leave = m;
      double theta = kInf;
      for (std::size_t k = 0; k < m; ++k) {
        if (dir[k] <= 1e-11 * dmax) continue;
        const double ratio = std::max(xb_[k], 0.0) / dir[k];
        if (ratio < theta - 1e-15 ||
            (ratio <= theta + 1e-15 && leave < m &&
             (bland ? order(basis_[k]) < order(basis_[leave]) : dir[k] > dir[leave]))) {
          theta = ratio;
          leave = k;
        }
      }
      if (leave == m) throw Error(ErrorCode::OutOfRange, "envelope LP is unbounded");
      basis_[leave] = enter;
    }
    throw Error(ErrorCode::MaxIterExceeded, "envelope LP did not converge");
  }

  /// Weighted average of node coordinates in the current basis.
  std::array<double, 2> point() const {
    std::array<double, 2> y{0.0, 0.0};
    for (std::size_t k = 0; k < basis_.size(); ++k)
      if (basis_[k].node) {
        const auto f = features(basis_[k].i, basis_[k].j);
        y[0] += xb_[k] * f[1];
        y[1] += xb_[k] * f[2];
      }
    return y;
  }

 private:
  struct Row {
    Vec4 a;
    double rhs;
    int slack;
  };
  struct Col {
    bool node = true;
    std::uint32_t i = 0, j = 0;
    std::size_t r = 0;
    bool operator==(const Col&) const = default;
  };

  static Col node(std::size_t i, std::size_t j) {
    return {true, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 0};
  }
  static Col slack(std::size_t r) { return {false, 0, 0, r}; }
  std::size_t order(const Col& c) const {
    return c.node ? rows_.size() + c.i * I2_ + c.j : c.r;
  }
  bool in_basis(const Col& c) const {
    return std::find(basis_.begin(), basis_.end(), c) != basis_.end();
  }
  double y_top(std::size_t m) const {
    return m == 0 ? d1_ + static_cast<double>(I1_ - 1) * D1_
                  : d2_ + static_cast<double>(I2_ - 1) * D2_;
  }

  Vec4 features(std::size_t i, std::size_t j) const {
    return {1.0, d1_ + static_cast<double>(i) * D1_, d2_ + static_cast<double>(j) * D2_,
            g_[i * I2_ + j]};
  }
  static double dot(const Vec4& a, const Vec4& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
  }
  double cost(const Col& c) const { return c.node ? dot(obj_, features(c.i, c.j)) : 0.0; }
  void column(const Col& c, std::array<double, kMaxRows>& out) const {
    for (std::size_t r = 0; r < rows_.size(); ++r) out[r] = 0.0;
    if (c.node) {
      const auto f = features(c.i, c.j);
      for (std::size_t r = 0; r < rows_.size(); ++r) out[r] = dot(rows_[r].a, f);
    } else {
      out[c.r] = rows_[c.r].slack;
    }
  }

  // LU with partial pivoting of the basis matrix, then x_B = B^-1 rhs.
  void factor() {
    const std::size_t m = rows_.size();
    std::array<double, kMaxRows> col{};
    for (std::size_t k = 0; k < m; ++k) {
      column(basis_[k], col);
      for (std::size_t r = 0; r < m; ++r) lu_[r * kMaxRows + k] = col[r];
    }
    for (std::size_t k = 0; k < m; ++k) perm_[k] = k;
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t p = k;
      for (std::size_t r = k + 1; r < m; ++r)
        if (std::abs(lu_[r * kMaxRows + k]) > std::abs(lu_[p * kMaxRows + k])) p = r;
      if (std::abs(lu_[p * kMaxRows + k]) < 1e-300)
        throw Error(ErrorCode::OutOfRange, "envelope LP basis became singular");
      if (p != k) {
        for (std::size_t c = 0; c < m; ++c) std::swap(lu_[k * kMaxRows + c], lu_[p * kMaxRows + c]);
        std::swap(perm_[k], perm_[p]);
      }
      for (std::size_t r = k + 1; r < m; ++r) {
        const double f = lu_[r * kMaxRows + k] /= lu_[k * kMaxRows + k];
        for (std::size_t c = k + 1; c < m; ++c) lu_[r * kMaxRows + c] -= f * lu_[k * kMaxRows + c];
      }
    }
    for (std::size_t r = 0; r < m; ++r) xb_[r] = rows_[r].rhs;
    solve_direct(xb_);
  }
  void solve_direct(std::array<double, kMaxRows>& b) const {
    const std::size_t m = rows_.size();
    std::array<double, kMaxRows> y{};
    for (std::size_t r = 0; r < m; ++r) {
      double v = b[perm_[r]];
      for (std::size_t c = 0; c < r; ++c) v -= lu_[r * kMaxRows + c] * y[c];
      y[r] = v;
    }
    for (std::size_t r = m; r-- > 0;) {
      double v = y[r];
      for (std::size_t c = r + 1; c < m; ++c) v -= lu_[r * kMaxRows + c] * b[c];
      b[r] = v / lu_[r * kMaxRows + r];
    }
  }
  // Solves B^T x = b using the same factors (P B = L U).
  void solve_transposed(std::array<double, kMaxRows>& b) const {
    const std::size_t m = rows_.size();
    std::array<double, kMaxRows> z{};
    for (std::size_t r = 0; r < m; ++r) {
      double v = b[r];
      for (std::size_t c = 0; c < r; ++c) v -= lu_[c * kMaxRows + r] * z[c];
      z[r] = v / lu_[r * kMaxRows + r];
    }
    std::array<double, kMaxRows> w{};
    for (std::size_t r = m; r-- > 0;) {
      double v = z[r];
      for (std::size_t c = r + 1; c < m; ++c) v -= lu_[c * kMaxRows + r] * w[c];
      w[r] = v;
    }
    for (std::size_t r = 0; r < m; ++r) b[perm_[r]] = w[r];
  }
  double current_objective() const {
    double v = 0.0;
    for (std::size_t k = 0; k < basis_.size(); ++k) v += xb_[k] * cost(basis_[k]);
    return v;
  }

  // Most negative kappa . f over all nodes, row by row.
  std::pair<double, Col> price(const Vec4& kappa) const {
    double best = kInf;
    Col arg = node(0, 0);
    for (std::size_t i = 0; i < I1_; ++i) {
      const double base = kappa[0] + kappa[1] * (d1_ + static_cast<double>(i) * D1_);
      auto eval = [&](std::size_t j) {
        const double v = base + kappa[2] * (d2_ + static_cast<double>(j) * D2_) +
                         kappa[3] * g_[i * I2_ + j];
        if (v < best) {
          best = v;
          arg = node(i, j);
        }
      };
      if (kappa[3] > 0.0) {
        const double t = kappa[2] / kappa[3] * D2_;
        const std::uint32_t* h = hulls_.idx.data() + hulls_.start[i];
        const std::size_t len = hulls_.start[i + 1] - hulls_.start[i];
        const double* row = g_.data() + i * I2_;
        std::size_t lo = 0, hi = len - 1;
        while (lo < hi) {
          const std::size_t mid = (lo + hi) / 2;
          if (row[h[mid + 1]] - row[h[mid]] + t * static_cast<double>(h[mid + 1] - h[mid]) >= 0.0)
            hi = mid;
          else
            lo = mid + 1;
        }
        eval(h[lo]);
      } else {
        eval(0);
        eval(I2_ - 1);
      }
    }
    return {best, arg};
  }
  std::pair<double, Col> first_negative(const Vec4& kappa, double tol) const {
    for (std::size_t i = 0; i < I1_; ++i)
      for (std::size_t j = 0; j < I2_; ++j) {
        const double v = dot(kappa, features(i, j));
        if (v < -tol && !in_basis(node(i, j))) return {v, node(i, j)};
      }
    return {0.0, node(0, 0)};
  }

  std::span<const double> g_;
  const RowHulls& hulls_;
  std::size_t I1_, I2_;
  double d1_, d2_, D1_, D2_;
  std::vector<Row> rows_;
  Vec4 obj_{0.0, 0.0, 0.0, 1.0};
  std::vector<Col> basis_;
  std::array<double, kMaxRows * kMaxRows> lu_{};
  std::array<std::size_t, kMaxRows> perm_{};
  std::array<double, kMaxRows> xb_{};
};

}  // namespace

double envelope_g(const TwoRxModel& m, std::span<const double> g, const RowHulls& hulls,
                  double y1, double y2) {
  y1 = std::clamp(y1, m.demand[0], m.y_max(0));
  y2 = std::clamp(y2, m.demand[1], m.y_max(1));
  EnvelopeLp lp(m, g, hulls);
  lp.add_row({1, 0, 0, 0}, 1.0, 0);
  lp.add_row({0, 1, 0, 0}, y1, 0);
  lp.add_row({0, 0, 1, 0}, y2, 0);
  lp.start_at(y1, y2);
  return lp.solve();
}

Decision2D minimize_2d(const TwoRxModel& m, std::span<const double> g, const RowHulls& hulls,
                       std::size_t s, double x1, double x2, bool lexicographic) {
  const auto st = m.split(s);
  const double c1 = m.slope[0][st[0]], c2 = m.slope[1][st[1]];
  const double L1 = std::min(std::max(x1, m.demand[0]), m.y_max(0));
  const double L2 = std::min(std::max(x2, m.demand[1]), m.y_max(1));
  const double B = std::max(0.0, m.peak_power - c1 * (L1 - x1) - c2 * (L2 - x2));

  EnvelopeLp lp(m, g, hulls);
  lp.add_row({1, 0, 0, 0}, 1.0, 0);
  lp.add_row({0, 1, 0, 0}, L1, -1);
  lp.add_row({0, 0, 1, 0}, L2, -1);
  lp.add_row({0, c1, c2, 0}, c1 * L1 + c2 * L2 + B, +1);
  lp.start_at(L1, L2);
  lp.add_basic_slack(3);
  const double best = lp.solve();
  if (!lexicographic) {
    const auto y = lp.point();
    return {{y[0], y[1]}, best};
  }

  // Among near-optimal weightings, smallest y1, then smallest y2.
  lp.add_row({0, 0, 0, 1}, best + 1e-12 * (1.0 + std::abs(best)), +1);
  lp.add_basic_slack(4);
  lp.set_objective({0, 1, 0, 0});
  const double y1 = lp.solve();
  lp.add_row({0, 1, 0, 0}, y1 + 1e-12 * (1.0 + std::abs(y1)), +1);
  lp.add_basic_slack(5);
  lp.set_objective({0, 0, 1, 0});
  lp.solve();
  const auto y = lp.point();
  return {{y[0], y[1]}, best};
}

double ValueGrid2D::value_at(int n, std::size_t s, double x1, double x2) const {
  if (n == 0) return 0.0;
  const auto st = model.split(s);
  const auto dec = minimize_2d(model, g_table(n, s), hull(n, s), s, x1, x2, false);
  return dec.value - model.slope[0][st[0]] * x1 - model.slope[1][st[1]] * x2;
}

Decision2D ValueGrid2D::decide(int n, std::size_t s, double x1, double x2) const {
  if (n < 1 || n > horizon) throw Error(ErrorCode::OutOfRange, "stage outside 1..N");
  return minimize_2d(model, g_table(n, s), hull(n, s), s, x1, x2);
}

void bellman_2d(ValueGrid2D& vg, int n, unsigned workers) {
  const auto& model = vg.model;
  const std::size_t S = model.joint_states();
  const std::size_t I1 = model.grid[0].count, I2 = model.grid[1].count;
  const std::size_t plane = I1 * I2;
  const double d1 = model.demand[0], d2 = model.demand[1];
  std::vector<double> h1(I1), h2(I2);
  for (std::size_t i = 0; i < I1; ++i) h1[i] = model.holding[0](model.grid[0].x(i));
  for (std::size_t j = 0; j < I2; ++j) h2[j] = model.holding[1](model.grid[1].x(j));

  parallel_for(S, workers, [&](std::size_t s) {
    const auto st = model.split(s);
    const double c1 = model.slope[0][st[0]], c2 = model.slope[1][st[1]];
    double* gs = vg.G.data() + vg.index(n, s, 0, 0);
    for (std::size_t k = 0; k < plane; ++k) gs[k] = 0.0;
    for (std::size_t t = 0; t < S; ++t) {
      const double p = model.joint_prob(s, t);
      if (p == 0.0) continue;
      const double* vt = vg.V.data() + vg.index(n - 1, t, 0, 0);
      for (std::size_t k = 0; k < plane; ++k) gs[k] += p * vt[k];
    }
    double scale = 0.0;
    for (std::size_t i = 0; i < I1; ++i)
      for (std::size_t j = 0; j < I2; ++j) {
        const double y1 = d1 + model.grid[0].x(i), y2 = d2 + model.grid[1].x(j);
        double& cell = gs[i * I2 + j];
        cell = c1 * y1 + c2 * y2 + h1[i] + h2[j] + model.alpha * cell;
        scale = std::max(scale, std::abs(cell));
      }
    auto& hull = vg.hulls[static_cast<std::size_t>(n) * S + s];
    hull = RowHulls::build({gs, plane}, I1, I2);
    hull.scale = scale;
  });
  parallel_for(S * I1, workers, [&](std::size_t k) {
    const std::size_t s = k / I1, i = k % I1;
    const auto st = model.split(s);
    const double c1 = model.slope[0][st[0]], c2 = model.slope[1][st[1]];
    const auto g = vg.g_table(n, s);
    const auto& hull = vg.hull(n, s);
    const double x1 = model.grid[0].x(i);
    for (std::size_t j = 0; j < I2; ++j) {
      const double x2 = model.grid[1].x(j);
      const auto dec = minimize_2d(model, g, hull, s, x1, x2);
      const std::size_t at = vg.index(n, s, i, j);
      vg.V[at] = dec.value - c1 * x1 - c2 * x2;
      vg.Y1[at] = dec.y[0];
      vg.Y2[at] = dec.y[1];
    }
  });
}

ValueGrid2D solve_2rx(const TwoRxModel& model, int horizon, std::size_t memory_cap_bytes,
                      unsigned workers) {
  const std::size_t S = model.joint_states();
  const std::size_t I1 = model.grid[0].count, I2 = model.grid[1].count;
  if (I1 < 2 || I2 < 2) throw Error(ErrorCode::ConfigError, "grid needs two nodes per axis");
  const std::size_t plane = I1 * I2;
  // Four double tables plus row hulls of at most one index per node.
  const double bytes = (4.0 * sizeof(double) + 4.0) * static_cast<double>(horizon + 1) *
                       static_cast<double>(S) * static_cast<double>(plane);
  if (bytes > static_cast<double>(memory_cap_bytes))
    throw Error(ErrorCode::MemoryBudgetExceeded,
                "value tables need " + format_double(bytes / 1048576.0) + " MiB, cap is " +
                    format_double(static_cast<double>(memory_cap_bytes) / 1048576.0) + " MiB");
  ValueGrid2D vg;
  vg.model = model;
  vg.horizon = horizon;
  const std::size_t total = static_cast<std::size_t>(horizon + 1) * S * plane;
  vg.V.assign(total, 0.0);
  vg.G.assign(total, 0.0);
  vg.Y1.assign(total, 0.0);
  vg.Y2.assign(total, 0.0);
  vg.hulls.resize(static_cast<std::size_t>(horizon + 1) * S);

  for (int n = 1; n <= horizon; ++n) bellman_2d(vg, n, workers);
  return vg;
}

ValueGrid2D solve_2rx(const ValidatedSpec& spec, const GridOptions& opt) {
  const int N = spec.horizon();
  return solve_2rx(TwoRxModel::from_spec(spec, opt, N), N, opt.memory_cap_bytes, opt.workers);
}

CheckReport check_convexity(const ValueGrid2D& vg, double rel_eps) {
  CheckReport r;
  const double eps = rel_eps * max_abs(vg.V);
  const std::size_t I1 = vg.n1(), I2 = vg.n2();
  for (int n = 1; n <= vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.joint_states(); ++s)
      for (std::size_t i = 0; i < I1; ++i)
        for (std::size_t j = 0; j < I2; ++j) {
          auto v = [&](std::size_t a, std::size_t b) { return vg.value(n, s, a, b); };
          const double c = v(i, j);
          const bool in_i = i > 0 && i + 1 < I1, in_j = j > 0 && j + 1 < I2;
          if (in_i) r.add(at(n, s, i, j) + " axis1", v(i - 1, j) - 2 * c + v(i + 1, j), eps);
          if (in_j) r.add(at(n, s, i, j) + " axis2", v(i, j - 1) - 2 * c + v(i, j + 1), eps);
          if (in_i && in_j) {
            r.add(at(n, s, i, j) + " diag", v(i - 1, j - 1) - 2 * c + v(i + 1, j + 1), eps);
            r.add(at(n, s, i, j) + " anti", v(i - 1, j + 1) - 2 * c + v(i + 1, j - 1), eps);
          }
        }
  return r;
}

CheckReport check_supermodularity(const ValueGrid2D& vg, bool include_g, double rel_eps) {
  CheckReport r;
  const std::size_t I1 = vg.n1(), I2 = vg.n2();
  const double eps_v = rel_eps * max_abs(vg.V);
  const double eps_g = rel_eps * max_abs(vg.G);
  for (int n = 1; n <= vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.joint_states(); ++s)
      for (std::size_t i = 0; i + 1 < I1; ++i)
        for (std::size_t j = 0; j + 1 < I2; ++j) {
          const std::size_t k00 = vg.index(n, s, i, j), k01 = vg.index(n, s, i, j + 1);
          const std::size_t k10 = vg.index(n, s, i + 1, j), k11 = vg.index(n, s, i + 1, j + 1);
          r.add(at(n, s, i, j) + " V", vg.V[k11] + vg.V[k00] - vg.V[k10] - vg.V[k01], eps_v);
          if (include_g)
            r.add(at(n, s, i, j) + " G", vg.G[k11] + vg.G[k00] - vg.G[k10] - vg.G[k01], eps_g);
        }
  return r;
}

CheckReport check_monotone_in_n(const ValueGrid2D& vg, double rel_eps) {
  CheckReport r;
  const double eps = rel_eps * max_abs(vg.V);
  for (int n = 0; n < vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.joint_states(); ++s)
      for (std::size_t i = 0; i < vg.n1(); ++i)
        for (std::size_t j = 0; j < vg.n2(); ++j)
          r.add(at(n, s, i, j), vg.value(n + 1, s, i, j) - vg.value(n, s, i, j), eps);
  return r;
}

void write_values_csv(const ValueGrid1D& vg, std::ostream& out) {
  CsvWriter csv(out, {"n", "s", "x", "V", "z"});
  for (int n = 1; n <= vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.states(); ++s)
      for (std::size_t i = 0; i < vg.nodes(); ++i) {
        csv.cell(n).cell(s).cell(vg.model.grid.x(i)).cell(vg.value(n, s, i)).cell(vg.packets(n, s, i));
        csv.end_row();
      }
}

void write_values_csv(const ValueGrid2D& vg, std::ostream& out) {
  CsvWriter csv(out, {"n", "s", "x1", "x2", "V", "z1", "z2"});
  for (int n = 1; n <= vg.horizon; ++n)
    for (std::size_t s = 0; s < vg.joint_states(); ++s)
      for (std::size_t i = 0; i < vg.n1(); ++i)
        for (std::size_t j = 0; j < vg.n2(); ++j) {
          const double x1 = vg.model.grid[0].x(i), x2 = vg.model.grid[1].x(j);
          const std::size_t k = vg.index(n, s, i, j);
          csv.cell(n).cell(s).cell(x1).cell(x2).cell(vg.V[k]).cell(vg.Y1[k] - x1).cell(vg.Y2[k] - x2);
          csv.end_row();
        }
}

namespace {

constexpr char kMagic[8] = {'U', 'F', 'V', 'G', '1', 'D', '0', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
bool get(std::istream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

void save_cache(const ValueGrid1D& vg, const std::string& key, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write cache '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  put(out, static_cast<std::uint64_t>(key.size()));
  out.write(key.data(), static_cast<std::streamsize>(key.size()));
  put(out, static_cast<std::int64_t>(vg.horizon));
  put(out, static_cast<std::uint64_t>(vg.states()));
  put(out, static_cast<std::uint64_t>(vg.nodes()));
  put(out, vg.model.grid.step);
  for (const auto* arr : {&vg.V, &vg.Y, &vg.W})
    out.write(reinterpret_cast<const char*>(arr->data()),
              static_cast<std::streamsize>(arr->size() * sizeof(double)));
}

std::optional<ValueGrid1D> load_cache(const OneRxModel& model, int horizon,
                                      const std::string& key, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic)) return std::nullopt;
  std::uint64_t key_len = 0, states = 0, nodes = 0;
  std::int64_t n = 0;
  double step = 0.0;
  if (!get(in, key_len) || key_len > 4096) return std::nullopt;
  std::string stored(key_len, '\0');
  if (!in.read(stored.data(), static_cast<std::streamsize>(key_len)) || stored != key)
    return std::nullopt;
  if (!get(in, n) || !get(in, states) || !get(in, nodes) || !get(in, step)) return std::nullopt;
  if (n != horizon || states != model.states() || nodes != model.grid.count ||
      step != model.grid.step)
    return std::nullopt;
  ValueGrid1D vg;
  vg.model = model;
  vg.horizon = horizon;
  const std::size_t total = static_cast<std::size_t>(horizon + 1) * states * nodes;
  for (auto* arr : {&vg.V, &vg.Y, &vg.W}) {
    arr->resize(total);
    if (!in.read(reinterpret_cast<char*>(arr->data()),
                 static_cast<std::streamsize>(total * sizeof(double))))
      return std::nullopt;
  }
  return vg;
}

}  // namespace underflow
