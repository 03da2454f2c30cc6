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

#include "underflow/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "underflow/util.hpp"

namespace underflow {

double ExtReal::value() const {
  if (inf_) throw Error(ErrorCode::OutOfRange, "threshold is infinite");
  return value_;
}

std::string ExtReal::str() const { return inf_ ? "inf" : format_double(value_); }

ExtReal ThresholdTable::at(int n, int j) const {
  if (n < 1 || n > horizon || j < 1)
    throw Error(ErrorCode::OutOfRange, "threshold index out of range");
  if (j == 1) return ExtReal::infinity();
  if (j > n) return 0.0;
  return rows[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(j - 1)];
}

namespace {

[[noreturn]] void precondition(const std::string& msg) {
  throw Error(ErrorCode::PreconditionViolated, msg);
}

int coverage_count(double packets, double demand, double tol, const std::string& what) {
  const double q = packets / demand;
  const double r = std::round(q);
  if (r < 1.0 || std::abs(q - r) > tol * std::max(1.0, q))
    precondition(what + " = " + format_double(packets) +
                 " is not a positive integer multiple of the demand");
  return static_cast<int>(r);
}

struct Setup {
  double h = 0.0;
  double alpha = 1.0;
  double demand = 1.0;
  int horizon = 0;
  std::vector<double> prob;
  std::vector<std::vector<double>> slopes;  // per state, K_s + 1 entries
  std::vector<std::vector<int>> coverage;   // per state, K_s + 1 entries
};

Setup common_setup(const ValidatedSpec& spec, bool need_linear, double tol) {
  if (spec.receiver_count() != 1) precondition("threshold recursion needs exactly one receiver");
  if (!spec.finite()) precondition("threshold recursion needs a finite horizon");
  const auto& model = spec.model(0);
  const auto& rx = spec.receiver(0);
  if (!model.iid) precondition("channel is not IID");
  const auto h = rx.holding.linear_rate();
  if (!h) precondition("holding cost is not linear");
  Setup st;
  st.h = *h;
  st.alpha = spec.alpha();
  st.demand = rx.demand;
  st.horizon = spec.horizon();
  st.prob = model.stationary;
  for (std::size_t s = 0; s < model.curves.size(); ++s) {
    const auto& curve = model.curves[s];
    const std::string tag = "state '" + rx.channel.states[s] + "'";
    if (need_linear && curve.segments() != 1)
      precondition(tag + " has a piecewise-linear curve");
    std::vector<int> cov;
    for (double z : curve.breakpoints())
      cov.push_back(coverage_count(z, st.demand, tol, tag + " breakpoint"));
    cov.push_back(coverage_count(curve.z_max(), st.demand, tol,
                                 tag + (need_linear ? " P/c_s" : " z_max")));
    st.coverage.push_back(std::move(cov));
    st.slopes.emplace_back(curve.slopes().begin(), curve.slopes().end());
  }
  return st;
}

ThresholdTable make_table(const Setup& st, bool unrestricted) {
  ThresholdTable t;
  t.horizon = st.horizon;
  t.demand = st.demand;
  t.unrestricted = unrestricted;
  t.coverage = st.coverage;
  t.rows.resize(static_cast<std::size_t>(st.horizon));
  for (int n = 1; n <= st.horizon; ++n) {
    auto& row = t.rows[static_cast<std::size_t>(n - 1)];
    row.assign(static_cast<std::size_t>(n + 1), 0.0);
    row[0] = ExtReal::infinity();
  }
  return t;
}

}  // namespace

ThresholdTable compute_gamma_linear(const ValidatedSpec& spec,
                                    const ThresholdOptions& opt) {
  const Setup st = common_setup(spec, true, opt.integrality_tol);
  ThresholdTable t = make_table(st, opt.unrestricted);
  const std::size_t S = st.prob.size();
  for (int n = 2; n <= st.horizon; ++n) {
    for (int j = 2; j <= n; ++j) {
      const ExtReal g = t.at(n - 1, j - 1);
      double sum = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        const double c = st.slopes[s][0];
        const double p = st.prob[s];
        double term = c >= g ? g.value() : c;
        if (!opt.unrestricted) {
          const ExtReal gl = t.at(n - 1, j - 1 + st.coverage[s][0]);
          if (c < gl) term = gl.value();  // c + (gl - c), without the rounding
        }
        sum += p * term;
      }
      t.rows[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(j - 1)] =
          -st.h + st.alpha * sum;
    }
  }
  return t;
}

ThresholdTable compute_gamma_pwl(const ValidatedSpec& spec, const ThresholdOptions& opt) {
  if (opt.unrestricted)
    precondition("the unrestricted variant is defined for linear curves only");
  const Setup st = common_setup(spec, false, opt.integrality_tol);
  ThresholdTable t = make_table(st, false);
  const std::size_t S = st.prob.size();
  for (int n = 2; n <= st.horizon; ++n) {
    for (int j = 2; j <= n; ++j) {
      double sum = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        const auto& c = st.slopes[s];
        const auto& L = st.coverage[s];
        const std::size_t K = c.size() - 1;
        auto g = [&](int cov) { return t.at(n - 1, j - 1 + cov); };
        auto lower = [&](std::size_t k) { return k == 0 ? 0 : L[k - 1]; };
        double term = 0.0;
        if (c[0] >= g(0)) term += g(0).value();
        for (std::size_t k = 0; k < K; ++k) {
          if (g(L[k]) <= c[k] && c[k] < g(lower(k))) term += c[k];
          if (c[k] < g(L[k]) && g(L[k]) <= c[k + 1]) term += g(L[k]).value();
        }
        if (g(L[K]) <= c[K] && c[K] < g(lower(K))) term += c[K];
        if (c[K] < g(L[K])) term += g(L[K]).value();
        sum += st.prob[s] * term;
      }
      t.rows[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(j - 1)] =
          -st.h + st.alpha * sum;
    }
  }
  return t;
}

ThresholdTable compute_gamma(const ValidatedSpec& spec, const ThresholdOptions& opt) {
  bool linear = spec.receiver_count() == 1;
  if (linear)
    for (const auto& c : spec.model(0).curves) linear = linear && c.segments() == 1;
  return linear ? compute_gamma_linear(spec, opt) : compute_gamma_pwl(spec, opt);
}

CriticalNumbers criticals_from_gamma(const ThresholdTable& table,
                                     const std::vector<std::vector<double>>& slopes) {
  CriticalNumbers out;
  out.horizon = table.horizon;
  out.b.resize(static_cast<std::size_t>(table.horizon));
  for (int n = 1; n <= table.horizon; ++n) {
    auto& bn = out.b[static_cast<std::size_t>(n - 1)];
    bn.resize(slopes.size());
    for (std::size_t s = 0; s < slopes.size(); ++s) {
      for (double c : slopes[s]) {
        // First j whose lower threshold is reached; gamma(n, n+1) = 0 <= c
        // guarantees termination even if a row dips below zero.
        int j = 1;
        while (!(table.at(n, j + 1) <= c)) ++j;
        bn[s].push_back(j * table.demand);
      }
    }
  }
  return out;
}

CriticalNumbers criticals_from_gamma(const ThresholdTable& table, const ValidatedSpec& spec) {
  std::vector<std::vector<double>> slopes;
  for (const auto& c : spec.model(0).curves) slopes.emplace_back(c.slopes().begin(), c.slopes().end());
  return criticals_from_gamma(table, slopes);
}

BaseStockPolicy::BaseStockPolicy(CriticalNumbers criticals,
                                 std::vector<EffectiveCurve> curves, double demand)
    : criticals_(std::move(criticals)), curves_(std::move(curves)), demand_(demand) {}

BaseStockPolicy BaseStockPolicy::from_spec(const ValidatedSpec& spec,
                                           const ThresholdOptions& opt) {
  auto table = compute_gamma(spec, opt);
  return BaseStockPolicy(criticals_from_gamma(table, spec), spec.model(0).curves,
                         spec.receiver(0).demand);
}

BaseStockAction BaseStockPolicy::action(int n, double x, std::size_t s) const {
  if (x < 0.0) throw Error(ErrorCode::OutOfRange, "negative buffer level");
  const auto& curve = curves_.at(s);
  const auto& b = criticals_.b.at(static_cast<std::size_t>(n - 1)).at(s);
  const std::size_t K = curve.segments() - 1;
  BaseStockAction a;
  a.on_grid = near_multiple(x, demand_, 1e-9);
  auto z_end = [&](std::size_t k) { return curve.segment_end(k); };
  auto finish = [&](double z, int branch) {
    a.z = z;
    a.y = x + z;
    a.branch = branch;
    return a;
  };
  for (std::size_t k = 0; k <= K; ++k) {
    const double z_prev = k == 0 ? 0.0 : z_end(k - 1);
    const bool top_open = k == 0;  // b_{n,-1} is +inf
    const double upper = top_open ? 0.0 : b[k - 1] - z_prev;
    if (b[k] - z_prev < x && (top_open || x <= upper))
      return finish(z_prev, static_cast<int>(2 * k));
    if (b[k] - z_end(k) < x && x <= b[k] - z_prev)
      return finish(b[k] - x, static_cast<int>(2 * k + 1));
  }
  return finish(curve.z_max(), static_cast<int>(2 * K + 2));
}

std::vector<std::string> check_criticals(const CriticalNumbers& crit,
                                         const ValidatedSpec& spec, double tol) {
  std::vector<std::string> out;
  const double d = spec.receiver(0).demand;
  const auto& model = spec.model(0);
  auto where = [](int n, std::size_t s, std::size_t k) {
    std::ostringstream o;
    o << "n=" << n << " s=" << s << " k=" << k;
    return o.str();
  };
  bool all_linear = true;
  for (const auto& c : model.curves) all_linear = all_linear && c.segments() == 1;
  for (int n = 1; n <= crit.horizon; ++n) {
    const auto& bn = crit.b[static_cast<std::size_t>(n - 1)];
    double worst_slope = -1.0, worst_b = 0.0;
    for (std::size_t s = 0; s < bn.size(); ++s) {
      for (std::size_t k = 0; k < bn[s].size(); ++k) {
        const double v = bn[s][k];
        if (v < d - tol || v > n * d + tol)
          out.push_back(where(n, s, k) + ": b outside [d, n d]");
        if (k > 0 && v > bn[s][k - 1] + tol)
          out.push_back(where(n, s, k) + ": b increases in k");
        if (n > 1 && v < crit.at(n - 1, s, k) - tol)
          out.push_back(where(n, s, k) + ": b decreases in n");
        const double slope = model.curves[s].slope(k);
        if (slope > worst_slope) {
          worst_slope = slope;
          worst_b = v;
        }
        if (!model.iid) continue;
        for (std::size_t s2 = 0; s2 < bn.size(); ++s2)
          for (std::size_t k2 = 0; k2 < bn[s2].size(); ++k2)
            if (slope < model.curves[s2].slope(k2) && v < bn[s2][k2] - tol)
              out.push_back(where(n, s, k) + ": cheaper slope has a lower target");
      }
    }
    if (model.iid && all_linear && std::abs(worst_b - d) > tol)
      out.push_back("n=" + std::to_string(n) + ": worst state target differs from d");
  }
  return out;
}

void write_gamma_csv(const ThresholdTable& table, std::ostream& out) {
  CsvWriter csv(out, {"n", "j", "gamma"});
  for (int n = 1; n <= table.horizon; ++n)
    for (int j = 1; j <= n + 1; ++j) {
      csv.cell(n).cell(j).cell(table.at(n, j).str());
      csv.end_row();
    }
}

void write_criticals_csv(const CriticalNumbers& crit, std::ostream& out) {
  CsvWriter csv(out, {"n", "s", "k", "b"});
  for (int n = 1; n <= crit.horizon; ++n) {
    const auto& bn = crit.b[static_cast<std::size_t>(n - 1)];
    for (std::size_t s = 0; s < bn.size(); ++s)
      for (std::size_t k = 0; k < bn[s].size(); ++k) {
        csv.cell(n).cell(s).cell(k).cell(bn[s][k]);
        csv.end_row();
      }
  }
}

}  // namespace underflow
