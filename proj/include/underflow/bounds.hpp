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

// Lower bounds for M receivers from single-receiver problems, and the greedy
// policy that uses them as a continuation value.
//
// Separable: each receiver alone, allowed the whole peak power P.
// Lagrangian: the coupling constraint sum_m c^m(z^m) <= P is priced at
// lambda per unit of power. Receiver m then solves its own problem with power
// weighted by (1 + lambda), still capped at P per slot, and the bound is
//   sum_m V^m_lambda(x^m, s^m) - lambda P (1 + alpha + ... + alpha^{N-1}).
// Every lambda >= 0 gives a lower bound; the search keeps the best one.

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "underflow/dp.hpp"
#include "underflow/sim.hpp"

namespace underflow {

enum class BoundKind { Separable, Lagrangian };
std::string_view to_string(BoundKind k) noexcept;

struct BoundOptions {
  GridOptions grid;
  /// Start buffers; empty -> the spec's initial_x.
  std::vector<double> x;
  /// Start channel states; empty -> averaged over the stationary law.
  std::vector<std::size_t> s;
  double lambda_max = 0.0;  // 0 -> 10 c_max over receivers
  double lambda_tol = 1e-7;  // relative to lambda_max
};

struct BoundReport {
  BoundKind kind = BoundKind::Separable;
  double lambda = 0.0;
  double value = 0.0;                 // lower bound on V_N at the start state
  std::vector<double> per_receiver;   // V^m_lambda at the start state
  double offset = 0.0;                // lambda P sum_t alpha^t
  std::optional<double> exact;
  double gap = std::numeric_limits<double>::quiet_NaN();  // exact - value
  std::vector<std::pair<double, double>> trace;  // (lambda, dual value) as evaluated
  std::vector<std::shared_ptr<const ValueGrid1D>> receivers;

  void set_exact(double v) {
    exact = v;
    gap = v - value;
  }
};

BoundReport separable_bound(const ValidatedSpec& spec, const BoundOptions& opt = {});
/// The dual value at one multiplier.
BoundReport dual_bound(const ValidatedSpec& spec, double lambda, const BoundOptions& opt = {});

struct DualSearch {
  double lambda = 0.0;
  double value = 0.0;
  std::vector<std::pair<double, double>> trace;  // sorted by lambda
};

/// Golden-section maximization of a concave dual over [0, lambda_max].
/// DualSearchDiverged when the best multiplier sits at lambda_max.
DualSearch search_dual(const std::function<double(double)>& dual, double lambda_max,
                       double tol);

/// search_dual over dual_bound with lambda_max defaulting to 10 c_max.
BoundReport lagrangian_bound(const ValidatedSpec& spec, const BoundOptions& opt = {});

/// Concavity of the evaluated dual values: no point lies above the chord of
/// its neighbours by more than tol (relative to max(1, |value|)).
bool trace_concave(const BoundReport& report, double tol = 1e-9);

/// V_N of a solved two-receiver grid at the start state of `opt`.
double exact_value(const ValidatedSpec& spec, const ValueGrid2D& vg, const BoundOptions& opt);

/// One-step lookahead with the bound's per-receiver values as continuation:
///   min sum_m [c^m(y^m - x^m) + h^m(y^m - d^m) + alpha W^m_{n-1}(y^m - d^m)]
/// over y^m >= d^m v x^m and sum_m c^m(y^m - x^m) <= P.
/// The sum is separable apart from the power budget, which is priced by a
/// multiplier found by bisection; at the critical multiplier the two
/// bracketing solutions are blended so the budget is met exactly.
class GreedyFeasiblePolicy : public Policy {
 public:
  GreedyFeasiblePolicy(const ValidatedSpec& spec, const BoundReport& bound);
  std::string name() const override { return "greedy-feasible"; }
  std::size_t receivers() const override { return grids_.size(); }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  std::vector<std::shared_ptr<const ValueGrid1D>> grids_;
  double peak_;
};

GreedyFeasiblePolicy greedy_feasible(const ValidatedSpec& spec, const BoundReport& bound);

/// kind, lambda, value, v1..vM, gap.
void write_bound_csv(const std::vector<BoundReport>& reports, std::ostream& out);

}  // namespace underflow
