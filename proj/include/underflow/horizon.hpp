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

// Infinite horizon: value iteration for the discounted problem and the
// vanishing-discount estimate of the optimal average cost.
//
// Value iteration is the finite-horizon sweep applied until it stops moving,
// starting from V = 0. The result is stored as a two-stage grid: stage 0
// holds the previous iterate and stage 1 the last one, so the stage-1
// decisions of the grid are the greedy policy for V_inf.

#pragma once

#include <cstdint>
#include <limits>
#include <ostream>
#include <vector>

#include "underflow/dp.hpp"
#include "underflow/model.hpp"

namespace underflow {

struct ViOptions {
  /// step 0 -> d / 10; x_max 0 -> 10 d.
  GridOptions grid;
  double tol = 1e-10;  // on the sup-norm change between iterates
  int max_iter = 200000;
  /// b_inf is reported stable once it moved less than one grid step for this
  /// many consecutive iterations.
  int stable_window = 5;
  double monotone_slack = 1e-12;  // relative to max(1, |V|)
  bool keep_trace = true;
};

struct ViTrace {
  int iter = 0;
  double residual = 0.0;
  std::vector<double> b;  // flattened b_inf candidates, see InfiniteSolution
};

struct ViStatus {
  int iterations = 0;
  double residual = std::numeric_limits<double>::infinity();
  /// false when max_iter ran out first; the result is then partial.
  bool converged = false;
  int b_stable_for = 0;  // consecutive iterations with drift below a step
  bool b_stable = false;
  double monotone_worst = 0.0;  // most negative V_{k+1} - V_k seen
  std::size_t monotone_failures = 0;
  std::vector<ViTrace> trace;

  /// Throws MaxIterExceeded unless converged.
  void require_converged() const;
};

struct InfiniteSolution1D {
  ValueGrid1D grid;  // horizon 1, see above
  /// b_inf[s][k]; the trace flattens it state by state.
  std::vector<std::vector<double>> b_inf;
  ViStatus status;

  double value(std::size_t s, std::size_t i) const { return grid.value(1, s, i); }
  double value_at(std::size_t s, double x) const { return grid.value_at(1, s, x); }
  Decision1D decide(std::size_t s, double x) const { return grid.decide(1, s, x); }
};

struct InfiniteSolution2D {
  ValueGrid2D grid;
  /// b_inf[s] = lexicographically smallest node minimizer of G_inf(., s).
  std::vector<std::array<double, 2>> b_inf;
  ViStatus status;

  double value(std::size_t s, std::size_t i, std::size_t j) const {
    return grid.value(1, s, i, j);
  }
  Decision2D decide(std::size_t s, double x1, double x2) const {
    return grid.decide(1, s, x1, x2);
  }
};

/// PreconditionViolated unless alpha < 1 and there is one receiver. The
/// spec's horizon is ignored. Returns a partial result (status.converged
/// false) when max_iter runs out.
InfiniteSolution1D value_iterate(const ValidatedSpec& spec, const ViOptions& opt = {});
/// Two receivers with linear curves.
InfiniteSolution2D value_iterate_2rx(const ValidatedSpec& spec, const ViOptions& opt = {});

/// Discounted cost of the stationary policy at stage 1 of `grid`, computed
/// by successive approximation on the same grid and interpolation.
std::vector<double> evaluate_stationary(const ValueGrid1D& grid, double tol = 1e-12,
                                        int max_iter = 1000000);

struct RhoOptions {
  ViOptions vi;
  std::vector<double> alphas{0.9, 0.95, 0.99, 0.995};
  /// Slots of the long-run simulation of the largest-alpha policy; 0 skips it.
  std::size_t sim_slots = 1000000;
  std::uint64_t seed = 1;
  /// Buffer levels (all receivers alike) where V - m is sampled; empty -> 0, d, 2d.
  std::vector<double> probes;
  unsigned workers = 1;
};

struct AverageCostEstimate {
  std::vector<double> alphas;
  std::vector<double> m;           // min of V_inf over grid states
  std::vector<double> rho_points;  // (1 - alpha) m
  std::vector<int> iterations;
  /// Intercept and slope of the least-squares line through the last three
  /// rho points against 1 - alpha; residual is the largest misfit.
  double rho_star = 0.0;
  double slope = 0.0;
  double fit_residual = 0.0;
  double simulated_average = std::numeric_limits<double>::quiet_NaN();
  /// w[a][p * S + s] = V_inf(probe p, s) - m at alphas[a]; S counts joint
  /// states for two receivers.
  std::vector<std::vector<double>> w_samples;
};

AverageCostEstimate estimate_rho(const ValidatedSpec& spec, const RhoOptions& opt = {});

/// iter, residual, b1, b2, ...
void write_trace_csv(const ViStatus& status, std::ostream& out);
/// alpha, m, rho_point, with a final row at alpha = 1 holding rho_star.
void write_rho_csv(const AverageCostEstimate& est, std::ostream& out);

}  // namespace underflow
