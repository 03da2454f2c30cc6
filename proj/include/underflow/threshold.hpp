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

// Closed-form thresholds and the base-stock policies built from them.

#pragma once

#include <compare>
#include <ostream>
#include <string>
#include <vector>

#include "underflow/model.hpp"

namespace underflow {

/// A finite double or +infinity. Infinity is a tag, never a large float, so
/// comparisons against it are exact.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  constexpr ExtReal(double v) : value_(v) {}  // NOLINT implicit on purpose
  static constexpr ExtReal infinity() {
    ExtReal r;
    r.inf_ = true;
    return r;
  }

  constexpr bool is_inf() const noexcept { return inf_; }
  /// Finite value; throws OutOfRange for infinity.
  double value() const;
  std::string str() const;

  friend constexpr bool operator==(const ExtReal& a, const ExtReal& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.value_ == b.value_);
  }
  friend constexpr std::partial_ordering operator<=>(const ExtReal& a,
                                                     const ExtReal& b) {
    if (a.inf_ || b.inf_) return a.inf_ <=> b.inf_;
    return a.value_ <=> b.value_;
  }

 private:
  bool inf_ = false;
  double value_ = 0.0;
};

/// gamma(n, j) for n in 1..N and j >= 1; j == 1 is +inf and j > n is 0.
struct ThresholdTable {
  int horizon = 0;
  double demand = 1.0;
  bool unrestricted = false;  // computed without the peak-power term
  /// rows[n-1][j-1] for j = 1..n+1.
  std::vector<std::vector<ExtReal>> rows;
  /// Per state: slot-coverage counts z_k/d for k < K, then z_max/d.
  std::vector<std::vector<int>> coverage;

  ExtReal at(int n, int j) const;
};

/// b[n-1][s][k] for n = 1..N; k indexes the segments of the effective curve.
struct CriticalNumbers {
  int horizon = 0;
  std::vector<std::vector<std::vector<double>>> b;

  double at(int n, std::size_t s, std::size_t k) const {
    return b.at(static_cast<std::size_t>(n - 1)).at(s).at(k);
  }
};

struct ThresholdOptions {
  /// Drop the peak-power correction term (linear recursion only); gives the
  /// thresholds of the problem without a power cap.
  bool unrestricted = false;
  /// Relative tolerance for the integer-coverage conditions.
  double integrality_tol = 1e-9;
};

/// Single receiver, IID channel, linear holding, linear curves with
/// P/(c_s d) integral. PreconditionViolated otherwise.
ThresholdTable compute_gamma_linear(const ValidatedSpec& spec,
                                    const ThresholdOptions& opt = {});

/// Same conditions with piecewise-linear curves whose breakpoints and z_max
/// are integer multiples of d.
ThresholdTable compute_gamma_pwl(const ValidatedSpec& spec,
                                 const ThresholdOptions& opt = {});

/// Picks the linear or piecewise recursion from the curve shapes.
ThresholdTable compute_gamma(const ValidatedSpec& spec,
                             const ThresholdOptions& opt = {});

/// b_{n,k}(s) = j d for the j with gamma(n, j+1) <= c_k(s) < gamma(n, j).
/// `slopes[s]` lists the segment slopes of state s.
CriticalNumbers criticals_from_gamma(
    const ThresholdTable& table,
    const std::vector<std::vector<double>>& slopes);
CriticalNumbers criticals_from_gamma(const ThresholdTable& table,
                                     const ValidatedSpec& spec);

struct BaseStockAction {
  double z = 0.0;  // packets sent
  double y = 0.0;  // buffer after sending
  /// Which branch of the policy fired: 2k for "use the first k segments in
  /// full and stop", 2k+1 for "fill to b_k", 2K+2 for "full power".
  int branch = 0;
  /// false when x is not a multiple of d; the policy is then a heuristic.
  bool on_grid = true;
};

/// Finite generalized base-stock policy driven by critical numbers.
class BaseStockPolicy {
 public:
  BaseStockPolicy(CriticalNumbers criticals, std::vector<EffectiveCurve> curves,
                  double demand);
  /// Thresholds -> criticals -> policy in one go.
  static BaseStockPolicy from_spec(const ValidatedSpec& spec,
                                   const ThresholdOptions& opt = {});

  BaseStockAction action(int n, double x, std::size_t s) const;
  const CriticalNumbers& criticals() const noexcept { return criticals_; }
  const std::vector<EffectiveCurve>& curves() const noexcept { return curves_; }
  double demand() const noexcept { return demand_; }
  int horizon() const noexcept { return criticals_.horizon; }

 private:
  CriticalNumbers criticals_;
  std::vector<EffectiveCurve> curves_;
  double demand_;
};

/// Violations of the documented shape of a critical-number table: bounds
/// d <= b <= n d, nonincreasing in k, nondecreasing in n, and (for IID
/// channels) nonincreasing in the segment slope with b = d at the largest
/// slope. Empty when all hold.
std::vector<std::string> check_criticals(const CriticalNumbers& crit,
                                         const ValidatedSpec& spec,
                                         double tol = 1e-9);

void write_gamma_csv(const ThresholdTable& table, std::ostream& out);
void write_criticals_csv(const CriticalNumbers& crit, std::ostream& out);

}  // namespace underflow
