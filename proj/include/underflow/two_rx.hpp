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

// Seven-region policy for two receivers, read off a solved 2-D grid.
//
// G_n(y, s) is evaluated off the grid as c.y + h + alpha E[V_{n-1}(y - d)],
// with V_{n-1} computed by the stage minimization at the exact point. That
// function is convex, so targets and boundary curves are refined by
// golden-section search. Refined quantities are computed on first use and
// cached; precompute() fills everything up front.

#pragma once

#include <array>
#include <memory>
#include <ostream>
#include <string_view>
#include <vector>

#include "underflow/dp.hpp"

namespace underflow {

enum class Region { I, II, IIIA, IIIB, IVA, IVB, IVC };

std::string_view to_string(Region r) noexcept;
inline bool full_power(Region r) noexcept {
  return r == Region::IVA || r == Region::IVB || r == Region::IVC;
}

struct RegionOptions {
  double search_tol = 1e-9;  // packets
  double epsilon = -1.0;     // boundary tolerance; negative -> step / 2
};

struct RegionDecision {
  Region region = Region::I;
  std::array<double, 2> y{0.0, 0.0};
  /// true when no predicate held within epsilon and the nearest region was
  /// picked instead.
  bool fallback = false;
};

class RegionPolicy {
 public:
  explicit RegionPolicy(std::shared_ptr<const ValueGrid2D> grid, RegionOptions opt = {});

  const ValueGrid2D& grid() const noexcept { return *grid_; }
  double epsilon() const noexcept { return eps_; }
  int horizon() const noexcept { return grid_->horizon; }

  /// G_n(y, s) at an arbitrary point of [d1, y1max] x [d2, y2max].
  double g(int n, std::size_t s, double y1, double y2) const;

  /// Lexicographically smallest minimizer of the G table over grid nodes.
  std::array<double, 2> grid_target(int n, std::size_t s) const;
  /// b_n(s): lexicographically smallest global minimizer of G_n(., s).
  std::array<double, 2> target(int n, std::size_t s) const;

  /// Boundary curves sampled at the grid nodes y = d + k * step.
  const std::vector<double>& f1_samples(int n, std::size_t s) const;
  const std::vector<double>& f2_samples(int n, std::size_t s) const;
  /// Smallest minimizer of G_n(., x2, s) over y1 >= d1, interpolated between
  /// samples; x2 is clamped to [d2, y2max].
  double f1(int n, std::size_t s, double x2) const;
  double f2(int n, std::size_t s, double x1) const;

  Region classify(int n, std::size_t s, double x1, double x2) const;
  /// Region and post-transmission buffers; always feasible.
  RegionDecision decide(int n, std::size_t s, double x1, double x2) const;
  std::array<double, 2> action(int n, std::size_t s, double x1, double x2) const {
    return decide(n, s, x1, x2).y;
  }

  /// Minimizer of G_n along {y >= d v x : c_s . (y - x) = P}.
  std::array<double, 2> full_power_action(int n, std::size_t s, double x1, double x2) const;

  /// Computes every cached quantity.
  void precompute(unsigned workers = 0) const;

 private:
  struct Cache;
  Cache& cache(int n, std::size_t s) const;
  RegionDecision classify_impl(int n, std::size_t s, double x1, double x2) const;
  double line_argmin(int n, std::size_t s, int axis, double fixed, double lo, double hi) const;

  std::shared_ptr<const ValueGrid2D> grid_;
  RegionOptions opt_;
  double eps_ = 0.0;
  std::vector<std::shared_ptr<Cache>> caches_;  // shared by copies
};

RegionPolicy build_region_policy(std::shared_ptr<const ValueGrid2D> grid,
                                 const RegionOptions& opt = {});

struct RegionCheck {
  std::size_t checked = 0;
  std::vector<std::string> failures;
  bool ok() const noexcept { return failures.empty(); }
};

/// f1/f2 nonincreasing, f1(b2) = b1 and f2(b1) = b2 within tol, every grid
/// buffer pair in exactly one region without fallback.
RegionCheck check_region_policy(const RegionPolicy& policy, int n, std::size_t s,
                                double tol);

/// x1, x2, region, y1, y2 over buffers k * step for k * step <= x_max.
void write_region_csv(const RegionPolicy& policy, int n, std::size_t s, double step,
                      double x_max, std::ostream& out);

}  // namespace underflow
