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

// Monte Carlo simulation of transmission policies.
//
// Randomness comes from a counter-based generator: every uniform draw is
// SplitMix64 applied to a key built from (seed, episode, slot, receiver), so
// an episode's channel path does not depend on which thread runs it or on
// the policy being simulated.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "underflow/dp.hpp"
#include "underflow/model.hpp"
#include "underflow/threshold.hpp"
#include "underflow/two_rx.hpp"

namespace underflow {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) for one (seed, episode, slot, stream) counter.
double counter_uniform(std::uint64_t seed, std::uint64_t episode, std::uint64_t slot,
                       std::uint64_t stream) noexcept;

/// Smallest t with u < sum_{k <= t} p[k]; the last index if rounding leaves
/// u above the total.
std::size_t sample_index(std::span<const double> p, double u) noexcept;

/// A stationary or time-varying rule mapping (slots left, buffers, channel
/// states) to packets sent per receiver.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual std::size_t receivers() const = 0;
  /// n >= 1 is the number of slots left including this one; stationary
  /// policies ignore it.
  virtual void act(int n, std::span<const double> x, std::span<const std::size_t> s,
                   std::span<double> z) const = 0;
};

/// z = max(0, d - x) for each receiver.
class JustInTimePolicy : public Policy {
 public:
  explicit JustInTimePolicy(const ValidatedSpec& spec);
  std::string name() const override { return "just-in-time"; }
  std::size_t receivers() const override { return demand_.size(); }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  std::vector<double> demand_;
};

/// Fills towards n d while a receiver sees its cheapest channel state,
/// just in time otherwise. Mandatory packets are served first; what is left
/// of the peak power goes to the receivers in index order.
class OpportunisticGreedyPolicy : public Policy {
 public:
  explicit OpportunisticGreedyPolicy(const ValidatedSpec& spec);
  std::string name() const override { return "opportunistic-greedy"; }
  std::size_t receivers() const override { return demand_.size(); }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  std::vector<double> demand_;
  std::vector<std::vector<EffectiveCurve>> curves_;
  std::vector<std::vector<bool>> cheapest_;
  double peak_ = 0.0;
};

class BaseStockSimPolicy : public Policy {
 public:
  explicit BaseStockSimPolicy(BaseStockPolicy policy) : policy_(std::move(policy)) {}
  std::string name() const override { return "base-stock"; }
  std::size_t receivers() const override { return 1; }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  BaseStockPolicy policy_;
};

/// Optimal decisions read off a solved 1-D grid. A stationary policy always
/// uses stage 1 (the greedy stage of an infinite-horizon solution).
class GridPolicy1D : public Policy {
 public:
  GridPolicy1D(std::shared_ptr<const ValueGrid1D> grid, bool stationary = false)
      : grid_(std::move(grid)), stationary_(stationary) {}
  std::string name() const override { return stationary_ ? "dp-stationary" : "dp"; }
  std::size_t receivers() const override { return 1; }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  std::shared_ptr<const ValueGrid1D> grid_;
  bool stationary_;
};

class GridPolicy2D : public Policy {
 public:
  GridPolicy2D(std::shared_ptr<const ValueGrid2D> grid, bool stationary = false)
      : grid_(std::move(grid)), stationary_(stationary) {}
  std::string name() const override { return stationary_ ? "dp-stationary" : "dp"; }
  std::size_t receivers() const override { return 2; }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  std::shared_ptr<const ValueGrid2D> grid_;
  bool stationary_;
};

/// The seven-region rule of a RegionPolicy.
class StructuredPolicy : public Policy {
 public:
  explicit StructuredPolicy(RegionPolicy policy) : policy_(std::move(policy)) {}
  std::string name() const override { return "seven-region"; }
  std::size_t receivers() const override { return 2; }
  void act(int n, std::span<const double> x, std::span<const std::size_t> s,
           std::span<double> z) const override;

 private:
  RegionPolicy policy_;
};

struct SlotRecord {
  int n = 0;  // slots left
  std::vector<std::size_t> s;
  std::vector<double> x, z;
  double power = 0.0;
  double holding = 0.0;
};

struct Trajectory {
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  std::vector<SlotRecord> records;  // empty unless requested
  double discounted = 0.0;
  double undiscounted = 0.0;
  int slots = 0;  // completed slots
  bool aborted = false;
  std::string abort_reason;
};

struct SimOptions {
  std::size_t episodes = 1000;
  int slots = 0;  // 0 -> spec horizon
  std::uint64_t seed = 1;
  /// Initial buffers; empty -> the spec's initial_x.
  std::vector<double> x0;
  /// Initial channel states; empty -> drawn from the stationary law.
  std::vector<std::size_t> s0;
  bool keep_trajectories = false;
  unsigned workers = 1;
  double tol = 1e-9;  // slack on the power and underflow constraints
};

struct CostStats {
  std::size_t episodes = 0;  // completed
  std::size_t aborted = 0;   // ended by an infeasible action
  double mean = 0.0;         // discounted cost
  double std_error = 0.0;    // sample std / sqrt(episodes)
  double min = 0.0;
  double max = 0.0;
  double average = 0.0;      // undiscounted cost per slot
};

struct SimResult {
  CostStats stats;
  std::vector<double> costs;  // discounted cost per episode, NaN if aborted
  std::vector<Trajectory> trajectories;
  std::vector<std::string> abort_reasons;  // first few
};

/// One episode. Never throws on an infeasible action: the episode is marked
/// aborted with the reason.
Trajectory simulate_episode(const Policy& policy, const ValidatedSpec& spec,
                            const SimOptions& opt, std::uint64_t episode, bool record);

SimResult simulate(const Policy& policy, const ValidatedSpec& spec, const SimOptions& opt);

/// Expected discounted cost over every channel path of `slots` slots from
/// (x0, s0). ConfigError when there are more than `max_paths` paths,
/// PolicyInfeasibleAction on an infeasible action.
double exhaustive_expectation(const Policy& policy, const ValidatedSpec& spec, int slots,
                              std::span<const double> x0, std::span<const std::size_t> s0,
                              std::size_t max_paths = 10000);

void write_trajectory_csv(const Trajectory& t, std::ostream& out);
void write_stats_csv(const std::string& policy, const CostStats& stats, std::ostream& out);
/// One row per policy under a single header.
void write_stats_csv(const std::vector<std::pair<std::string, CostStats>>& rows,
                     std::ostream& out);

}  // namespace underflow
