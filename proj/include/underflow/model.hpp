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

// Problem primitives: power-rate curves, holding costs, channel chains and the
// combined problem specification. Everything here is immutable once a
// ValidatedSpec has been produced.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "underflow/errors.hpp"

namespace underflow {

/// Power needed to send z packets in one channel state. Stored uniformly as a
/// piecewise-linear convex curve; a linear curve is the one-segment case.
class PowerRateCurve {
 public:
  PowerRateCurve() = default;
  static PowerRateCurve linear(double slope);
  /// `slopes` has K+1 entries, `breakpoints` has K (where the slope changes).
  static PowerRateCurve piecewise(std::vector<double> slopes,
                                  std::vector<double> breakpoints);

  bool is_linear() const noexcept { return slopes_.size() == 1; }
  std::size_t segments() const noexcept { return slopes_.size(); }
  std::span<const double> slopes() const noexcept { return slopes_; }
  std::span<const double> breakpoints() const noexcept { return breakpoints_; }

  /// Unclipped power for z >= 0.
  double power(double z) const noexcept;

  /// Invariant violations (empty when the curve is strictly increasing and
  /// convex with increasing breakpoints).
  std::vector<Issue> check(double tol) const;

  bool operator==(const PowerRateCurve&) const = default;

 private:
  std::vector<double> slopes_;
  std::vector<double> breakpoints_;
};

/// A power-rate curve with the per-slot peak power folded in. Segments lying
/// entirely beyond z_max are dropped, so the last kept breakpoint is always
/// strictly below z_max.
class EffectiveCurve {
 public:
  EffectiveCurve() = default;
  EffectiveCurve(const PowerRateCurve& base, double peak_power);

  double peak_power() const noexcept { return peak_; }
  double z_max() const noexcept { return z_max_; }
  /// Number of segments K+1 after truncation.
  std::size_t segments() const noexcept { return slopes_.size(); }
  double slope(std::size_t k) const { return slopes_.at(k); }
  /// Right end of segment k: z_k for k < K and z_max for k == K.
  double segment_end(std::size_t k) const;
  /// Left end of segment k (0 for k == 0).
  double segment_start(std::size_t k) const;
  std::span<const double> slopes() const noexcept { return slopes_; }
  /// Interior breakpoints z_0..z_{K-1}.
  std::span<const double> breakpoints() const noexcept { return breakpoints_; }
  double min_slope() const noexcept { return slopes_.front(); }
  double max_slope() const noexcept { return slopes_.back(); }

  /// Exact piecewise-linear evaluation on [0, z_max]; OutOfRange beyond.
  double power_of(double z) const;
  /// Inverse of power_of on [0, P]; OutOfRange outside.
  double rate_of(double power) const;

 private:
  double peak_ = 0.0;
  double z_max_ = 0.0;
  std::vector<double> slopes_;
  std::vector<double> breakpoints_;
  std::vector<double> power_at_break_;  // cumulative power at each breakpoint
};

/// Per-slot holding cost on the post-playout buffer. Convex, nondecreasing,
/// zero at zero.
class HoldingCost {
 public:
  struct Linear {
    double h = 0.0;
    bool operator==(const Linear&) const = default;
  };
  struct Barrier {
    double mu = 0.0;
    double kappa = 0.0;
    bool operator==(const Barrier&) const = default;
  };
  /// Linear interpolation through (x, value) points, the first being (0, 0); the
  /// last slope is extended to infinity.
  struct Tabulated {
    std::vector<double> x;
    std::vector<double> value;
    bool operator==(const Tabulated&) const = default;
  };
  using Kind = std::variant<Linear, Barrier, Tabulated>;

  HoldingCost() : kind_(Linear{0.0}) {}
  explicit HoldingCost(Kind kind) : kind_(std::move(kind)) {}
  static HoldingCost linear(double h) { return HoldingCost(Linear{h}); }
  static HoldingCost barrier(double mu, double kappa) {
    return HoldingCost(Barrier{mu, kappa});
  }

  const Kind& kind() const noexcept { return kind_; }
  double operator()(double x) const;
  /// Rate h when the cost is linear.
  std::optional<double> linear_rate() const;
  /// Points where the slope changes.
  std::vector<double> kinks() const;
  std::vector<Issue> check(double tol) const;

  bool operator==(const HoldingCost&) const = default;

 private:
  Kind kind_;
};

/// Finite Markov chain over channel states with one power-rate curve per state.
struct ChannelModel {
  std::vector<std::string> states;
  /// Row-major |S| x |S| matrix of Pr(S' = s' | S = s).
  std::vector<double> transition;
  std::vector<PowerRateCurve> curves;

  std::size_t size() const noexcept { return states.size(); }
  double prob(std::size_t from, std::size_t to) const {
    return transition[from * states.size() + to];
  }
  std::span<const double> row(std::size_t from) const {
    return {transition.data() + from * states.size(), states.size()};
  }
  /// IID channel with the given per-slot probabilities.
  static ChannelModel iid(std::vector<std::string> labels,
                          const std::vector<double>& probs,
                          std::vector<PowerRateCurve> curves);

  bool operator==(const ChannelModel&) const = default;
};

struct ReceiverSpec {
  ChannelModel channel;
  double demand = 1.0;
  HoldingCost holding;
  double initial_x = 0.0;

  bool operator==(const ReceiverSpec&) const = default;
};

struct ProblemSpec {
  std::vector<ReceiverSpec> receivers;
  double peak_power = 0.0;
  double alpha = 1.0;
  /// Number of slots for finite problems; empty for infinite horizon.
  std::optional<int> horizon;
  double tolerance = 1e-12;

  std::size_t receiver_count() const noexcept { return receivers.size(); }
  bool operator==(const ProblemSpec&) const = default;
};

/// Derived, per-receiver data cached by validate().
struct ReceiverModel {
  std::vector<EffectiveCurve> curves;  // one per channel state
  std::vector<double> stationary;      // long-run state probabilities
  bool iid = false;
  double c_min = 0.0;  // smallest first-segment slope over states
  double c_max = 0.0;  // largest slope over all states and segments
};

class ValidatedSpec {
 public:
  const ProblemSpec& spec() const noexcept { return spec_; }
  const ReceiverSpec& receiver(std::size_t m) const {
    return spec_.receivers.at(m);
  }
  const ReceiverModel& model(std::size_t m) const { return models_.at(m); }
  std::size_t receiver_count() const noexcept { return models_.size(); }
  double peak_power() const noexcept { return spec_.peak_power; }
  double alpha() const noexcept { return spec_.alpha; }
  int horizon() const;  // ConfigError when infinite
  bool finite() const noexcept { return spec_.horizon.has_value(); }

  /// A single-receiver problem for receiver m, keeping P, alpha and horizon.
  ValidatedSpec single(std::size_t m) const;

 private:
  friend ValidatedSpec validate(const ProblemSpec& spec);
  ProblemSpec spec_;
  std::vector<ReceiverModel> models_;
};

/// Checks every invariant and caches derived quantities. Throws
/// ValidationError listing all violations.
ValidatedSpec validate(const ProblemSpec& spec);

double power_of(const EffectiveCurve& curve, double z);
double rate_of(const EffectiveCurve& curve, double power);

/// Stationary distribution of a row-stochastic matrix (power iteration).
std::vector<double> stationary_distribution(const ChannelModel& channel);

}  // namespace underflow
