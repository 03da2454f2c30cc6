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

#include "underflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace underflow {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InfeasiblePower: return "InfeasiblePower";
    case ErrorCode::NonConvexCurve: return "NonConvexCurve";
    case ErrorCode::BadStochasticMatrix: return "BadStochasticMatrix";
    case ErrorCode::BadHoldingCost: return "BadHoldingCost";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::GridMisaligned: return "GridMisaligned";
    case ErrorCode::MemoryBudgetExceeded: return "MemoryBudgetExceeded";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::DualSearchDiverged: return "DualSearchDiverged";
    case ErrorCode::PolicyInfeasibleAction: return "PolicyInfeasibleAction";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

Error::Error(ErrorCode code, const std::string& what, Verbatim)
    : std::runtime_error(what), code_(code) {}

namespace {

std::string join_issues(const std::vector<Issue>& issues) {
  std::ostringstream out;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) out << "; ";
    out << to_string(issues[i].code) << ": " << issues[i].message;
  }
  return out.str();
}

}  // namespace

ValidationError::ValidationError(std::vector<Issue> issues)
    : Error(issues.empty() ? ErrorCode::ConfigError : issues.front().code,
            join_issues(issues), Verbatim{}),
      issues_(std::move(issues)) {}

bool ValidationError::has(ErrorCode code) const noexcept {
  return std::any_of(issues_.begin(), issues_.end(),
                     [code](const Issue& i) { return i.code == code; });
}

// ---------------------------------------------------------------------------
// PowerRateCurve

PowerRateCurve PowerRateCurve::linear(double slope) {
  PowerRateCurve c;
  c.slopes_ = {slope};
  return c;
}

PowerRateCurve PowerRateCurve::piecewise(std::vector<double> slopes,
                                         std::vector<double> breakpoints) {
  PowerRateCurve c;
  c.slopes_ = std::move(slopes);
  c.breakpoints_ = std::move(breakpoints);
  return c;
}

double PowerRateCurve::power(double z) const noexcept {
  double p = z * slopes_.front();
  for (std::size_t k = 0; k < breakpoints_.size(); ++k)
    p += (slopes_[k + 1] - slopes_[k]) * std::max(z - breakpoints_[k], 0.0);
  return p;
}

std::vector<Issue> PowerRateCurve::check(double tol) const {
  std::vector<Issue> out;
  if (slopes_.empty()) {
    out.push_back({ErrorCode::NonConvexCurve, "curve has no segments"});
    return out;
  }
  if (breakpoints_.size() + 1 != slopes_.size()) {
    out.push_back({ErrorCode::NonConvexCurve,
                   "need exactly one breakpoint fewer than slopes"});
    return out;
  }
  if (!(slopes_.front() > 0.0) || !std::isfinite(slopes_.front()))
    out.push_back({ErrorCode::NonConvexCurve, "first slope must be positive"});
  for (std::size_t k = 1; k < slopes_.size(); ++k)
    if (slopes_[k] < slopes_[k - 1] - tol || !std::isfinite(slopes_[k]))
      out.push_back({ErrorCode::NonConvexCurve, "slopes must be nondecreasing"});
  for (std::size_t k = 0; k < breakpoints_.size(); ++k) {
    const double prev = k == 0 ? 0.0 : breakpoints_[k - 1];
    if (!(breakpoints_[k] > prev))
      out.push_back(
          {ErrorCode::NonConvexCurve, "breakpoints must be strictly increasing and positive"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// EffectiveCurve

EffectiveCurve::EffectiveCurve(const PowerRateCurve& base, double peak_power)
    : peak_(peak_power) {
  const auto slopes = base.slopes();
  const auto breaks = base.breakpoints();
  slopes_.push_back(slopes.front());
  double z = 0.0, p = 0.0;
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const double p_next = p + slopes_.back() * (breaks[k] - z);
    if (p_next >= peak_power) break;
    z = breaks[k];
    p = p_next;
    breakpoints_.push_back(z);
    power_at_break_.push_back(p);
    slopes_.push_back(slopes[k + 1]);
  }
  z_max_ = z + (peak_power - p) / slopes_.back();
}

double EffectiveCurve::segment_end(std::size_t k) const {
  if (k + 1 < slopes_.size()) return breakpoints_.at(k);
  if (k + 1 == slopes_.size()) return z_max_;
  throw Error(ErrorCode::OutOfRange, "segment index beyond last segment");
}

double EffectiveCurve::segment_start(std::size_t k) const {
  return k == 0 ? 0.0 : breakpoints_.at(k - 1);
}

double EffectiveCurve::power_of(double z) const {
  if (z < -1e-12 || z > z_max_ + 1e-12)
    throw Error(ErrorCode::OutOfRange, "packets outside [0, z_max]");
  z = std::clamp(z, 0.0, z_max_);
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), z);
  const auto k = static_cast<std::size_t>(it - breakpoints_.begin());
  if (k == 0) return z * slopes_[0];
  return power_at_break_[k - 1] + slopes_[k] * (z - breakpoints_[k - 1]);
}

double EffectiveCurve::rate_of(double power) const {
  if (power < -1e-12 || power > peak_ + 1e-12)
    throw Error(ErrorCode::OutOfRange, "power outside [0, P]");
  power = std::clamp(power, 0.0, peak_);
  const auto it =
      std::upper_bound(power_at_break_.begin(), power_at_break_.end(), power);
  const auto k = static_cast<std::size_t>(it - power_at_break_.begin());
  if (k == 0) return power / slopes_[0];
  return breakpoints_[k - 1] + (power - power_at_break_[k - 1]) / slopes_[k];
}

double power_of(const EffectiveCurve& curve, double z) {
  return curve.power_of(z);
}
double rate_of(const EffectiveCurve& curve, double power) {
  return curve.rate_of(power);
}

// ---------------------------------------------------------------------------
// HoldingCost

double HoldingCost::operator()(double x) const {
  x = std::max(x, 0.0);
  return std::visit(
      [x](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Linear>) {
          return k.h * x;
        } else if constexpr (std::is_same_v<T, Barrier>) {
          return x <= k.mu ? 0.0 : k.kappa * (x - k.mu);
        } else {
          const auto& xs = k.x;
          const auto& vs = k.value;
          if (xs.size() < 2) return 0.0;
          auto it = std::upper_bound(xs.begin(), xs.end(), x);
          std::size_t i = static_cast<std::size_t>(it - xs.begin());
          i = std::clamp<std::size_t>(i, 1, xs.size() - 1);
          const double slope = (vs[i] - vs[i - 1]) / (xs[i] - xs[i - 1]);
          return vs[i - 1] + slope * (x - xs[i - 1]);
        }
      },
      kind_);
}

std::optional<double> HoldingCost::linear_rate() const {
  if (const auto* lin = std::get_if<Linear>(&kind_)) return lin->h;
  return std::nullopt;
}

std::vector<double> HoldingCost::kinks() const {
  if (const auto* b = std::get_if<Barrier>(&kind_)) return {b->mu};
  if (const auto* t = std::get_if<Tabulated>(&kind_)) {
    if (t->x.size() <= 2) return {};
    return {t->x.begin() + 1, t->x.end() - 1};
  }
  return {};
}

std::vector<Issue> HoldingCost::check(double tol) const {
  std::vector<Issue> out;
  auto bad = [&](const std::string& m) {
    out.push_back({ErrorCode::BadHoldingCost, m});
  };
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Linear>) {
          if (!(k.h >= 0.0) || !std::isfinite(k.h)) bad("linear rate must be >= 0");
        } else if constexpr (std::is_same_v<T, Barrier>) {
          if (!(k.mu >= 0.0)) bad("barrier mu must be >= 0");
          if (!(k.kappa >= 0.0)) bad("barrier kappa must be >= 0");
        } else {
          if (k.x.size() != k.value.size() || k.x.size() < 2) {
            bad("tabulated cost needs matching x/value lists of length >= 2");
            return;
          }
          if (k.x.front() != 0.0 || k.value.front() != 0.0)
            bad("tabulated cost must start at (0, 0)");
          double prev_slope = 0.0;
          for (std::size_t i = 1; i < k.x.size(); ++i) {
            if (!(k.x[i] > k.x[i - 1])) {
              bad("tabulated x must be strictly increasing");
              return;
            }
            const double s = (k.value[i] - k.value[i - 1]) / (k.x[i] - k.x[i - 1]);
            if (s < -tol) bad("tabulated cost must be nondecreasing");
            if (s < prev_slope - tol) bad("tabulated cost must be convex");
            prev_slope = s;
          }
        }
      },
      kind_);
  return out;
}

// ---------------------------------------------------------------------------
// Channel

ChannelModel ChannelModel::iid(std::vector<std::string> labels,
                               const std::vector<double>& probs,
                               std::vector<PowerRateCurve> curves) {
  ChannelModel ch;
  ch.states = std::move(labels);
  ch.curves = std::move(curves);
  const std::size_t n = probs.size();
  ch.transition.reserve(n * n);
  for (std::size_t r = 0; r < n; ++r)
    ch.transition.insert(ch.transition.end(), probs.begin(), probs.end());
  return ch;
}

std::vector<double> stationary_distribution(const ChannelModel& channel) {
  const std::size_t n = channel.size();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), next(n);
  // Lazy chain (P + I) / 2 has the same stationary law and is aperiodic.
  for (int iter = 0; iter < 100000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        next[j] += 0.5 * pi[i] * (channel.prob(i, j) + (i == j ? 1.0 : 0.0));
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(next[j] - pi[j]));
    pi.swap(next);
    if (diff < 1e-15) break;
  }
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& p : pi) p /= total;
  return pi;
}

// ---------------------------------------------------------------------------
// Validation

int ValidatedSpec::horizon() const {
  if (!spec_.horizon)
    throw Error(ErrorCode::ConfigError, "problem has an infinite horizon");
  return *spec_.horizon;
}

ValidatedSpec ValidatedSpec::single(std::size_t m) const {
  ValidatedSpec out;
  out.spec_ = spec_;
  out.spec_.receivers = {spec_.receivers.at(m)};
  out.models_ = {models_.at(m)};
  return out;
}

ValidatedSpec validate(const ProblemSpec& spec) {
  std::vector<Issue> issues;
  const double tol = spec.tolerance;
  auto fail = [&](ErrorCode c, const std::string& m) { issues.push_back({c, m}); };

  if (spec.receivers.empty()) fail(ErrorCode::ConfigError, "no receivers");
  if (!(spec.peak_power > 0.0) || !std::isfinite(spec.peak_power))
    fail(ErrorCode::InfeasiblePower, "peak power must be positive");
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0))
    fail(ErrorCode::ConfigError, "alpha must lie in [0, 1]");
  if (!spec.horizon && !(spec.alpha < 1.0))
    fail(ErrorCode::ConfigError, "infinite horizon requires alpha < 1");
  if (spec.horizon && *spec.horizon < 1)
    fail(ErrorCode::ConfigError, "horizon must be at least one slot");

  ValidatedSpec out;
  out.spec_ = spec;
  double worst_case_power = 0.0;
  for (std::size_t m = 0; m < spec.receivers.size(); ++m) {
    const auto& rx = spec.receivers[m];
    const auto& ch = rx.channel;
    const std::string tag = "receiver " + std::to_string(m) + ": ";
    const std::size_t n = ch.size();
    ReceiverModel model;
    if (n == 0) {
      fail(ErrorCode::BadStochasticMatrix, tag + "no channel states");
      out.models_.push_back(model);
      continue;
    }
    if (ch.transition.size() != n * n) {
      fail(ErrorCode::BadStochasticMatrix, tag + "transition matrix must be |S| x |S|");
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double v = ch.prob(r, c);
          if (!(v >= 0.0)) fail(ErrorCode::BadStochasticMatrix, tag + "negative transition entry");
          sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
          fail(ErrorCode::BadStochasticMatrix,
               tag + "row " + std::to_string(r) + " does not sum to 1");
      }
    }
    if (ch.curves.size() != n) {
      fail(ErrorCode::NonConvexCurve, tag + "need one power-rate curve per state");
      out.models_.push_back(model);
      continue;
    }
    if (!(rx.demand > 0.0)) fail(ErrorCode::ConfigError, tag + "demand must be positive");
    if (!(rx.initial_x >= 0.0)) fail(ErrorCode::ConfigError, tag + "initial buffer must be >= 0");
    for (auto& i : rx.holding.check(tol)) fail(i.code, tag + i.message);

    bool curves_ok = true;
    for (const auto& curve : ch.curves)
      for (auto& i : curve.check(tol)) {
        fail(i.code, tag + i.message);
        curves_ok = false;
      }
    if (!curves_ok || !(spec.peak_power > 0.0)) {
      out.models_.push_back(model);
      continue;
    }

    double worst_demand_power = 0.0;
    model.c_min = ch.curves.front().slopes().front();
    for (std::size_t s = 0; s < n; ++s) {
      model.curves.emplace_back(ch.curves[s], spec.peak_power);
      const auto& eff = model.curves.back();
      model.c_min = std::min(model.c_min, eff.min_slope());
      model.c_max = std::max(model.c_max, eff.max_slope());
      if (eff.z_max() < rx.demand - tol * std::max(1.0, rx.demand))
        fail(ErrorCode::InfeasiblePower,
             tag + "state '" + ch.states[s] + "' cannot cover one slot of demand");
      worst_demand_power = std::max(worst_demand_power, ch.curves[s].power(rx.demand));
    }
    worst_case_power += worst_demand_power;

    if (ch.transition.size() == n * n) {
      double divergence = 0.0;
      for (std::size_t r = 1; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
          divergence = std::max(divergence, std::abs(ch.prob(r, c) - ch.prob(0, c)));
      model.iid = divergence < 1e-12;
      model.stationary = model.iid ? std::vector<double>(ch.row(0).begin(), ch.row(0).end())
                                   : stationary_distribution(ch);
    }
    out.models_.push_back(std::move(model));
  }
  if (worst_case_power > spec.peak_power * (1.0 + tol) + tol)
    fail(ErrorCode::InfeasiblePower,
         "worst-case joint state needs more than the peak power to cover demand");

  if (!issues.empty()) throw ValidationError(std::move(issues));
  return out;
}

}  // namespace underflow
