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

#include "underflow/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "underflow/util.hpp"

namespace underflow {

double counter_uniform(std::uint64_t seed, std::uint64_t episode, std::uint64_t slot,
                       std::uint64_t stream) noexcept {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ episode);
  k = splitmix64(k ^ slot);
  k = splitmix64(k ^ stream);
  return static_cast<double>(k >> 11) * 0x1.0p-53;
}

std::size_t sample_index(std::span<const double> p, double u) noexcept {
  double acc = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    acc += p[t];
    if (u < acc) return t;
  }
  // Rounding left u above the total: last state with positive mass.
  for (std::size_t t = p.size(); t-- > 0;)
    if (p[t] > 0.0) return t;
  return p.size() - 1;
}

// ---------------------------------------------------------------------------
// Policies

JustInTimePolicy::JustInTimePolicy(const ValidatedSpec& spec) {
  for (std::size_t m = 0; m < spec.receiver_count(); ++m)
    demand_.push_back(spec.receiver(m).demand);
}

void JustInTimePolicy::act(int, std::span<const double> x, std::span<const std::size_t>,
                           std::span<double> z) const {
  for (std::size_t m = 0; m < demand_.size(); ++m) z[m] = std::max(0.0, demand_[m] - x[m]);
}

OpportunisticGreedyPolicy::OpportunisticGreedyPolicy(const ValidatedSpec& spec)
    : peak_(spec.peak_power()) {
  for (std::size_t m = 0; m < spec.receiver_count(); ++m) {
    const auto& model = spec.model(m);
    demand_.push_back(spec.receiver(m).demand);
    curves_.push_back(model.curves);
    std::vector<bool> cheap;
    for (const auto& c : model.curves) cheap.push_back(c.min_slope() <= model.c_min);
    cheapest_.push_back(std::move(cheap));
  }
}

void OpportunisticGreedyPolicy::act(int n, std::span<const double> x,
                                    std::span<const std::size_t> s,
                                    std::span<double> z) const {
  const std::size_t M = demand_.size();
  double left = peak_;
  for (std::size_t m = 0; m < M; ++m) {
    z[m] = std::max(0.0, demand_[m] - x[m]);
    left -= curves_[m][s[m]].power_of(std::min(z[m], curves_[m][s[m]].z_max()));
  }
  for (std::size_t m = 0; m < M; ++m) {
    if (!cheapest_[m][s[m]] || left <= 0.0) continue;
    const auto& c = curves_[m][s[m]];
    const double want = std::max(z[m], n * demand_[m] - x[m]);
    const double used = c.power_of(z[m]);
    const double cap = c.rate_of(std::min(c.peak_power(), used + left));
    const double next = std::min(want, cap);
    left -= c.power_of(next) - used;
    z[m] = next;
  }
}

void BaseStockSimPolicy::act(int n, std::span<const double> x, std::span<const std::size_t> s,
                             std::span<double> z) const {
  z[0] = policy_.action(n, x[0], s[0]).z;
}

void GridPolicy1D::act(int n, std::span<const double> x, std::span<const std::size_t> s,
                       std::span<double> z) const {
  z[0] = grid_->decide(stationary_ ? 1 : n, s[0], x[0]).z;
}

void GridPolicy2D::act(int n, std::span<const double> x, std::span<const std::size_t> s,
                       std::span<double> z) const {
  const auto& m = grid_->model;
  const auto dec = grid_->decide(stationary_ ? 1 : n, m.joint(s[0], s[1]), x[0], x[1]);
  z[0] = std::max(0.0, dec.y[0] - x[0]);
  z[1] = std::max(0.0, dec.y[1] - x[1]);
}

void StructuredPolicy::act(int n, std::span<const double> x, std::span<const std::size_t> s,
                           std::span<double> z) const {
  const auto& m = policy_.grid().model;
  const auto y = policy_.action(n, m.joint(s[0], s[1]), x[0], x[1]);
  z[0] = std::max(0.0, y[0] - x[0]);
  z[1] = std::max(0.0, y[1] - x[1]);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct SlotOutcome {
  double power = 0.0;
  double holding = 0.0;
  std::string error;  // empty when feasible
};

/// Checks z against the constraints, then moves x to the next slot.
SlotOutcome apply(const ValidatedSpec& spec, std::span<const std::size_t> s,
                  std::span<double> x, std::span<const double> z, double tol) {
  SlotOutcome out;
  const std::size_t M = spec.receiver_count();
  for (std::size_t m = 0; m < M; ++m) {
    const auto& rx = spec.receiver(m);
    const auto& curve = spec.model(m).curves[s[m]];
    if (!std::isfinite(z[m]) || z[m] < -tol) {
      out.error = "receiver " + std::to_string(m) + ": negative or non-finite z";
      return out;
    }
    if (x[m] + z[m] < rx.demand - tol) {
      out.error = "receiver " + std::to_string(m) + ": underflow, x + z = " +
                  format_double(x[m] + z[m]) + " < d";
      return out;
    }
    if (z[m] > curve.z_max() + tol) {
      out.error = "receiver " + std::to_string(m) + ": z above the peak-power rate";
      return out;
    }
    out.power += curve.power_of(std::clamp(z[m], 0.0, curve.z_max()));
  }
  const double P = spec.peak_power();
  if (out.power > P + tol * (1.0 + P)) {
    out.error = "power " + format_double(out.power) + " above peak " + format_double(P);
    return out;
  }
  for (std::size_t m = 0; m < M; ++m) {
    const double d = spec.receiver(m).demand;
    const double u = std::max(0.0, x[m] + std::max(0.0, z[m]) - d);
    out.holding += spec.receiver(m).holding(u);
    x[m] = u;
  }
  return out;
}

}  // namespace

Trajectory simulate_episode(const Policy& policy, const ValidatedSpec& spec,
                            const SimOptions& opt, std::uint64_t episode, bool record) {
  const std::size_t M = spec.receiver_count();
  if (policy.receivers() != M)
    throw Error(ErrorCode::ConfigError, "policy '" + policy.name() + "' drives " +
                                            std::to_string(policy.receivers()) +
                                            " receivers, spec has " + std::to_string(M));
  const int T = opt.slots > 0 ? opt.slots : spec.horizon();
  Trajectory tr;
  tr.seed = opt.seed;
  tr.episode = episode;

  std::vector<double> x(M), z(M);
  std::vector<std::size_t> s(M);
  for (std::size_t m = 0; m < M; ++m) {
    x[m] = opt.x0.empty() ? spec.receiver(m).initial_x : opt.x0.at(m);
    s[m] = opt.s0.empty()
               ? sample_index(spec.model(m).stationary, counter_uniform(opt.seed, episode, 0, m))
               : opt.s0.at(m);
  }
  const double alpha = spec.alpha();
  double weight = 1.0;
  for (int t = 0; t < T; ++t) {
    const int n = T - t;
    policy.act(n, x, s, z);
    SlotRecord rec;
    if (record) {
      rec.n = n;
      rec.s = s;
      rec.x = x;
      rec.z = z;
    }
    const auto out = apply(spec, s, x, z, opt.tol);
    if (!out.error.empty()) {
      tr.aborted = true;
      tr.abort_reason = "slot " + std::to_string(t) + ": " + out.error;
      return tr;
    }
    const double cost = out.power + out.holding;
    tr.discounted += weight * cost;
    tr.undiscounted += cost;
    weight *= alpha;
    ++tr.slots;
    if (record) {
      rec.power = out.power;
      rec.holding = out.holding;
      tr.records.push_back(std::move(rec));
    }
    for (std::size_t m = 0; m < M; ++m)
      s[m] = sample_index(spec.receiver(m).channel.row(s[m]),
                          counter_uniform(opt.seed, episode, static_cast<std::uint64_t>(t) + 1, m));
  }
  return tr;
}

SimResult simulate(const Policy& policy, const ValidatedSpec& spec, const SimOptions& opt) {
  if (opt.episodes == 0) throw Error(ErrorCode::ConfigError, "need at least one episode");
  std::vector<Trajectory> runs(opt.episodes);
  parallel_for(opt.episodes, opt.workers, [&](std::size_t e) {
    runs[e] = simulate_episode(policy, spec, opt, e, opt.keep_trajectories);
  });

  SimResult res;
  res.costs.resize(opt.episodes);
  std::vector<double> ok, per_slot;
  for (std::size_t e = 0; e < opt.episodes; ++e) {
    const auto& r = runs[e];
    if (r.aborted) {
      res.costs[e] = std::numeric_limits<double>::quiet_NaN();
      ++res.stats.aborted;
      if (res.abort_reasons.size() < 10)
        res.abort_reasons.push_back("episode " + std::to_string(e) + ", " + r.abort_reason);
      continue;
    }
    res.costs[e] = r.discounted;
    ok.push_back(r.discounted);
    per_slot.push_back(r.slots > 0 ? r.undiscounted / r.slots : 0.0);
  }
  auto& st = res.stats;
  st.episodes = ok.size();
  if (!ok.empty()) {
    const double k = static_cast<double>(ok.size());
    st.mean = pairwise_sum(ok) / k;
    st.average = pairwise_sum(per_slot) / k;
    std::vector<double> sq(ok.size());
    for (std::size_t i = 0; i < ok.size(); ++i) sq[i] = (ok[i] - st.mean) * (ok[i] - st.mean);
    const double var = ok.size() > 1 ? pairwise_sum(sq) / (k - 1.0) : 0.0;
    st.std_error = std::sqrt(var / k);
    st.min = *std::min_element(ok.begin(), ok.end());
    st.max = *std::max_element(ok.begin(), ok.end());
  }
  if (opt.keep_trajectories) res.trajectories = std::move(runs);
  return res;
}

namespace {

struct Enumerator {
  const Policy& policy;
  const ValidatedSpec& spec;
  int slots;

  double run(int t, std::vector<double> x, std::vector<std::size_t> s) const {
    const std::size_t M = spec.receiver_count();
    std::vector<double> z(M);
    policy.act(slots - t, x, s, z);
    const auto out = apply(spec, s, x, z, 1e-9);
    if (!out.error.empty())
      throw Error(ErrorCode::PolicyInfeasibleAction,
                  policy.name() + " at slot " + std::to_string(t) + ": " + out.error);
    double total = out.power + out.holding;
    if (t + 1 == slots) return total;

    // Every joint next state, weighted by the product of receiver rows.
    double cont = 0.0;
    std::vector<std::size_t> next(M, 0);
    while (true) {
      double p = 1.0;
      for (std::size_t m = 0; m < M; ++m) p *= spec.receiver(m).channel.prob(s[m], next[m]);
      if (p > 0.0) cont += p * run(t + 1, x, next);
      std::size_t m = 0;
      while (m < M && ++next[m] == spec.receiver(m).channel.size()) next[m++] = 0;
      if (m == M) break;
    }
    return total + spec.alpha() * cont;
  }
};

}  // namespace

double exhaustive_expectation(const Policy& policy, const ValidatedSpec& spec, int slots,
                              std::span<const double> x0, std::span<const std::size_t> s0,
                              std::size_t max_paths) {
  const std::size_t M = spec.receiver_count();
  if (x0.size() != M || s0.size() != M)
    throw Error(ErrorCode::ConfigError, "initial state has the wrong size");
  if (slots < 1) throw Error(ErrorCode::ConfigError, "need at least one slot");
  double joint = 1.0;
  for (std::size_t m = 0; m < M; ++m) joint *= static_cast<double>(spec.receiver(m).channel.size());
  const double paths = std::pow(joint, slots - 1);
  if (paths > static_cast<double>(max_paths))
    throw Error(ErrorCode::ConfigError, format_double(paths) + " channel paths exceed the cap of " +
                                            std::to_string(max_paths));
  const Enumerator e{policy, spec, slots};
  return e.run(0, {x0.begin(), x0.end()}, {s0.begin(), s0.end()});
}

void write_trajectory_csv(const Trajectory& t, std::ostream& out) {
  const std::size_t M = t.records.empty() ? 0 : t.records.front().x.size();
  std::vector<std::string> header{"seed", "episode", "n"};
  for (std::size_t m = 0; m < M; ++m) {
    header.push_back("s" + std::to_string(m + 1));
    header.push_back("x" + std::to_string(m + 1));
    header.push_back("z" + std::to_string(m + 1));
  }
  header.push_back("power");
  header.push_back("holding");
  CsvWriter csv(out, header);
  for (const auto& r : t.records) {
    csv.cell(static_cast<long long>(t.seed)).cell(static_cast<long long>(t.episode)).cell(r.n);
    for (std::size_t m = 0; m < M; ++m) csv.cell(r.s[m]).cell(r.x[m]).cell(r.z[m]);
    csv.cell(r.power).cell(r.holding);
    csv.end_row();
  }
}

void write_stats_csv(const std::string& policy, const CostStats& st, std::ostream& out) {
  write_stats_csv({{policy, st}}, out);
}

void write_stats_csv(const std::vector<std::pair<std::string, CostStats>>& rows,
                     std::ostream& out) {
  CsvWriter csv(out, {"policy", "episodes", "aborted", "mean", "stderr", "min", "max",
                      "average_per_slot"});
  for (const auto& [policy, st] : rows) {
    csv.cell(policy).cell(st.episodes).cell(st.aborted).cell(st.mean).cell(st.std_error);
    csv.cell(st.min).cell(st.max).cell(st.average);
    csv.end_row();
  }
}

}  // namespace underflow
