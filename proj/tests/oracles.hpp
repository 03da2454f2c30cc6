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

// Reference computations used only by tests. Deliberately naive: plain node
// enumeration, no interpolation, no shared code with the solvers beyond the
// spec types.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "underflow/model.hpp"
#include "underflow/spec_io.hpp"

namespace oracle {

using underflow::ProblemSpec;
using underflow::ValidatedSpec;

inline std::string fixture(const std::string& name) {
  return std::string(UNDERFLOW_FIXTURES) + "/" + name;
}

inline ValidatedSpec load(const std::string& name) {
  return underflow::validate(underflow::load_spec(fixture(name)));
}

/// Power of z packets from the raw slopes and breakpoints; no clipping.
inline double raw_power(const underflow::PowerRateCurve& c, double z) {
  double p = 0.0, left = 0.0;
  const auto sl = c.slopes();
  const auto bp = c.breakpoints();
  for (std::size_t k = 0; k < sl.size(); ++k) {
    const double right = k < bp.size() ? bp[k] : std::numeric_limits<double>::infinity();
    if (z <= left) break;
    p += sl[k] * (std::min(z, right) - left);
    left = right;
  }
  return p;
}

/// Brute-force single-receiver DP on nodes x = i * step, actions restricted
/// to node-to-node moves. V[n][s][i], n = 0..N.
struct Brute1D {
  double step = 0.0;
  std::size_t nodes = 0;
  std::vector<std::vector<std::vector<double>>> V;
  std::vector<std::vector<std::vector<double>>> z;  // smallest optimal z
};

inline Brute1D brute_1rx(const ProblemSpec& spec, double step, int horizon, double x_max) {
  const auto& rx = spec.receivers.at(0);
  const std::size_t S = rx.channel.size();
  const double d = rx.demand;
  const long nd = std::lround(d / step);
  Brute1D out;
  out.step = step;
  out.nodes = static_cast<std::size_t>(std::lround(x_max / step)) + 1;
  const long I = static_cast<long>(out.nodes);
  out.V.assign(static_cast<std::size_t>(horizon + 1),
               std::vector<std::vector<double>>(S, std::vector<double>(out.nodes, 0.0)));
  out.z = out.V;
  auto hold = [&](double u) {
    const auto& k = rx.holding.kind();
    if (auto* lin = std::get_if<underflow::HoldingCost::Linear>(&k)) return lin->h * u;
    return rx.holding(u);
  };
  for (int n = 1; n <= horizon; ++n)
    for (std::size_t s = 0; s < S; ++s)
      for (long i = 0; i < I; ++i) {
        double best = std::numeric_limits<double>::infinity(), arg = 0.0;
        for (long to = std::max(i, nd); to - nd < I; ++to) {
          const double zz = static_cast<double>(to - i) * step;
          const double pw = raw_power(rx.channel.curves[s], zz);
          if (pw > spec.peak_power + 1e-12) break;
          double cont = 0.0;
          for (std::size_t t = 0; t < S; ++t)
            cont += rx.channel.prob(s, t) * out.V[n - 1][t][static_cast<std::size_t>(to - nd)];
          const double v = pw + hold(static_cast<double>(to - nd) * step) + spec.alpha * cont;
          if (std::isinf(best) || v < best - 1e-12 * (1.0 + std::abs(best))) {
            best = v;
            arg = zz;
          }
        }
        out.V[n][s][static_cast<std::size_t>(i)] = best;
        out.z[n][s][static_cast<std::size_t>(i)] = arg;
      }
  return out;
}

/// gamma(n, j) from value differences of the brute-force DP on an IID
/// channel: -h + (alpha / d) E[V_{n-1}((j-2) d) - V_{n-1}((j-1) d)].
inline double gamma_from_values(const ProblemSpec& spec, const Brute1D& b, int n, int j) {
  const auto& rx = spec.receivers.at(0);
  const double d = rx.demand;
  const long nd = std::lround(d / b.step);
  const auto& lin = std::get<underflow::HoldingCost::Linear>(rx.holding.kind());
  double e = 0.0;
  for (std::size_t t = 0; t < rx.channel.size(); ++t) {
    const auto& v = b.V[static_cast<std::size_t>(n - 1)][t];
    e += rx.channel.prob(0, t) *
         (v[static_cast<std::size_t>((j - 2) * nd)] - v[static_cast<std::size_t>((j - 1) * nd)]);
  }
  return -lin.h + spec.alpha / d * e;
}

/// Expected discounted cost of a one-receiver policy, summing over every
/// channel path. `act(n, x, s)` returns packets sent.
inline double exhaustive_1rx(const ProblemSpec& spec, int horizon, double x0, std::size_t s0,
                             const std::function<double(int, double, std::size_t)>& act) {
  const auto& rx = spec.receivers.at(0);
  const std::size_t S = rx.channel.size();
  std::function<double(int, double, std::size_t)> go = [&](int n, double x,
                                                           std::size_t s) -> double {
    if (n == 0) return 0.0;
    const double z = act(n, x, s);
    const double y = x + z;
    const double stage = raw_power(rx.channel.curves[s], z) + rx.holding(y - rx.demand);
    double cont = 0.0;
    for (std::size_t t = 0; t < S; ++t) {
      const double p = rx.channel.prob(s, t);
      if (p > 0.0) cont += p * go(n - 1, y - rx.demand, t);
    }
    return stage + spec.alpha * cont;
  };
  return go(horizon, x0, s0);
}

/// Random single-receiver instance meeting the closed-form preconditions:
/// IID channel, linear holding, and all coverage counts integral.
inline ProblemSpec random_threshold_instance(std::mt19937_64& rng, bool piecewise) {
  std::uniform_int_distribution<int> states(1, 4), horizon(2, 8), small(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ProblemSpec spec;
  const int S = states(rng);
  const double d = 1.0;
  spec.horizon = horizon(rng);
  spec.alpha = 0.8 + 0.2 * unit(rng);
  std::vector<double> probs(static_cast<std::size_t>(S));
  double total = 0.0;
  for (auto& p : probs) total += (p = 0.1 + unit(rng));
  for (auto& p : probs) p /= total;
  std::vector<underflow::PowerRateCurve> curves;
  std::vector<std::string> labels;
  if (!piecewise) {
    const double P = 2.0 + 4.0 * unit(rng);
    for (int s = 0; s < S; ++s) {
      const int l = std::uniform_int_distribution<int>(1, 4)(rng);
      curves.push_back(underflow::PowerRateCurve::linear(P / (l * d)));
      labels.push_back("s" + std::to_string(s));
    }
    spec.peak_power = P;
  } else {
    // Integer breakpoints and a final slope chosen so z_max is integral.
    struct Draft {
      std::vector<double> slopes, breaks;
      double used = 0.0;
      double zmax = 0.0;
    };
    std::vector<Draft> drafts;
    double P = 0.0;
    for (int s = 0; s < S; ++s) {
      Draft dr;
      const int K = std::uniform_int_distribution<int>(0, 2)(rng);
      double slope = 0.5 + unit(rng), z = 0.0;
      for (int k = 0; k < K; ++k) {
        const double next = z + small(rng);
        dr.slopes.push_back(slope);
        dr.used += slope * (next - z);
        dr.breaks.push_back(next);
        z = next;
        slope += 0.2 + unit(rng);
      }
      dr.zmax = z + small(rng);
      dr.slopes.push_back(slope);  // provisional
      P = std::max(P, dr.used + slope * (dr.zmax - z));
      drafts.push_back(dr);
    }
    for (int s = 0; s < S; ++s) {
      auto& dr = drafts[static_cast<std::size_t>(s)];
      const double last_start = dr.breaks.empty() ? 0.0 : dr.breaks.back();
      dr.slopes.back() = (P - dr.used) / (dr.zmax - last_start);
      curves.push_back(underflow::PowerRateCurve::piecewise(dr.slopes, dr.breaks));
      labels.push_back("s" + std::to_string(s));
    }
    spec.peak_power = P;
  }
  underflow::ReceiverSpec rx;
  rx.channel = underflow::ChannelModel::iid(labels, probs, curves);
  rx.demand = d;
  rx.holding = underflow::HoldingCost::linear(0.5 * unit(rng));
  spec.receivers.push_back(rx);
  return spec;
}

/// Two receivers, linear curves, Markov channels with 2 or 3 states, d = 1,
/// N = 3, and P large enough to cover both demands in every joint state.
inline ProblemSpec random_two_rx_instance(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ProblemSpec spec;
  spec.horizon = 3;
  spec.alpha = unit(rng) < 0.5 ? 1.0 : 0.9;
  double need = 0.0;
  for (int m = 0; m < 2; ++m) {
    const int S = unit(rng) < 0.5 ? 2 : 3;
    underflow::ReceiverSpec rx;
    double c_max = 0.0;
    for (int s = 0; s < S; ++s) {
      const double c = 1.0 + 2.0 * unit(rng);
      c_max = std::max(c_max, c);
      rx.channel.states.push_back("s" + std::to_string(s));
      rx.channel.curves.push_back(underflow::PowerRateCurve::linear(c));
      std::vector<double> row(static_cast<std::size_t>(S));
      double total = 0.0;
      for (auto& p : row) total += (p = 0.1 + unit(rng));
      for (auto& p : row) rx.channel.transition.push_back(p / total);
    }
    rx.demand = 1.0;
    rx.holding = underflow::HoldingCost::linear(0.3 * unit(rng));
    need += c_max * rx.demand;
    spec.receivers.push_back(rx);
  }
  spec.peak_power = need * (1.0 + unit(rng));
  return spec;
}

}  // namespace oracle
