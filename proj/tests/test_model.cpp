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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "underflow/model.hpp"
#include "underflow/spec_io.hpp"

using namespace underflow;

namespace {

ProblemSpec one_rx(std::vector<PowerRateCurve> curves, std::vector<double> probs, double P) {
  ProblemSpec spec;
  spec.peak_power = P;
  spec.horizon = 3;
  ReceiverSpec rx;
  std::vector<std::string> labels;
  for (std::size_t s = 0; s < curves.size(); ++s) labels.push_back("s" + std::to_string(s));
  rx.channel = ChannelModel::iid(labels, probs, std::move(curves));
  spec.receivers.push_back(rx);
  return spec;
}

}  // namespace

TEST_CASE("two-state instance validates with z_max = P / c") {
  auto v = validate(one_rx({PowerRateCurve::linear(1), PowerRateCurve::linear(2)}, {.5, .5}, 2));
  CHECK(v.model(0).curves[0].z_max() == doctest::Approx(2.0));
  CHECK(v.model(0).curves[1].z_max() == doctest::Approx(1.0));
  CHECK(v.model(0).iid);
  CHECK(v.model(0).c_min == 1.0);
  CHECK(v.model(0).c_max == 2.0);
}

TEST_CASE("peak power below c d is infeasible") {
  try {
    validate(one_rx({PowerRateCurve::linear(3)}, {1.0}, 2));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.has(ErrorCode::InfeasiblePower));
  }
}

TEST_CASE("four-state benchmark spec is valid") {
  auto v = oracle::load("example2.json");
  CHECK(v.receiver_count() == 2);
  CHECK(v.peak_power() == 4.2);
  CHECK(v.model(0).iid);
}

TEST_CASE("bad matrices and curves are reported together") {
  auto spec = one_rx({PowerRateCurve::piecewise({2, 1}, {1})}, {1.0}, 5);
  spec.receivers[0].channel.transition = {0.9};
  try {
    validate(spec);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.has(ErrorCode::BadStochasticMatrix));
    CHECK(e.has(ErrorCode::NonConvexCurve));
    CHECK(e.issues().size() >= 2);
  }
  CHECK_THROWS_AS(validate(oracle::load("malformed_matrix.json").spec()), ValidationError);
}

TEST_CASE("infinite horizon needs alpha below one") {
  auto spec = one_rx({PowerRateCurve::linear(1)}, {1.0}, 2);
  spec.horizon.reset();
  try {
    validate(spec);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.has(ErrorCode::ConfigError));
  }
  spec.alpha = 0.9;
  CHECK_NOTHROW(validate(spec));
}

TEST_CASE("power_of and rate_of") {
  EffectiveCurve lin(PowerRateCurve::linear(2), 10);
  CHECK(power_of(lin, 1.5) == 3.0);
  CHECK(power_of(lin, 0.0) == 0.0);
  CHECK(rate_of(lin, 4.0) == 2.0);
  CHECK(rate_of(lin, 0.0) == 0.0);

  EffectiveCurve pwl(PowerRateCurve::piecewise({1, 3}, {2}), 10);
  CHECK(power_of(pwl, 3.0) == 5.0);
  CHECK(rate_of(pwl, 5.0) == 3.0);
  CHECK(pwl.z_max() == doctest::Approx(2.0 + 8.0 / 3.0));
  CHECK(power_of(pwl, pwl.z_max()) == doctest::Approx(10.0).epsilon(1e-12));

  CHECK_THROWS_AS(power_of(lin, 5.0 + 1e-9), Error);
  CHECK_THROWS_AS(rate_of(lin, 10.0 + 1e-9), Error);
  CHECK_THROWS_AS(rate_of(lin, -1.0), Error);
}

TEST_CASE("segments beyond the peak power are dropped") {
  EffectiveCurve c(PowerRateCurve::piecewise({1, 2, 4}, {2, 3}), 3.0);
  CHECK(c.segments() == 2);
  CHECK(c.z_max() == doctest::Approx(2.5));
  CHECK(c.breakpoints().back() < c.z_max());
}

TEST_CASE("random curves are convex, increasing and invertible") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> slopes{0.2 + u(rng)}, breaks;
    double z = 0.0;
    const int K = static_cast<int>(u(rng) * 4);
    for (int k = 0; k < K; ++k) {
      z += 0.1 + u(rng);
      breaks.push_back(z);
      slopes.push_back(slopes.back() + u(rng));
    }
    const double P = 1.0 + 10.0 * u(rng);
    EffectiveCurve c(PowerRateCurve::piecewise(slopes, breaks), P);
    CHECK(power_of(c, c.z_max()) == doctest::Approx(P).epsilon(1e-10));
    for (int rep = 0; rep < 20; ++rep) {
      double a = u(rng) * c.z_max(), b = u(rng) * c.z_max(), m = u(rng) * c.z_max();
      if (a > b) std::swap(a, b);
      if (m < a) std::swap(m, a);
      if (m > b) std::swap(m, b);
      if (b - m < 1e-6 || m - a < 1e-6) continue;
      const double s1 = (power_of(c, m) - power_of(c, a)) / (m - a);
      const double s2 = (power_of(c, b) - power_of(c, m)) / (b - m);
      CHECK(s1 <= s2 + 1e-9);
      CHECK(power_of(c, m) > power_of(c, a));
      CHECK(rate_of(c, power_of(c, m)) == doctest::Approx(m).epsilon(1e-10));
    }
  }
}

TEST_CASE("holding costs") {
  CHECK(HoldingCost::linear(0.5)(4.0) == 2.0);
  auto barrier = HoldingCost::barrier(2.0, 10.0);
  CHECK(barrier(1.5) == 0.0);
  CHECK(barrier(3.0) == 10.0);
  CHECK(barrier.kinks() == std::vector<double>{2.0});
  HoldingCost tab(HoldingCost::Tabulated{{0, 1, 2}, {0, 1, 3}});
  CHECK(tab(0.5) == doctest::Approx(0.5));
  CHECK(tab(3.0) == doctest::Approx(5.0));
  CHECK(HoldingCost(HoldingCost::Tabulated{{0, 1, 2}, {0, 2, 3}}).check(1e-12).size() > 0);
}

TEST_CASE("stationary distribution of a two-state chain") {
  ChannelModel ch;
  ch.states = {"a", "b"};
  ch.transition = {0.8, 0.2, 0.3, 0.7};
  ch.curves = {PowerRateCurve::linear(1), PowerRateCurve::linear(2)};
  auto pi = stationary_distribution(ch);
  CHECK(pi[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("specs round-trip through JSON bit for bit") {
  for (const char* name : {"two_state.json", "example2.json", "three_state_iid.json",
                           "pwl_two_state.json", "markov_2rx.json", "single_state.json"}) {
    const auto spec = load_spec(oracle::fixture(name));
    const auto text = dump_spec(spec);
    const auto back = parse_spec(text);
    CHECK(back == spec);
    CHECK(dump_spec(back) == text);
    CHECK(spec_hash(back) == spec_hash(spec));
  }
  auto spec = load_spec(oracle::fixture("two_state.json"));
  spec.peak_power = 0.1 + 0.2;  // not representable exactly in short decimal
  CHECK(parse_spec(dump_spec(spec)).peak_power == spec.peak_power);
  spec.receivers[0].holding = HoldingCost::barrier(1.25, 3.0);
  CHECK(parse_spec(dump_spec(spec)) == spec);
}

TEST_CASE("malformed JSON is a config error") {
  try {
    parse_spec("{\"peak_power\": 2");
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  CHECK_THROWS_AS(parse_spec("{\"peak_power\": 2, \"horizon\": 3}"), Error);
}
