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

#include "underflow/spec_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace underflow {
namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCode::ConfigError, msg);
}

const Json& need(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    config_error(where + ": missing key '" + key + "'");
  return j.at(key);
}

double num(const Json& j, const std::string& where) {
  if (!j.is_number()) config_error(where + ": expected a number");
  return j.get<double>();
}

std::vector<double> num_list(const Json& j, const std::string& where) {
  if (!j.is_array()) config_error(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(num(v, where));
  return out;
}

HoldingCost holding_from_json(const Json& j, const std::string& where) {
  const auto& kind = need(j, "kind", where);
  if (!kind.is_string()) config_error(where + ".kind: expected a string");
  const auto k = kind.get<std::string>();
  if (k == "linear") return HoldingCost::linear(num(need(j, "h", where), where + ".h"));
  if (k == "barrier")
    return HoldingCost::barrier(num(need(j, "mu", where), where + ".mu"),
                                num(need(j, "kappa", where), where + ".kappa"));
  if (k == "tabulated")
    return HoldingCost(HoldingCost::Tabulated{
        num_list(need(j, "x", where), where + ".x"),
        num_list(need(j, "value", where), where + ".value")});
  config_error(where + ".kind: unknown holding kind '" + k + "'");
}

Json holding_to_json(const HoldingCost& h) {
  Json j;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, HoldingCost::Linear>) {
          j["kind"] = "linear";
          j["h"] = k.h;
        } else if constexpr (std::is_same_v<T, HoldingCost::Barrier>) {
          j["kind"] = "barrier";
          j["mu"] = k.mu;
          j["kappa"] = k.kappa;
        } else {
          j["kind"] = "tabulated";
          j["x"] = k.x;
          j["value"] = k.value;
        }
      },
      h.kind());
  return j;
}

}  // namespace

ProblemSpec spec_from_json(const Json& j) {
  if (!j.is_object()) config_error("spec: expected a JSON object");
  ProblemSpec spec;
  spec.peak_power = num(need(j, "peak_power", "spec"), "peak_power");
  spec.alpha = j.contains("alpha") ? num(j.at("alpha"), "alpha") : 1.0;
  const auto& horizon = need(j, "horizon", "spec");
  if (horizon.is_string()) {
    if (horizon.get<std::string>() != "infinite")
      config_error("horizon: expected an integer or \"infinite\"");
  } else if (horizon.is_number_integer()) {
    spec.horizon = horizon.get<int>();
  } else {
    config_error("horizon: expected an integer or \"infinite\"");
  }
  if (j.contains("tolerance")) spec.tolerance = num(j.at("tolerance"), "tolerance");

  const auto& rxs = need(j, "receivers", "spec");
  if (!rxs.is_array()) config_error("receivers: expected an array");
  for (std::size_t m = 0; m < rxs.size(); ++m) {
    const std::string where = "receivers[" + std::to_string(m) + "]";
    const auto& r = rxs[m];
    ReceiverSpec rx;
    const auto& ch = need(r, "channel", where);
    const auto& states = need(ch, "states", where + ".channel");
    if (!states.is_array()) config_error(where + ".channel.states: expected an array");
    for (const auto& s : states) {
      if (!s.is_string()) config_error(where + ".channel.states: expected strings");
      rx.channel.states.push_back(s.get<std::string>());
    }
    const auto& tr = need(ch, "transition", where + ".channel");
    if (!tr.is_array()) config_error(where + ".channel.transition: expected rows");
    for (const auto& row : tr) {
      auto vals = num_list(row, where + ".channel.transition");
      if (vals.size() != rx.channel.states.size())
        config_error(where + ".channel.transition: row length must equal state count");
      rx.channel.transition.insert(rx.channel.transition.end(), vals.begin(), vals.end());
    }
    if (tr.size() != rx.channel.states.size())
      config_error(where + ".channel.transition: row count must equal state count");
    const auto& curves = need(ch, "curve", where + ".channel");
    if (!curves.is_array()) config_error(where + ".channel.curve: expected an array");
    for (std::size_t s = 0; s < curves.size(); ++s) {
      const std::string cw = where + ".channel.curve[" + std::to_string(s) + "]";
      auto slopes = num_list(need(curves[s], "slopes", cw), cw + ".slopes");
      std::vector<double> breaks;
      if (curves[s].contains("breakpoints"))
        breaks = num_list(curves[s].at("breakpoints"), cw + ".breakpoints");
      rx.channel.curves.push_back(
          PowerRateCurve::piecewise(std::move(slopes), std::move(breaks)));
    }
    rx.demand = num(need(r, "demand", where), where + ".demand");
    if (r.contains("holding")) rx.holding = holding_from_json(r.at("holding"), where + ".holding");
    if (r.contains("initial_x")) rx.initial_x = num(r.at("initial_x"), where + ".initial_x");
    spec.receivers.push_back(std::move(rx));
  }
  return spec;
}

Json spec_to_json(const ProblemSpec& spec) {
  Json j;
  j["peak_power"] = spec.peak_power;
  j["alpha"] = spec.alpha;
  if (spec.horizon)
    j["horizon"] = *spec.horizon;
  else
    j["horizon"] = "infinite";
  j["tolerance"] = spec.tolerance;
  Json rxs = Json::array();
  for (const auto& rx : spec.receivers) {
    Json r;
    Json ch;
    ch["states"] = rx.channel.states;
    Json rows = Json::array();
    const std::size_t n = rx.channel.size();
    for (std::size_t i = 0; i < n; ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < n; ++k) row.push_back(rx.channel.transition.at(i * n + k));
      rows.push_back(row);
    }
    ch["transition"] = rows;
    Json curves = Json::array();
    for (const auto& c : rx.channel.curves) {
      Json cj;
      cj["slopes"] = std::vector<double>(c.slopes().begin(), c.slopes().end());
      cj["breakpoints"] = std::vector<double>(c.breakpoints().begin(), c.breakpoints().end());
      curves.push_back(cj);
    }
    ch["curve"] = curves;
    r["channel"] = ch;
    r["demand"] = rx.demand;
    r["holding"] = holding_to_json(rx.holding);
    r["initial_x"] = rx.initial_x;
    rxs.push_back(r);
  }
  j["receivers"] = rxs;
  return j;
}

ProblemSpec parse_spec(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    config_error(std::string("spec is not valid JSON: ") + e.what());
  }
  return spec_from_json(j);
}

ProblemSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open spec file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str());
}

std::string dump_spec(const ProblemSpec& spec) { return spec_to_json(spec).dump(2); }

void save_spec(const ProblemSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) config_error("cannot write spec file '" + path + "'");
  out << dump_spec(spec) << '\n';
}

std::string spec_hash(const ProblemSpec& spec) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : spec_to_json(spec).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace underflow
