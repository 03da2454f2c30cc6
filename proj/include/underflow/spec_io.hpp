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

// JSON form of a ProblemSpec. Layout:
//
//   {
//     "peak_power": 2.0,
//     "alpha": 1.0,
//     "horizon": 3,                 // or "infinite"
//     "tolerance": 1e-12,           // optional
//     "receivers": [{
//       "channel": {
//         "states": ["good", "bad"],
//         "transition": [[0.5, 0.5], [0.5, 0.5]],
//         "curve": [{"slopes": [1.0], "breakpoints": []}, ...]
//       },
//       "demand": 1.0,
//       "holding": {"kind": "linear", "h": 0.0},
//       "initial_x": 0.0            // optional
//     }]
//   }
//
// Holding kinds: {"kind":"linear","h"}, {"kind":"barrier","mu","kappa"},
// {"kind":"tabulated","x":[...],"value":[...]}.

#pragma once

#include <string>

#include "json.hpp"
#include "underflow/model.hpp"

namespace underflow {

using Json = nlohmann::ordered_json;

/// Throws Error(ConfigError) on missing keys or wrong types. Does not validate.
ProblemSpec spec_from_json(const Json& j);
Json spec_to_json(const ProblemSpec& spec);

ProblemSpec parse_spec(const std::string& text);
ProblemSpec load_spec(const std::string& path);
/// Canonical text; parse_spec(dump_spec(s)) == s bit for bit.
std::string dump_spec(const ProblemSpec& spec);
void save_spec(const ProblemSpec& spec, const std::string& path);

/// 16 hex digits, FNV-1a over the canonical dump.
std::string spec_hash(const ProblemSpec& spec);

}  // namespace underflow
