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

// Batch experiment runner. One command per run; artifacts go to
// <out>/<command>-<spec hash>.csv (plus command-specific side tables) and a
// run manifest <command>-<spec hash>.manifest.json holding inputs, versions,
// seeds and timings. Only the manifest carries timestamps.

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace underflow::cli {

enum ExitCode : int { kOk = 0, kViolation = 1, kConfig = 2, kResource = 3 };

struct ExperimentConfig {
  std::string spec_path;
  std::string command;
  double grid_step = 0.0;  // 0 -> d / 10
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::vector<double> alpha_ladder{0.9, 0.95, 0.99, 0.995};
  std::size_t episodes = 10000;
  std::size_t sim_slots = 1000000;  // average-cost check simulation
};

const std::vector<std::string>& commands();

/// Runs one command. Progress and errors go to `log`; returns an ExitCode.
int run(const ExperimentConfig& config, std::ostream& log);

/// Parses flags (with UNDERFLOW_* environment fallbacks) and calls run().
int main(int argc, char** argv);

}  // namespace underflow::cli
