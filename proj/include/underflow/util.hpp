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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace underflow {

/// Number of worker threads to use when the caller passes 0.
inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs body(i) for i in [0, count) on up to `workers` threads. Work is split
/// into contiguous blocks so the result never depends on the thread count as
/// long as body only writes to slot i.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& body);

/// Pairwise (cascade) summation; order independent of how values were made.
double pairwise_sum(std::span<const double> values);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Minimal CSV writer with a fixed header.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(const std::string& v);
  void end_row();

 private:
  void sep();
  std::ostream& out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

/// Golden-section search for the minimum of a unimodal f on [lo, hi].
/// Returns the argument with the smallest evaluated value, endpoints included.
double golden_section(const std::function<double(double)>& f, double lo,
                      double hi, double tol);

inline bool near_multiple(double value, double unit, double rel_tol) {
  const double q = value / unit;
  return std::abs(q - std::round(q)) <= rel_tol * std::max(1.0, std::abs(q));
}

}  // namespace underflow
