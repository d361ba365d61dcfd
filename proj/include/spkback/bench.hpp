// Copyright 2026 The spkback Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spkback/plda.hpp"

namespace spkback {

struct BenchConfig {
  std::size_t dim = 150;
  std::size_t trials = 100000;
  std::size_t utterances = 4000;
  std::size_t cohort = 500;
  double top_fraction = 0.30;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  /// Scored model; a synthetic one of `dim` is used when absent.
  std::optional<PldaModel> model;
};

struct BenchRow {
  std::string kernel;  // "plda" or "cosine"
  bool snorm = false;
  std::size_t trials = 0;
  double seconds = 0.0;
  double trials_per_second = 0.0;
  double mean_latency_us = 0.0;
  /// Single-threaded and multi-threaded score vectors were identical.
  bool deterministic = false;
};

struct BenchReport {
  std::size_t dim = 0;
  unsigned threads = 0;
  std::vector<BenchRow> rows;
};

/// Times trial scoring for both kernels with and without adaptive s-norm.
/// Requires at least 10^4 trials.
BenchReport run_benchmark(const BenchConfig& config);

std::string format_bench(const BenchReport& report, bool tsv);

}  // namespace spkback
