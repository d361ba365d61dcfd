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

#include "spkback/bench.hpp"

#include <chrono>
#include <cstdio>
#include <unordered_set>

#include "spkback/kernel.hpp"
#include "spkback/parallel.hpp"
#include "spkback/scoring.hpp"
#include "spkback/synth.hpp"

namespace spkback {

namespace {

struct Fixture {
  EmbeddingSet embeddings;
  EmbeddingSet cohort;
  EnrollmentMap enrollment;
  TrialList trials;
};

Fixture make_fixture(const BenchConfig& config, std::size_t dim) {
  const std::size_t per_speaker = 4;
  GenerativeConfig gc = make_config(dim, (config.utterances + per_speaker - 1) / per_speaker,
                                    per_speaker, 1.0, 1.0, config.seed);
  Fixture f;
  f.embeddings = generate(gc);
  GenerativeConfig cc = make_config(dim, config.cohort, 1, 1.0, 1.0, config.seed + 1);
  cc.speaker_prefix = "cohort";
  f.cohort = generate(cc).unlabeled();
  f.enrollment = EnrollmentMap::identity(f.embeddings);

  const std::size_t n = f.embeddings.size();
  if (config.trials > n * (n - 1)) throw DataError("bench: too many trials for the fixture size");
  CounterRng rng(config.seed, 0xBE7C4);
  std::unordered_set<std::uint64_t> seen;
  std::vector<Trial> trials;
  trials.reserve(config.trials);
  while (trials.size() < config.trials) {
    const auto e = rng.below(n);
    const auto t = rng.below(n);
    if (e == t || !seen.insert(e * n + t).second) continue;
    trials.push_back({f.embeddings.utt_id(e), f.embeddings.utt_id(t)});
  }
  f.trials = TrialList(std::move(trials));
  return f;
}

ScoreSet run_once(const Kernel& kernel, const Fixture& f, bool snorm, double top_fraction,
                  unsigned threads) {
  ScoreSet raw = score_trials(kernel, f.embeddings, f.enrollment, f.trials, threads);
  if (!snorm) return raw;
  const CohortScores cohort =
      build_cohort_scores(kernel, f.embeddings, f.enrollment, f.trials, f.cohort, threads);
  return adaptive_snorm(raw, cohort.enroll, cohort.test, top_fraction, threads);
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& config) {
  if (config.trials < 10000) {
    throw DataError("bench: need at least 10000 trials, got " + std::to_string(config.trials));
  }
  if (config.cohort < 2) throw DataError("bench: cohort must have at least 2 utterances");
  const std::size_t dim = config.model ? config.model->dim() : config.dim;
  if (dim == 0) throw DataError("bench: dim must be positive");

  PldaModel model;
  if (config.model) {
    model = *config.model;
  } else {
    const auto d = static_cast<Eigen::Index>(dim);
    model = {Vector::Zero(d), Matrix::Identity(d, d), Matrix::Identity(d, d)};
  }
  const Fixture fixture = make_fixture(config, dim);
  const unsigned threads = config.threads == 0 ? default_threads() : config.threads;

  BenchReport report;
  report.dim = dim;
  report.threads = threads;
  const Kernel kernels[] = {Kernel::plda(model), Kernel::cosine()};
  const char* names[] = {"plda", "cosine"};
  for (int k = 0; k < 2; ++k) {
    for (bool snorm : {false, true}) {
      const auto start = std::chrono::steady_clock::now();
      const ScoreSet timed = run_once(kernels[k], fixture, snorm, config.top_fraction, threads);
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      const unsigned other = threads == 1 ? 4 : 1;
      const ScoreSet check = run_once(kernels[k], fixture, snorm, config.top_fraction, other);

      BenchRow row;
      row.kernel = names[k];
      row.snorm = snorm;
      row.trials = timed.size();
      row.seconds = seconds;
      row.trials_per_second = static_cast<double>(timed.size()) / std::max(seconds, 1e-12);
      row.mean_latency_us = 1e6 * seconds / static_cast<double>(timed.size());
      row.deterministic = timed.scores() == check.scores();
      report.rows.push_back(row);
    }
  }
  return report;
}

std::string format_bench(const BenchReport& report, bool tsv) {
  std::string out;
  char buf[256];
  if (!tsv) {
    std::snprintf(buf, sizeof(buf),
                  "# per-trial scoring throughput at dim %zu with %u thread(s); embeddings are\n"
                  "# given, so this is not an audio real-time factor\n",
                  report.dim, report.threads);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-7s %-6s %9s %10s %13s %12s %13s\n", "kernel", "snorm",
                  "trials", "seconds", "trials/s", "latency_us", "deterministic");
    out += buf;
  } else {
    out += "kernel\tsnorm\ttrials\tseconds\ttrials_per_s\tlatency_us\tdeterministic\n";
  }
  for (const auto& r : report.rows) {
    const char* fmt = tsv ? "%s\t%s\t%zu\t%.6f\t%.1f\t%.4f\t%s\n"
                          : "%-7s %-6s %9zu %10.4f %13.1f %12.4f %13s\n";
    std::snprintf(buf, sizeof(buf), fmt, r.kernel.c_str(), r.snorm ? "on" : "off", r.trials,
                  r.seconds, r.trials_per_second, r.mean_latency_us, r.deterministic ? "yes" : "no");
    out += buf;
  }
  return out;
}

}  // namespace spkback
