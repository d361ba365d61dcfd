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

#include "spkback/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "spkback/parallel.hpp"

namespace spkback {

ScoreSet score_trials_cosine(const EmbeddingSet& embeddings, const EnrollmentMap& enrollment,
                             const TrialList& trials, unsigned threads) {
  return score_trials(Kernel::cosine(), embeddings, enrollment, trials, threads);
}

std::size_t cohort_top_count(std::size_t cohort_size, double top_fraction) {
  const auto k = static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(cohort_size)));
  return std::min(cohort_size, std::max<std::size_t>(2, k));
}

CohortStats cohort_stats(const std::vector<double>& cohort_scores, double top_fraction,
                         const std::string& side, const std::string& id) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw DataError("adaptive s-norm: top fraction must be in (0, 1]");
  }
  if (cohort_scores.size() < 2) {
    throw DataError("adaptive s-norm: " + side + " '" + id + "' has " +
                    std::to_string(cohort_scores.size()) + " cohort scores (need at least 2)");
  }
  CohortStats st;
  st.cohort_size = cohort_scores.size();
  st.top_fraction = top_fraction;
  st.selected = cohort_top_count(st.cohort_size, top_fraction);

  // Equal scores are interchangeable for the statistics, so the multiset of
  // the K largest values is all that matters.
  std::vector<double> top = cohort_scores;
  const auto k = static_cast<std::ptrdiff_t>(st.selected);
  std::nth_element(top.begin(), top.begin() + (k - 1), top.end(), std::greater<>());
  top.resize(st.selected);
  std::sort(top.begin(), top.end(), std::greater<>());

  double sum = 0.0;
  for (double v : top) sum += v;
  st.mean = sum / static_cast<double>(st.selected);
  double sq = 0.0;
  for (double v : top) sq += (v - st.mean) * (v - st.mean);
  st.std = std::sqrt(sq / static_cast<double>(st.selected));
  if (!(st.std > 1e-12 * std::max(1.0, std::abs(st.mean)))) {
    throw DataError("adaptive s-norm: zero spread in the selected cohort of " + side + " '" + id +
                    "'");
  }
  return st;
}

ScoreSet adaptive_snorm(const ScoreSet& raw, const CohortScoreMap& enroll_cohort_scores,
                        const CohortScoreMap& test_cohort_scores, double top_fraction,
                        unsigned threads) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw DataError("adaptive s-norm: top fraction must be in (0, 1]");
  }
  // Statistics are computed once per distinct id.
  auto collect = [&](const CohortScoreMap& cohorts, bool enroll_side) {
    std::vector<std::string> ids;
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto& id = enroll_side ? raw.trial(i).enroll_id : raw.trial(i).test_id;
      if (slot.emplace(id, ids.size()).second) ids.push_back(id);
    }
    const char* side = enroll_side ? "enrollment model" : "test utterance";
    for (const auto& id : ids) {
      if (!cohorts.contains(id)) {
        throw DataError(std::string("adaptive s-norm: no cohort scores for ") + side + " '" + id +
                        "'");
      }
    }
    std::vector<CohortStats> stats(ids.size());
    parallel_for(ids.size(), threads, [&](std::size_t i) {
      stats[i] = cohort_stats(cohorts.at(ids[i]), top_fraction, side, ids[i]);
    });
    std::map<std::string, CohortStats> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], stats[i]);
    return out;
  };
  const auto enroll_stats = collect(enroll_cohort_scores, true);
  const auto test_stats = collect(test_cohort_scores, false);

  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& e = enroll_stats.at(raw.trial(i).enroll_id);
    const auto& t = test_stats.at(raw.trial(i).test_id);
    const double s = raw.score(i);
    out[i] = 0.5 * ((s - e.mean) / e.std + (s - t.mean) / t.std);
  }
  return raw.with_scores(std::move(out));
}

CohortScores build_cohort_scores(const Kernel& kernel, const EmbeddingSet& embeddings,
                                 const EnrollmentMap& enrollment, const TrialList& trials,
                                 const EmbeddingSet& cohort, unsigned threads) {
  if (cohort.empty()) throw DataError("cohort set is empty");
  if (cohort.dim() != embeddings.dim()) {
    throw DataError("cohort dim " + std::to_string(cohort.dim()) +
                    " does not match embedding dim " + std::to_string(embeddings.dim()));
  }
  const auto models = resolve_models(enrollment, embeddings);
  const Matrix prepared = kernel.prepare(embeddings);
  const Matrix prepared_cohort = kernel.prepare(cohort);
  const auto n_cohort = prepared_cohort.cols();

  std::vector<std::string> model_ids;
  {
    std::map<std::string, bool> used;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (!enrollment.find(trials[i].enroll_id)) {
        throw DataError("trial " + std::to_string(i + 1) + ": unknown enrollment model '" +
                        trials[i].enroll_id + "'");
      }
      used[trials[i].enroll_id] = true;
    }
    for (const auto& m : enrollment.models()) {
      if (used.contains(m.model_id)) model_ids.push_back(m.model_id);
    }
  }
  std::vector<std::string> test_ids;
  std::vector<Eigen::Index> test_cols;
  {
    std::map<std::string, bool> seen;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const auto& id = trials[i].test_id;
      if (!seen.emplace(id, true).second) continue;
      auto idx = embeddings.find(id);
      if (!idx) {
        throw DataError("trial " + std::to_string(i + 1) + ": unknown test utterance '" + id + "'");
      }
      test_ids.push_back(id);
      test_cols.push_back(static_cast<Eigen::Index>(*idx));
    }
  }
  std::map<std::string, std::size_t> model_slot;
  for (std::size_t m = 0; m < enrollment.size(); ++m) model_slot[enrollment.models()[m].model_id] = m;

  std::vector<std::vector<double>> enroll_lists(model_ids.size());
  parallel_for(model_ids.size(), threads, [&](std::size_t i) {
    const auto& cols = models[model_slot.at(model_ids[i])];
    auto& list = enroll_lists[i];
    list.resize(static_cast<std::size_t>(n_cohort));
    for (Eigen::Index c = 0; c < n_cohort; ++c) {
      double sum = 0.0;
      for (auto e : cols) sum += kernel(prepared.col(e), prepared_cohort.col(c));
      list[static_cast<std::size_t>(c)] = sum / static_cast<double>(cols.size());
    }
  });
  std::vector<std::vector<double>> test_lists(test_ids.size());
  parallel_for(test_ids.size(), threads, [&](std::size_t i) {
    auto& list = test_lists[i];
    list.resize(static_cast<std::size_t>(n_cohort));
    for (Eigen::Index c = 0; c < n_cohort; ++c) {
      list[static_cast<std::size_t>(c)] = kernel(prepared.col(test_cols[i]), prepared_cohort.col(c));
    }
  });

  CohortScores out;
  for (std::size_t i = 0; i < model_ids.size(); ++i) out.enroll.emplace(model_ids[i], std::move(enroll_lists[i]));
  for (std::size_t i = 0; i < test_ids.size(); ++i) out.test.emplace(test_ids[i], std::move(test_lists[i]));
  return out;
}

}  // namespace spkback
