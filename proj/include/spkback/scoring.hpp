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

#include <map>
#include <string>
#include <vector>

#include "spkback/data_model.hpp"
#include "spkback/kernel.hpp"

namespace spkback {

/// e . t / (|e| |t|). Throws DataError on a zero vector.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& e,
                                            const Eigen::MatrixBase<DerivedB>& t) {
  const auto ne = e.norm();
  const auto nt = t.norm();
  if (ne == 0 || nt == 0) throw DataError("cosine similarity of a zero vector");
  return e.dot(t) / (ne * nt);
}

inline double score_cosine(const Vector& e, const Vector& t) {
  if (e.size() != t.size()) throw DataError("score_cosine: dimension mismatch");
  if (!e.allFinite() || !t.allFinite()) throw DataError("score_cosine: non-finite input");
  return cosine_similarity(e, t);
}

ScoreSet score_trials_cosine(const EmbeddingSet& embeddings, const EnrollmentMap& enrollment,
                             const TrialList& trials, unsigned threads = 1);

/// Mean and population standard deviation of the top-K cohort scores on one
/// trial side, K = max(2, floor(top_fraction * cohort size)).
struct CohortStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t cohort_size = 0;
  std::size_t selected = 0;
  double top_fraction = 1.0;
};

std::size_t cohort_top_count(std::size_t cohort_size, double top_fraction);

/// Top-K selection by descending score; equal scores keep cohort order.
/// Throws DataError for cohorts smaller than 2 or a zero spread.
CohortStats cohort_stats(const std::vector<double>& cohort_scores, double top_fraction,
                         const std::string& side, const std::string& id);

using CohortScoreMap = std::map<std::string, std::vector<double>>;

struct CohortScores {
  CohortScoreMap enroll;  // keyed by enrollment model id
  CohortScoreMap test;    // keyed by test utterance id
};

/// s' = ((s - mean_e) / std_e + (s - mean_t) / std_t) / 2 per trial.
ScoreSet adaptive_snorm(const ScoreSet& raw, const CohortScoreMap& enroll_cohort_scores,
                        const CohortScoreMap& test_cohort_scores, double top_fraction,
                        unsigned threads = 1);

/// Scores every enrollment model (averaging over its utterances) and every
/// test utterance of `trials` against each cohort utterance.
CohortScores build_cohort_scores(const Kernel& kernel, const EmbeddingSet& embeddings,
                                 const EnrollmentMap& enrollment, const TrialList& trials,
                                 const EmbeddingSet& cohort, unsigned threads = 1);

}  // namespace spkback
