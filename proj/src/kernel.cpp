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

#include "spkback/kernel.hpp"

#include "spkback/parallel.hpp"

namespace spkback {

Kernel Kernel::cosine() { return Kernel(Cosine{}); }

Kernel Kernel::plda(const PldaModel& model) {
  return Kernel(Plda{std::make_shared<const PldaScorer>(model)});
}

Matrix Kernel::prepare(const EmbeddingSet& set) const {
  if (const auto* p = std::get_if<Plda>(&impl_)) {
    if (set.dim() != p->scorer->dim()) {
      throw DataError("embedding dim " + std::to_string(set.dim()) +
                      " does not match PLDA model dim " + std::to_string(p->scorer->dim()));
    }
    return p->scorer->project(set.vectors());
  }
  Matrix out = set.vectors();
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double n = out.col(i).norm();
    if (n == 0.0) {
      throw DataError("cosine scoring: zero vector for utterance '" +
                      set.utt_id(static_cast<std::size_t>(i)) + "'");
    }
    out.col(i) /= n;
  }
  return out;
}

std::vector<std::vector<Eigen::Index>> resolve_models(const EnrollmentMap& enrollment,
                                                      const EmbeddingSet& embeddings) {
  std::vector<std::vector<Eigen::Index>> out;
  out.reserve(enrollment.size());
  for (const auto& m : enrollment.models()) {
    std::vector<Eigen::Index> cols;
    cols.reserve(m.utt_ids.size());
    for (const auto& u : m.utt_ids) {
      auto idx = embeddings.find(u);
      if (!idx) {
        throw DataError("enrollment model '" + m.model_id + "' references unknown utterance '" +
                        u + "'");
      }
      cols.push_back(static_cast<Eigen::Index>(*idx));
    }
    out.push_back(std::move(cols));
  }
  return out;
}

ScoreSet score_trials(const Kernel& kernel, const EmbeddingSet& embeddings,
                      const EnrollmentMap& enrollment, const TrialList& trials,
                      unsigned threads) {
  const auto models = resolve_models(enrollment, embeddings);
  std::unordered_map<std::string, std::size_t> model_slot;
  for (std::size_t m = 0; m < enrollment.size(); ++m) {
    model_slot.emplace(enrollment.models()[m].model_id, m);
  }
  std::vector<std::pair<std::size_t, Eigen::Index>> resolved(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto m = model_slot.find(trials[i].enroll_id);
    if (m == model_slot.end()) {
      throw DataError("trial " + std::to_string(i + 1) + ": unknown enrollment model '" +
                      trials[i].enroll_id + "'");
    }
    auto t = embeddings.find(trials[i].test_id);
    if (!t) {
      throw DataError("trial " + std::to_string(i + 1) + ": unknown test utterance '" +
                      trials[i].test_id + "'");
    }
    resolved[i] = {m->second, static_cast<Eigen::Index>(*t)};
  }

  const Matrix prepared = kernel.prepare(embeddings);
  std::vector<double> scores(trials.size());
  parallel_for(trials.size(), threads, [&](std::size_t i) {
    const auto& enroll = models[resolved[i].first];
    const auto test = prepared.col(resolved[i].second);
    double sum = 0.0;
    for (auto e : enroll) sum += kernel(prepared.col(e), test);
    scores[i] = sum / static_cast<double>(enroll.size());
  });
  return ScoreSet(trials.trials(), std::move(scores));
}

}  // namespace spkback
