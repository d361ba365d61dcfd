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

#include <memory>
#include <variant>

#include "spkback/data_model.hpp"
#include "spkback/plda.hpp"

namespace spkback {

/// Pairwise scoring function with a per-embedding preparation step
/// (unit-normalizing for cosine, diagonalizing projection for PLDA).
class Kernel {
 public:
  static Kernel cosine();
  static Kernel plda(const PldaModel& model);

  bool is_cosine() const { return std::holds_alternative<Cosine>(impl_); }

  /// Prepared representation of every column, dim-checked.
  Matrix prepare(const EmbeddingSet& set) const;

  template <typename DerivedA, typename DerivedB>
  double operator()(const Eigen::MatrixBase<DerivedA>& a,
                    const Eigen::MatrixBase<DerivedB>& b) const {
    if (const auto* p = std::get_if<Plda>(&impl_)) return p->scorer->score_projected(a, b);
    return a.dot(b);
  }

 private:
  struct Cosine {};
  struct Plda {
    std::shared_ptr<const PldaScorer> scorer;
  };
  explicit Kernel(std::variant<Cosine, Plda> impl) : impl_(std::move(impl)) {}

  std::variant<Cosine, Plda> impl_;
};

/// Enrollment models resolved to column indices of a prepared matrix.
std::vector<std::vector<Eigen::Index>> resolve_models(const EnrollmentMap& enrollment,
                                                      const EmbeddingSet& embeddings);

/// Trial score = mean kernel score of the model's enrollment utterances
/// against the test utterance. Output order follows `trials`.
ScoreSet score_trials(const Kernel& kernel, const EmbeddingSet& embeddings,
                      const EnrollmentMap& enrollment, const TrialList& trials,
                      unsigned threads = 1);

}  // namespace spkback
