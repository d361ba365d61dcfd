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

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "spkback/error.hpp"

namespace spkback {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Utterance embeddings, one column per record.
///
/// Labeled sets carry a speaker id for every record, unlabeled sets for
/// none. Construction validates every invariant, so an instance is always
/// well formed and can be shared read-only between threads.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Empty set of the given dimensionality.
  explicit EmbeddingSet(std::size_t dim, bool labeled = false);

  /// `vectors` is dim x N. `speaker_ids` is empty for an unlabeled set or
  /// has one entry per record.
  EmbeddingSet(std::vector<std::string> utt_ids,
               std::vector<std::string> speaker_ids, Matrix vectors);

  std::size_t dim() const { return static_cast<std::size_t>(vectors_.rows()); }
  std::size_t size() const { return utt_ids_.size(); }
  bool empty() const { return utt_ids_.empty(); }
  bool labeled() const { return labeled_; }

  const Matrix& vectors() const { return vectors_; }
  auto vector(std::size_t i) const { return vectors_.col(static_cast<Eigen::Index>(i)); }

  const std::vector<std::string>& utt_ids() const { return utt_ids_; }
  const std::vector<std::string>& speaker_ids() const { return speaker_ids_; }
  const std::string& utt_id(std::size_t i) const { return utt_ids_[i]; }
  const std::string& speaker_id(std::size_t i) const { return speaker_ids_.at(i); }

  /// Index of an utterance, if present.
  std::optional<std::size_t> find(std::string_view utt_id) const;

  /// Same ids and labels with replaced vectors (any row count).
  EmbeddingSet with_vectors(Matrix vectors) const;

  /// Drop speaker labels.
  EmbeddingSet unlabeled() const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

 private:
  std::vector<std::string> utt_ids_;
  std::vector<std::string> speaker_ids_;
  Matrix vectors_;
  bool labeled_ = false;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Records grouped by speaker in order of first appearance.
struct SpeakerGroups {
  std::vector<std::string> speakers;
  std::vector<std::vector<std::size_t>> members;
};

SpeakerGroups group_by_speaker(const EmbeddingSet& set);

struct Trial {
  std::string enroll_id;
  std::string test_id;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialHash {
  std::size_t operator()(const Trial& t) const noexcept;
};

class TrialList {
 public:
  TrialList() = default;
  explicit TrialList(std::vector<Trial> trials);

  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  const Trial& operator[](std::size_t i) const { return trials_[i]; }
  const std::vector<Trial>& trials() const { return trials_; }
  auto begin() const { return trials_.begin(); }
  auto end() const { return trials_.end(); }

 private:
  std::vector<Trial> trials_;
};

enum class TrialLabel { kTarget, kNontarget };

class TrialKey {
 public:
  TrialKey() = default;
  TrialKey(std::vector<Trial> trials, std::vector<TrialLabel> labels);

  std::size_t size() const { return trials_.size(); }
  const std::vector<Trial>& trials() const { return trials_; }
  const std::vector<TrialLabel>& labels() const { return labels_; }
  const Trial& trial(std::size_t i) const { return trials_[i]; }
  bool is_target(std::size_t i) const { return labels_[i] == TrialLabel::kTarget; }

  std::size_t num_targets() const { return num_targets_; }
  std::size_t num_nontargets() const { return size() - num_targets_; }

  /// Throws DataError unless both classes are present.
  void require_both_classes() const;

  TrialList trial_list() const { return TrialList(trials_); }

 private:
  std::vector<Trial> trials_;
  std::vector<TrialLabel> labels_;
  std::size_t num_targets_ = 0;
};

class ScoreSet {
 public:
  ScoreSet() = default;
  ScoreSet(std::vector<Trial> trials, std::vector<double> scores);

  std::size_t size() const { return trials_.size(); }
  const std::vector<Trial>& trials() const { return trials_; }
  const std::vector<double>& scores() const { return scores_; }
  const Trial& trial(std::size_t i) const { return trials_[i]; }
  double score(std::size_t i) const { return scores_[i]; }

  std::optional<double> find(const Trial& t) const;

  /// Scores aligned to `trials` by (enroll_id, test_id) join.
  std::vector<double> aligned_to(const std::vector<Trial>& trials) const;

  /// Same trials with new scores.
  ScoreSet with_scores(std::vector<double> scores) const;

 private:
  std::vector<Trial> trials_;
  std::vector<double> scores_;
  std::unordered_map<Trial, std::size_t, TrialHash> index_;
};

struct EnrollmentModel {
  std::string model_id;
  std::vector<std::string> utt_ids;
};

class EnrollmentMap {
 public:
  EnrollmentMap() = default;
  explicit EnrollmentMap(std::vector<EnrollmentModel> models);

  /// Every test/enroll id maps to itself.
  static EnrollmentMap identity(const EmbeddingSet& set);

  std::size_t size() const { return models_.size(); }
  const std::vector<EnrollmentModel>& models() const { return models_; }
  const EnrollmentModel* find(std::string_view model_id) const;

  /// Throws DataError naming the first utterance missing from `set`.
  void validate_against(const EmbeddingSet& set) const;

 private:
  std::vector<EnrollmentModel> models_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace spkback
