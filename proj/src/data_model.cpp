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

#include "spkback/data_model.hpp"

#include <cmath>
#include <functional>
#include <unordered_set>
#include <utility>

namespace spkback {

EmbeddingSet::EmbeddingSet(std::size_t dim, bool labeled)
    : vectors_(static_cast<Eigen::Index>(dim), 0), labeled_(labeled) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> utt_ids,
                           std::vector<std::string> speaker_ids,
                           Matrix vectors)
    : utt_ids_(std::move(utt_ids)),
      speaker_ids_(std::move(speaker_ids)),
      vectors_(std::move(vectors)) {
  if (vectors_.rows() == 0) throw DataError("embedding dimension must be positive");
  if (static_cast<std::size_t>(vectors_.cols()) != utt_ids_.size()) {
    throw DataError("embedding set: " + std::to_string(utt_ids_.size()) +
                    " ids for " + std::to_string(vectors_.cols()) + " vectors");
  }
  labeled_ = !speaker_ids_.empty();
  if (labeled_ && speaker_ids_.size() != utt_ids_.size()) {
    throw DataError("embedding set: speaker labels must be given for all records or none");
  }
  index_.reserve(utt_ids_.size());
  for (std::size_t i = 0; i < utt_ids_.size(); ++i) {
    if (!index_.emplace(utt_ids_[i], i).second) {
      throw DataError("duplicate utterance id '" + utt_ids_[i] + "' at record " +
                      std::to_string(i + 1));
    }
    if (!vectors_.col(static_cast<Eigen::Index>(i)).allFinite()) {
      throw DataError("non-finite value in record " + std::to_string(i + 1) +
                      " ('" + utt_ids_[i] + "')");
    }
  }
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view utt_id) const {
  auto it = index_.find(std::string(utt_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingSet EmbeddingSet::with_vectors(Matrix vectors) const {
  if (empty()) {
    EmbeddingSet out(static_cast<std::size_t>(vectors.rows()), labeled_);
    return out;
  }
  return EmbeddingSet(utt_ids_, speaker_ids_, std::move(vectors));
}

EmbeddingSet EmbeddingSet::unlabeled() const {
  if (empty()) return EmbeddingSet(dim(), false);
  return EmbeddingSet(utt_ids_, {}, vectors_);
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  return a.labeled_ == b.labeled_ && a.utt_ids_ == b.utt_ids_ &&
         a.speaker_ids_ == b.speaker_ids_ &&
         a.vectors_.rows() == b.vectors_.rows() &&
         a.vectors_.cols() == b.vectors_.cols() && a.vectors_ == b.vectors_;
}

SpeakerGroups group_by_speaker(const EmbeddingSet& set) {
  if (!set.labeled()) throw DataError("operation requires a labeled embedding set");
  SpeakerGroups groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto [it, inserted] = slot.emplace(set.speaker_id(i), groups.speakers.size());
    if (inserted) {
      groups.speakers.push_back(set.speaker_id(i));
      groups.members.emplace_back();
    }
    groups.members[it->second].push_back(i);
  }
  return groups;
}

std::size_t TrialHash::operator()(const Trial& t) const noexcept {
  std::size_t h = std::hash<std::string>{}(t.enroll_id);
  return h ^ (std::hash<std::string>{}(t.test_id) + 0x9e3779b97f4a7c15ULL +
              (h << 6) + (h >> 2));
}

namespace {

void check_unique(const std::vector<Trial>& trials, const char* what) {
  std::unordered_set<Trial, TrialHash> seen;
  seen.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!seen.insert(trials[i]).second) {
      throw DataError(std::string(what) + ": duplicate pair (" +
                      trials[i].enroll_id + ", " + trials[i].test_id +
                      ") at line " + std::to_string(i + 1));
    }
  }
}

}  // namespace

TrialList::TrialList(std::vector<Trial> trials) : trials_(std::move(trials)) {
  check_unique(trials_, "trial list");
}

TrialKey::TrialKey(std::vector<Trial> trials, std::vector<TrialLabel> labels)
    : trials_(std::move(trials)), labels_(std::move(labels)) {
  if (trials_.size() != labels_.size()) {
    throw DataError("trial key: label count does not match trial count");
  }
  check_unique(trials_, "trial key");
  for (auto l : labels_) num_targets_ += (l == TrialLabel::kTarget);
}

void TrialKey::require_both_classes() const {
  if (num_targets() == 0 || num_nontargets() == 0) {
    throw DataError("trial key needs at least one target and one nontarget trial (has " +
                    std::to_string(num_targets()) + " targets, " +
                    std::to_string(num_nontargets()) + " nontargets)");
  }
}

ScoreSet::ScoreSet(std::vector<Trial> trials, std::vector<double> scores)
    : trials_(std::move(trials)), scores_(std::move(scores)) {
  if (trials_.size() != scores_.size()) {
    throw DataError("score set: score count does not match trial count");
  }
  index_.reserve(trials_.size());
  for (std::size_t i = 0; i < trials_.size(); ++i) {
    if (!std::isfinite(scores_[i])) {
      throw DataError("score set: non-finite score for (" + trials_[i].enroll_id +
                      ", " + trials_[i].test_id + ")");
    }
    if (!index_.emplace(trials_[i], i).second) {
      throw DataError("score set: duplicate pair (" + trials_[i].enroll_id + ", " +
                      trials_[i].test_id + ")");
    }
  }
}

std::optional<double> ScoreSet::find(const Trial& t) const {
  auto it = index_.find(t);
  if (it == index_.end()) return std::nullopt;
  return scores_[it->second];
}

std::vector<double> ScoreSet::aligned_to(const std::vector<Trial>& trials) const {
  std::vector<double> out;
  out.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto s = find(trials[i]);
    if (!s) {
      throw DataError("no score for trial " + std::to_string(i + 1) + " (" +
                      trials[i].enroll_id + ", " + trials[i].test_id + ")");
    }
    out.push_back(*s);
  }
  return out;
}

ScoreSet ScoreSet::with_scores(std::vector<double> scores) const {
  return ScoreSet(trials_, std::move(scores));
}

EnrollmentMap::EnrollmentMap(std::vector<EnrollmentModel> models)
    : models_(std::move(models)) {
  for (std::size_t i = 0; i < models_.size(); ++i) {
    if (models_[i].utt_ids.empty()) {
      throw DataError("enrollment model '" + models_[i].model_id + "' has no utterances");
    }
    if (!index_.emplace(models_[i].model_id, i).second) {
      throw DataError("duplicate enrollment model id '" + models_[i].model_id + "'");
    }
  }
}

EnrollmentMap EnrollmentMap::identity(const EmbeddingSet& set) {
  std::vector<EnrollmentModel> models;
  models.reserve(set.size());
  for (const auto& id : set.utt_ids()) models.push_back({id, {id}});
  return EnrollmentMap(std::move(models));
}

const EnrollmentModel* EnrollmentMap::find(std::string_view model_id) const {
  auto it = index_.find(std::string(model_id));
  return it == index_.end() ? nullptr : &models_[it->second];
}

void EnrollmentMap::validate_against(const EmbeddingSet& set) const {
  for (const auto& m : models_) {
    for (const auto& u : m.utt_ids) {
      if (!set.find(u)) {
        throw DataError("enrollment model '" + m.model_id + "' references unknown utterance '" +
                        u + "'");
      }
    }
  }
}

}  // namespace spkback
