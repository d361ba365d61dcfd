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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "spkback/data_model.hpp"

namespace spkback::testing {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("spkback-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Score set and key over synthetic trial ids "e<i>" / "t<i>".
struct LabeledScores {
  ScoreSet scores;
  TrialKey key;
};

inline LabeledScores labeled_scores(const std::vector<double>& scores,
                                    const std::vector<bool>& is_target) {
  std::vector<Trial> trials;
  std::vector<TrialLabel> labels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    trials.push_back({"e" + std::to_string(i), "t" + std::to_string(i)});
    labels.push_back(is_target[i] ? TrialLabel::kTarget : TrialLabel::kNontarget);
  }
  return {ScoreSet(trials, scores), TrialKey(trials, labels)};
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index dim, double floor = 0.1) {
  const Matrix a = random_matrix(rng, dim, dim);
  return a * a.transpose() + floor * Matrix::Identity(dim, dim);
}

inline double relative_frobenius(const Matrix& estimate, const Matrix& truth) {
  return (estimate - truth).norm() / truth.norm();
}

}  // namespace spkback::testing
