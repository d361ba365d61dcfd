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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "spkback/data_model.hpp"

namespace spkback {

/// Two-covariance PLDA: x = mean + y + e, y ~ N(0, between), e ~ N(0, within).
struct PldaModel {
  Vector mean;
  Matrix between;
  Matrix within;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

  /// Throws DataError/NumericalError if shapes, symmetry (1e-10),
  /// positive definiteness of `within` or semi-definiteness of `between` fail.
  void validate() const;
};

struct PldaTrainOptions {
  int max_iters = 20;
  /// Stop once the relative log-likelihood gain drops below this.
  double tol = 1e-6;
};

struct PldaTrainResult {
  PldaModel model;
  /// Marginal data log-likelihood at initialization and after each iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

/// EM over (between, within) with the mean fixed at the sample mean,
/// initialized at between = within = total covariance / 2.
PldaTrainResult train_plda(const EmbeddingSet& data, const PldaTrainOptions& options = {});

/// Marginal log-likelihood of a labeled set under `model`.
double plda_log_likelihood(const PldaModel& model, const EmbeddingSet& data);

/// Shifts the mean toward the in-domain mean and adds the positive part of
/// the in-domain excess covariance, split between the two covariances in
/// proportion to their traces. alpha = 0 returns the model unchanged.
PldaModel adapt_plda(const PldaModel& model, const EmbeddingSet& indomain, double alpha);

/// Per-dimension LLR of a diagonalized two-covariance model with unit
/// within-class variance and between-class variance psi:
///   c + alpha (a^2 + b^2) + beta a b
/// with c = log(psi+1) - log(2 psi+1)/2, alpha = -psi^2 / (2 (psi+1)(2 psi+1)),
/// beta = psi / (2 psi+1).
template <typename Scalar>
struct DiagonalLlrCoefficients {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  Array quadratic;
  Array cross;
  Scalar constant = 0;

  explicit DiagonalLlrCoefficients(const Array& psi)
      : quadratic(-psi.square() / (Scalar(2) * (psi + Scalar(1)) * (Scalar(2) * psi + Scalar(1)))),
        cross(psi / (Scalar(2) * psi + Scalar(1))) {
    constant = ((psi + Scalar(1)).log() - Scalar(0.5) * (Scalar(2) * psi + Scalar(1)).log()).sum();
  }

  template <typename DerivedA, typename DerivedB>
  Scalar operator()(const Eigen::MatrixBase<DerivedA>& a,
                    const Eigen::MatrixBase<DerivedB>& b) const {
    const auto aa = a.array();
    const auto bb = b.array();
    return constant + (quadratic * (aa.square() + bb.square()) + cross * aa * bb).sum();
  }
};

/// Scoring form of a PldaModel. `project` maps embeddings into a space
/// where within = I and between = diag(psi); the LLR is then separable.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);

  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Vector& psi() const { return psi_; }

  /// Columns of x (dim x n) mapped to the diagonal space.
  Matrix project(const Matrix& x) const;

  template <typename DerivedA, typename DerivedB>
  double score_projected(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) const {
    return coefficients_(a, b);
  }

 private:
  Vector mean_;
  Matrix transform_;  // rows map centered x to the diagonal space
  Vector psi_;
  DiagonalLlrCoefficients<double> coefficients_;
};

/// log N([e;t]; [m;m], same) - log N([e;t]; [m;m], diff) where
/// same = [[B+W, B], [B, B+W]] and diff = blockdiag(B+W, B+W).
double score_plda(const PldaModel& model, const Vector& enroll, const Vector& test);

/// Mean per-utterance LLR over each model's enrollment utterances.
ScoreSet score_trials_plda(const PldaModel& model, const EmbeddingSet& embeddings,
                           const EnrollmentMap& enrollment, const TrialList& trials,
                           unsigned threads = 1);

void write_plda(const PldaModel& model, const std::filesystem::path& path);
PldaModel read_plda(const std::filesystem::path& path);

}  // namespace spkback
