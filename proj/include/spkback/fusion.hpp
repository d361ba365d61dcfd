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
#include <optional>
#include <vector>

#include "spkback/data_model.hpp"

namespace spkback {

/// Affine map from one or more system scores to a calibrated LLR.
struct CalibrationModel {
  std::vector<double> weights;
  double offset = 0.0;
  double effective_prior = 0.05;

  std::size_t n_systems() const { return weights.size(); }
};

struct FusionOptions {
  double effective_prior = 0.05;
  double ridge = 0.0;
  int max_iters = 200;
  double grad_tol = 1e-8;
};

/// Scores of every system aligned to the key's trial order: one row per
/// system, one column per trial.
Matrix align_systems(const std::vector<ScoreSet>& score_sets, const TrialKey& key);

struct FusionObjective {
  double loss = 0.0;
  Vector gradient;  // weights..., offset
  Matrix hessian;
};

/// Prior-weighted logistic loss of f(s) = w.s + b:
///   pi/N_tar sum_tar softplus(-f - logit pi) + (1-pi)/N_non sum_non softplus(f + logit pi)
///   + ridge |w|^2
FusionObjective fusion_objective(const Matrix& aligned, const TrialKey& key,
                                 const Vector& params, double effective_prior, double ridge);

/// Damped Newton on the convex objective from `init` (zeros by default).
CalibrationModel train_fusion(const std::vector<ScoreSet>& score_sets, const TrialKey& key,
                              const FusionOptions& options = {},
                              const std::optional<Vector>& init = std::nullopt);

/// sum_i w_i s_i + offset + manual_offset per trial, in the first set's order.
ScoreSet apply_fusion(const CalibrationModel& model, const std::vector<ScoreSet>& score_sets,
                      double manual_offset = 0.0);

/// Log-likelihood-ratio cost in bits.
double cllr(const ScoreSet& scores, const TrialKey& key);

/// Text form: `prior=`, `offset=`, `w_1=`, ... lines.
void write_calibration(const CalibrationModel& model, const std::filesystem::path& path);
CalibrationModel read_calibration(const std::filesystem::path& path);

}  // namespace spkback
