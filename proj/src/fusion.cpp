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

#include "spkback/fusion.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "spkback/io.hpp"

namespace spkback {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

void check_prior(double prior) {
  if (!(prior > 0.0 && prior < 1.0)) throw DataError("effective prior must be in (0, 1)");
}

}  // namespace

Matrix align_systems(const std::vector<ScoreSet>& score_sets, const TrialKey& key) {
  if (score_sets.empty()) throw DataError("fusion needs at least one score set");
  Matrix aligned(static_cast<Eigen::Index>(score_sets.size()), static_cast<Eigen::Index>(key.size()));
  for (std::size_t k = 0; k < score_sets.size(); ++k) {
    if (score_sets[k].size() != key.size()) {
      throw DataError("score set " + std::to_string(k + 1) + " has " +
                      std::to_string(score_sets[k].size()) + " trials but the key has " +
                      std::to_string(key.size()));
    }
    const auto s = score_sets[k].aligned_to(key.trials());
    aligned.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  }
  return aligned;
}

FusionObjective fusion_objective(const Matrix& aligned, const TrialKey& key, const Vector& params,
                                 double effective_prior, double ridge) {
  check_prior(effective_prior);
  const auto n = aligned.rows();
  const double lo = logit(effective_prior);
  const double wt = effective_prior / static_cast<double>(key.num_targets());
  const double wn = (1.0 - effective_prior) / static_cast<double>(key.num_nontargets());

  FusionObjective obj;
  obj.gradient = Vector::Zero(n + 1);
  obj.hessian = Matrix::Zero(n + 1, n + 1);
  const auto w = params.head(n);
  const double b = params(n);
  Vector x(n + 1);
  x(n) = 1.0;
  for (std::size_t i = 0; i < key.size(); ++i) {
    x.head(n) = aligned.col(static_cast<Eigen::Index>(i));
    const double z = w.dot(x.head(n)) + b + lo;
    double g, h;
    if (key.is_target(i)) {
      obj.loss += wt * softplus(-z);
      const double p = sigmoid(-z);
      g = -wt * p;
      h = wt * p * (1.0 - p);
    } else {
      obj.loss += wn * softplus(z);
      const double p = sigmoid(z);
      g = wn * p;
      h = wn * p * (1.0 - p);
    }
    obj.gradient += g * x;
    obj.hessian.noalias() += h * x * x.transpose();
  }
  obj.loss += ridge * w.squaredNorm();
  obj.gradient.head(n) += 2.0 * ridge * w;
  obj.hessian.topLeftCorner(n, n).diagonal().array() += 2.0 * ridge;
  return obj;
}

CalibrationModel train_fusion(const std::vector<ScoreSet>& score_sets, const TrialKey& key,
                              const FusionOptions& options, const std::optional<Vector>& init) {
  check_prior(options.effective_prior);
  if (options.ridge < 0.0) throw DataError("fusion ridge must be non-negative");
  key.require_both_classes();
  const Matrix aligned = align_systems(score_sets, key);
  const auto n = aligned.rows();

  Vector params = init ? *init : Vector::Zero(n + 1);
  if (params.size() != n + 1) throw DataError("fusion initialization has the wrong size");
  auto obj = fusion_objective(aligned, key, params, options.effective_prior, options.ridge);
  for (int iter = 0; iter < options.max_iters && obj.gradient.norm() >= options.grad_tol; ++iter) {
    // Minimum-norm Newton direction; the Hessian is singular when scores carry no spread.
    const Vector step = -obj.hessian.completeOrthogonalDecomposition().solve(obj.gradient);
    const double slope = obj.gradient.dot(step);
    Vector direction = slope < 0.0 ? step : Vector(-obj.gradient);
    double t = 1.0;
    FusionObjective next;
    bool accepted = false;
    for (int k = 0; k < 60 && !accepted; ++k, t *= 0.5) {
      next = fusion_objective(aligned, key, params + t * direction, options.effective_prior,
                              options.ridge);
      // Near the optimum loss differences drop below rounding; a shrinking
      // gradient at an unchanged loss is still progress.
      accepted = next.loss <= obj.loss + 1e-4 * t * obj.gradient.dot(direction) ||
                 (next.gradient.norm() < obj.gradient.norm() &&
                  next.loss <= obj.loss + 1e-12 * std::abs(obj.loss));
      if (accepted) break;
    }
    if (!accepted) break;
    params += t * direction;
    obj = std::move(next);
  }

  CalibrationModel model;
  model.weights.assign(params.data(), params.data() + n);
  model.offset = params(n);
  model.effective_prior = options.effective_prior;
  return model;
}

ScoreSet apply_fusion(const CalibrationModel& model, const std::vector<ScoreSet>& score_sets,
                      double manual_offset) {
  if (score_sets.size() != model.n_systems()) {
    throw DataError("fusion model has " + std::to_string(model.n_systems()) +
                    " weights but " + std::to_string(score_sets.size()) + " score sets were given");
  }
  const auto& trials = score_sets.front().trials();
  std::vector<double> out(trials.size(), model.offset + manual_offset);
  for (std::size_t k = 0; k < score_sets.size(); ++k) {
    if (score_sets[k].size() != trials.size()) {
      throw DataError("score set " + std::to_string(k + 1) + " is not aligned with score set 1");
    }
    const auto s = score_sets[k].aligned_to(trials);
    for (std::size_t i = 0; i < trials.size(); ++i) out[i] += model.weights[k] * s[i];
  }
  return ScoreSet(trials, std::move(out));
}

double cllr(const ScoreSet& scores, const TrialKey& key) {
  key.require_both_classes();
  const auto s = scores.aligned_to(key.trials());
  double tar = 0.0;
  double non = 0.0;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key.is_target(i)) {
      tar += softplus(-s[i]);
    } else {
      non += softplus(s[i]);
    }
  }
  tar /= static_cast<double>(key.num_targets());
  non /= static_cast<double>(key.num_nontargets());
  return 0.5 * (tar + non) / std::log(2.0);
}

void write_calibration(const CalibrationModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os << "prior=" << format_real(model.effective_prior) << '\n';
  os << "offset=" << format_real(model.offset) << '\n';
  for (std::size_t i = 0; i < model.weights.size(); ++i) {
    os << "w_" << (i + 1) << '=' << format_real(model.weights[i]) << '\n';
  }
  if (!os) throw DataError("write to '" + path.string() + "' failed");
}

CalibrationModel read_calibration(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
  std::optional<double> prior, offset;
  std::map<std::size_t, double> weights;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(where + ": expected key=value");
    const std::string k = line.substr(0, eq);
    const std::string v = line.substr(eq + 1);
    double value = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(value)) {
      throw DataError(where + ": bad number '" + v + "'");
    }
    if (k == "prior") {
      prior = value;
    } else if (k == "offset") {
      offset = value;
    } else if (k.starts_with("w_")) {
      std::size_t idx = 0;
      auto [q, ec2] = std::from_chars(k.data() + 2, k.data() + k.size(), idx);
      if (ec2 != std::errc() || q != k.data() + k.size() || idx == 0) {
        throw DataError(where + ": bad weight key '" + k + "'");
      }
      weights[idx] = value;
    } else {
      throw DataError(where + ": unknown key '" + k + "'");
    }
  }
  if (!prior || !offset || weights.empty()) {
    throw DataError(path.string() + ": calibration file needs prior, offset and w_1..w_n");
  }
  check_prior(*prior);
  CalibrationModel model;
  model.effective_prior = *prior;
  model.offset = *offset;
  for (std::size_t i = 1; i <= weights.size(); ++i) {
    if (!weights.contains(i)) throw DataError(path.string() + ": missing w_" + std::to_string(i));
    model.weights.push_back(weights[i]);
  }
  return model;
}

}  // namespace spkback
