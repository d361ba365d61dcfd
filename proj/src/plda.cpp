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

#include "spkback/plda.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "spkback/io.hpp"
#include "spkback/kernel.hpp"

namespace spkback {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void add_floor(Matrix& within) {
  const auto d = within.rows();
  within.diagonal().array() += 1e-8 * within.trace() / static_cast<double>(d);
}

// Sufficient statistics for EM: per-speaker counts and means plus the
// pooled scatter of utterances around their speaker means.
struct SpeakerStats {
  Vector mean;                  // sample mean
  std::vector<std::size_t> counts;
  Matrix centered_means;        // dim x S, speaker mean minus sample mean
  Matrix within_scatter;        // sum over utterances of (x - speaker mean)(...)^T
  std::size_t total = 0;
};

SpeakerStats collect_stats(const EmbeddingSet& data) {
  const SpeakerGroups groups = group_by_speaker(data);
  const Matrix& x = data.vectors();
  const auto d = x.rows();
  SpeakerStats st;
  st.total = data.size();
  st.mean = x.rowwise().mean();
  st.centered_means.resize(d, static_cast<Eigen::Index>(groups.speakers.size()));
  st.within_scatter = Matrix::Zero(d, d);
  for (std::size_t s = 0; s < groups.speakers.size(); ++s) {
    const auto& members = groups.members[s];
    Vector m = Vector::Zero(d);
    for (auto i : members) m += x.col(static_cast<Eigen::Index>(i));
    m /= static_cast<double>(members.size());
    for (auto i : members) {
      const Vector r = x.col(static_cast<Eigen::Index>(i)) - m;
      st.within_scatter.noalias() += r * r.transpose();
    }
    st.counts.push_back(members.size());
    st.centered_means.col(static_cast<Eigen::Index>(s)) = m - st.mean;
  }
  return st;
}

// Each speaker's n utterances split orthogonally into sqrt(n) * mean,
// distributed N(sqrt(n) mu, n B + W), and n - 1 contrasts distributed N(0, W).
double log_likelihood(const Matrix& between, const Matrix& within, const SpeakerStats& st) {
  const auto d = static_cast<double>(between.rows());
  Eigen::LLT<Matrix> w_llt(within);
  if (w_llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const double w_logdet = log_det(w_llt);
  const double contrasts = static_cast<double>(st.total - st.counts.size());
  double ll = -0.5 * contrasts * (d * kLog2Pi + w_logdet) -
              0.5 * w_llt.solve(st.within_scatter).trace();

  std::map<std::size_t, Eigen::LLT<Matrix>> by_count;
  for (std::size_t s = 0; s < st.counts.size(); ++s) {
    const std::size_t n = st.counts[s];
    auto it = by_count.find(n);
    if (it == by_count.end()) {
      it = by_count.emplace(n, Eigen::LLT<Matrix>(static_cast<double>(n) * between + within)).first;
    }
    const auto dm = st.centered_means.col(static_cast<Eigen::Index>(s));
    const double nn = static_cast<double>(n);
    ll += -0.5 * (d * kLog2Pi + log_det(it->second) + nn * dm.dot(it->second.solve(dm)));
  }
  return ll;
}

}  // namespace

void PldaModel::validate() const {
  const auto d = mean.size();
  if (d == 0) throw DataError("PLDA model: dimension must be positive");
  if (between.rows() != d || between.cols() != d || within.rows() != d || within.cols() != d) {
    throw DataError("PLDA model: covariance shapes do not match mean dimension");
  }
  if (!mean.allFinite() || !between.allFinite() || !within.allFinite()) {
    throw DataError("PLDA model: non-finite parameter");
  }
  const double scale = std::max({1.0, between.cwiseAbs().maxCoeff(), within.cwiseAbs().maxCoeff()});
  if ((between - between.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale ||
      (within - within.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DataError("PLDA model: covariances must be symmetric");
  }
  if (Eigen::LLT<Matrix>(within).info() != Eigen::Success) {
    throw NumericalError("PLDA model: within-class covariance is not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(between, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw NumericalError("PLDA model: between-class covariance is not positive semi-definite");
  }
}

double plda_log_likelihood(const PldaModel& model, const EmbeddingSet& data) {
  if (data.dim() != model.dim()) throw DataError("plda_log_likelihood: dimension mismatch");
  SpeakerStats st = collect_stats(data);
  // Stats are centered on the sample mean; re-center on the model mean.
  const Vector shift = st.mean - model.mean;
  st.centered_means.colwise() += shift;
  return log_likelihood(model.between, model.within, st);
}

PldaTrainResult train_plda(const EmbeddingSet& data, const PldaTrainOptions& options) {
  if (options.max_iters < 1) throw DataError("train_plda: iteration count must be positive");
  if (!(options.tol > 0.0)) throw DataError("train_plda: tolerance must be positive");
  const SpeakerStats st = collect_stats(data);
  const std::size_t n_speakers = st.counts.size();
  if (n_speakers < 2) {
    throw DataError("train_plda: need at least 2 speakers, got " + std::to_string(n_speakers));
  }
  const auto d = static_cast<Eigen::Index>(data.dim());
  const double total_n = static_cast<double>(st.total);

  // Total covariance from the within scatter plus the count-weighted means.
  Matrix total_cov = st.within_scatter;
  for (std::size_t s = 0; s < n_speakers; ++s) {
    const auto dm = st.centered_means.col(static_cast<Eigen::Index>(s));
    total_cov.noalias() += static_cast<double>(st.counts[s]) * dm * dm.transpose();
  }
  total_cov /= total_n;

  PldaTrainResult result;
  PldaModel& model = result.model;
  model.mean = st.mean;
  model.between = 0.5 * total_cov;
  model.within = 0.5 * total_cov;
  add_floor(model.within);

  if (st.total == n_speakers) {
    result.warnings.push_back(
        "every speaker has exactly one utterance: between- and within-class covariance are "
        "not separately identifiable; returning the even split of the total covariance");
    result.log_likelihood.push_back(log_likelihood(model.between, model.within, st));
    result.converged = true;
    return result;
  }

  double ll = log_likelihood(model.between, model.within, st);
  result.log_likelihood.push_back(ll);
  for (int iter = 1; iter <= options.max_iters; ++iter) {
    // E-step: posterior of y_s is N(G_n dm_s, B - G_n B), G_n = B (B + W/n)^-1.
    std::map<std::size_t, std::pair<Matrix, Matrix>> gain_by_count;
    Matrix between_acc = Matrix::Zero(d, d);
    Matrix within_acc = st.within_scatter;
    for (std::size_t s = 0; s < n_speakers; ++s) {
      const std::size_t n = st.counts[s];
      auto it = gain_by_count.find(n);
      if (it == gain_by_count.end()) {
        const Matrix a = model.between + model.within / static_cast<double>(n);
        Eigen::LLT<Matrix> llt(a);
        // B A^-1 = (A^-1 B)^T for symmetric A, B.
        Matrix gain = llt.solve(model.between).transpose();
        Matrix post_cov = symmetrized(model.between - gain * model.between);
        it = gain_by_count.emplace(n, std::make_pair(std::move(gain), std::move(post_cov))).first;
      }
      const auto& [gain, post_cov] = it->second;
      const auto dm = st.centered_means.col(static_cast<Eigen::Index>(s));
      const Vector y = gain * dm;
      const Vector resid = dm - y;
      const double nn = static_cast<double>(n);
      between_acc.noalias() += y * y.transpose();
      between_acc += post_cov;
      within_acc.noalias() += nn * resid * resid.transpose();
      within_acc += nn * post_cov;
    }
    // M-step.
    model.between = symmetrized(between_acc / static_cast<double>(n_speakers));
    model.within = symmetrized(within_acc / total_n);
    add_floor(model.within);
    if (Eigen::LLT<Matrix>(model.within).info() != Eigen::Success) {
      throw NumericalError("train_plda: within-class covariance lost positive definiteness at "
                           "iteration " + std::to_string(iter));
    }
    const double next = log_likelihood(model.between, model.within, st);
    result.log_likelihood.push_back(next);
    result.iterations = iter;
    const double gain = next - ll;
    ll = next;
    if (std::abs(gain) < options.tol * std::max(1.0, std::abs(ll))) {
      result.converged = true;
      break;
    }
  }
  return result;
}

PldaModel adapt_plda(const PldaModel& model, const EmbeddingSet& indomain, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("adapt_plda: alpha must be in [0, 1]");
  if (indomain.empty()) throw DataError("adapt_plda: in-domain set is empty");
  if (indomain.dim() != model.dim()) {
    throw DataError("adapt_plda: in-domain dim " + std::to_string(indomain.dim()) +
                    " does not match model dim " + std::to_string(model.dim()));
  }
  const Matrix& x = indomain.vectors();
  const Vector in_mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - in_mean;
  const Matrix in_cov = centered * centered.transpose() / static_cast<double>(x.cols());

  const Matrix out_cov = model.between + model.within;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(in_cov - out_cov));
  if (eig.info() != Eigen::Success) throw NumericalError("adapt_plda: eigensolver failed");
  const Matrix excess = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                        eig.eigenvectors().transpose();
  const double total_trace = out_cov.trace();

  PldaModel adapted;
  adapted.mean = (1.0 - alpha) * model.mean + alpha * in_mean;
  adapted.between = model.between + (alpha * model.between.trace() / total_trace) * excess;
  adapted.within = model.within + (alpha * model.within.trace() / total_trace) * excess;
  return adapted;
}

PldaScorer::PldaScorer(const PldaModel& model)
    : mean_(model.mean), coefficients_(Eigen::ArrayXd::Zero(model.mean.size())) {
  model.validate();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> eig(model.between, model.within);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("PLDA scorer: generalized eigendecomposition failed");
  }
  // Eigenvectors satisfy V^T W V = I and V^T B V = diag(psi).
  transform_ = eig.eigenvectors().transpose();
  psi_ = eig.eigenvalues().cwiseMax(0.0);
  coefficients_ = DiagonalLlrCoefficients<double>(psi_.array());
}

Matrix PldaScorer::project(const Matrix& x) const {
  return transform_ * (x.colwise() - mean_);
}

double score_plda(const PldaModel& model, const Vector& enroll, const Vector& test) {
  if (enroll.size() != static_cast<Eigen::Index>(model.dim()) ||
      test.size() != static_cast<Eigen::Index>(model.dim())) {
    throw DataError("score_plda: vector dimension does not match the model");
  }
  if (!enroll.allFinite() || !test.allFinite()) throw DataError("score_plda: non-finite input");
  const PldaScorer scorer(model);
  const Vector a = scorer.project(enroll);
  const Vector b = scorer.project(test);
  return scorer.score_projected(a, b);
}

ScoreSet score_trials_plda(const PldaModel& model, const EmbeddingSet& embeddings,
                           const EnrollmentMap& enrollment, const TrialList& trials,
                           unsigned threads) {
  return score_trials(Kernel::plda(model), embeddings, enrollment, trials, threads);
}

namespace {
constexpr std::string_view kPldaMagic = "SVP1";
}

void write_plda(const PldaModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  binary::write_magic(os, kPldaMagic);
  binary::write_u32(os, static_cast<std::uint32_t>(model.dim()));
  binary::write_matrix(os, model.mean.transpose());
  binary::write_matrix(os, model.between);
  binary::write_matrix(os, model.within);
  if (!os) throw DataError("write to '" + path.string() + "' failed");
}

PldaModel read_plda(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
  binary::expect_magic(is, kPldaMagic, path);
  PldaModel model;
  try {
    const auto d = static_cast<Eigen::Index>(binary::read_u32(is));
    if (d == 0) throw DataError("dimension 0");
    model.mean = binary::read_matrix(is, 1, d).transpose();
    model.between = binary::read_matrix(is, d, d);
    model.within = binary::read_matrix(is, d, d);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": malformed PLDA file: " + e.what());
  }
  model.validate();
  return model;
}

}  // namespace spkback
