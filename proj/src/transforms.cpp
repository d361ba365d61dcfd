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

#include "spkback/transforms.hpp"

#include <cmath>
#include <fstream>

#include "spkback/io.hpp"

namespace spkback {

ClassScatter class_scatter(const EmbeddingSet& data) {
  const SpeakerGroups groups = group_by_speaker(data);
  const Matrix& x = data.vectors();
  const auto d = x.rows();
  ClassScatter sc;
  sc.num_classes = groups.speakers.size();
  sc.num_samples = data.size();
  sc.mean = data.empty() ? Vector::Zero(d) : Vector(x.rowwise().mean());
  sc.between = Matrix::Zero(d, d);
  sc.within = Matrix::Zero(d, d);
  for (const auto& members : groups.members) {
    Vector class_mean = Vector::Zero(d);
    for (auto i : members) class_mean += x.col(static_cast<Eigen::Index>(i));
    class_mean /= static_cast<double>(members.size());
    const Vector dm = class_mean - sc.mean;
    sc.between.noalias() += static_cast<double>(members.size()) * dm * dm.transpose();
    for (auto i : members) {
      const Vector r = x.col(static_cast<Eigen::Index>(i)) - class_mean;
      sc.within.noalias() += r * r.transpose();
    }
  }
  if (sc.num_samples > 0) sc.between /= static_cast<double>(sc.num_samples);
  if (sc.num_samples > sc.num_classes) {
    sc.within /= static_cast<double>(sc.num_samples - sc.num_classes);
  }
  return sc;
}

LdaTransform fit_lda(const EmbeddingSet& data, std::size_t out_dim,
                     std::optional<double> ridge) {
  const SpeakerGroups groups = group_by_speaker(data);
  const std::size_t n_speakers = groups.speakers.size();
  if (n_speakers < 2) throw DataError("fit_lda: need at least 2 speakers");
  if (out_dim == 0) throw DataError("fit_lda: out_dim must be positive");
  const std::size_t max_dim = std::min(data.dim(), n_speakers - 1);
  if (out_dim > max_dim) {
    throw DataError("fit_lda: out_dim " + std::to_string(out_dim) + " exceeds min(in_dim, speakers - 1) = " +
                    std::to_string(max_dim));
  }
  const ClassScatter sc = class_scatter(data);
  const auto d = static_cast<Eigen::Index>(data.dim());
  const double r = ridge.value_or(1e-6 * sc.within.trace() / static_cast<double>(d));
  if (r < 0.0 || !std::isfinite(r)) throw DataError("fit_lda: ridge must be non-negative");

  const Matrix regularized = sc.within + r * Matrix::Identity(d, d);
  Eigen::LLT<Matrix> llt(regularized);
  const double floor = 1e-12 * std::max(regularized.diagonal().maxCoeff(), 1e-300);
  if (llt.info() != Eigen::Success ||
      llt.matrixLLT().diagonal().array().square().minCoeff() <= floor) {
    throw NumericalError("fit_lda: within-class scatter is singular; use a positive ridge");
  }
  // C = L^-1 S_b L^-T is symmetric; its eigenvectors U give V = L^-T U with
  // V^T (S_w + ridge I) V = I.
  Matrix c = llt.matrixL().solve(sc.between);
  c = llt.matrixL().solve(c.transpose()).eval();
  c = 0.5 * (c + c.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_lda: eigensolver failed");
  const Matrix v = llt.matrixU().solve(eig.eigenvectors());

  const auto k = static_cast<Eigen::Index>(out_dim);
  LdaTransform lda;
  lda.mean = sc.mean;
  lda.projection.resize(k, d);
  lda.eigenvalues.resize(k);
  for (Eigen::Index row = 0; row < k; ++row) {
    const Eigen::Index src = d - 1 - row;
    Vector dir = v.col(src);
    const double tol = 1e-12 * dir.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(dir(j)) > tol) {
        if (dir(j) < 0) dir = -dir;
        break;
      }
    }
    lda.projection.row(row) = dir.transpose();
    lda.eigenvalues(row) = eig.eigenvalues()(src);
  }
  return lda;
}

EmbeddingSet apply_lda(const LdaTransform& lda, const EmbeddingSet& set,
                       const std::optional<Vector>& center) {
  if (set.dim() != lda.in_dim()) {
    throw DataError("apply_lda: embedding dim " + std::to_string(set.dim()) +
                    " does not match transform input dim " + std::to_string(lda.in_dim()));
  }
  const Vector& mean = center ? *center : lda.mean;
  if (mean.size() != lda.projection.cols()) throw DataError("apply_lda: centering vector has wrong size");
  Matrix out = lda.projection * (set.vectors().colwise() - mean);
  return set.with_vectors(std::move(out));
}

EmbeddingSet length_normalize(const EmbeddingSet& set) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.vector(i).squaredNorm() == 0.0) {
      throw DataError("length_normalize: zero vector for utterance '" + set.utt_id(i) + "'");
    }
  }
  if (set.empty()) return set;
  return set.with_vectors(length_normalized(set.vectors()));
}

namespace {
constexpr std::string_view kLdaMagic = "SVL1";
}

void write_lda(const LdaTransform& lda, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  binary::write_magic(os, kLdaMagic);
  binary::write_u32(os, static_cast<std::uint32_t>(lda.in_dim()));
  binary::write_u32(os, static_cast<std::uint32_t>(lda.out_dim()));
  binary::write_matrix(os, lda.mean.transpose());
  binary::write_matrix(os, lda.projection);
  if (!os) throw DataError("write to '" + path.string() + "' failed");
}

LdaTransform read_lda(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
  binary::expect_magic(is, kLdaMagic, path);
  try {
    const auto in_dim = static_cast<Eigen::Index>(binary::read_u32(is));
    const auto out_dim = static_cast<Eigen::Index>(binary::read_u32(is));
    if (in_dim == 0 || out_dim == 0 || out_dim > in_dim) {
      throw DataError("bad dimensions");
    }
    LdaTransform lda;
    lda.mean = binary::read_matrix(is, 1, in_dim).transpose();
    lda.projection = binary::read_matrix(is, out_dim, in_dim);
    if (!lda.mean.allFinite() || !lda.projection.allFinite()) throw DataError("non-finite value");
    return lda;
  } catch (const DataError& e) {
    throw DataError(path.string() + ": malformed LDA file: " + e.what());
  }
}

}  // namespace spkback
