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

#include "spkback/data_model.hpp"

namespace spkback {

/// Count-weighted between-class scatter and pooled within-class scatter.
///
/// between = (1/N) sum_s n_s (m_s - m)(m_s - m)^T
/// within  = 1/(N - S) sum_s sum_{i in s} (x_i - m_s)(x_i - m_s)^T
struct ClassScatter {
  Vector mean;
  Matrix between;
  Matrix within;
  std::size_t num_classes = 0;
  std::size_t num_samples = 0;
};

ClassScatter class_scatter(const EmbeddingSet& data);

struct LdaTransform {
  Vector mean;        // in_dim
  Matrix projection;  // out_dim x in_dim
  /// Generalized eigenvalues of the kept directions, decreasing. Not persisted.
  Vector eigenvalues;

  std::size_t in_dim() const { return static_cast<std::size_t>(projection.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(projection.rows()); }
};

/// Fits LDA by solving S_b v = lambda (S_w + ridge I) v and keeping the
/// `out_dim` largest eigenvalues. Rows are scaled so the projected
/// within-class covariance is the identity and signed so each row's first
/// nonzero component is positive. An absent ridge means
/// 1e-6 * trace(S_w) / dim.
LdaTransform fit_lda(const EmbeddingSet& data, std::size_t out_dim,
                     std::optional<double> ridge = std::nullopt);

/// x -> projection (x - mean). `center` replaces the fitted mean when given.
EmbeddingSet apply_lda(const LdaTransform& lda, const EmbeddingSet& set,
                       const std::optional<Vector>& center = std::nullopt);

/// Columnwise x -> sqrt(dim) x / ||x||. Zero columns are left to the caller.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
length_normalized(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar target = std::sqrt(static_cast<Scalar>(x.rows()));
  return x * (target / x.colwise().norm().array()).matrix().asDiagonal();
}

/// Throws DataError naming the first zero-norm utterance.
EmbeddingSet length_normalize(const EmbeddingSet& set);

void write_lda(const LdaTransform& lda, const std::filesystem::path& path);
LdaTransform read_lda(const std::filesystem::path& path);

}  // namespace spkback
