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
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>

#include "spkback/data_model.hpp"

namespace spkback {

/// Counter-based normal/uniform generator, reproducible from (seed, stream).
///
/// The stream key is `mix(seed + G * (stream + 1))` and draw i (from 1) is
/// `mix(key + G * i)`, with G = 0x9E3779B97F4A7C15 and `mix` the SplitMix64
/// finalizer. That is a SplitMix64 sequence started at `key`.
/// Uniforms take the top 53 bits: u = (x >> 11) * 2^-53 + 2^-54, so u is in
/// (0, 1). Normals come in Box-Muller pairs from two consecutive uniforms,
/// sqrt(-2 ln u1) * (cos 2 pi u2, sin 2 pi u2), emitted cos first.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed + kGolden * (stream + 1))) {}

  std::uint64_t next_u64() { return mix(key_ + kGolden * ++counter_); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phase = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phase);
    has_spare_ = true;
    return r * std::cos(phase);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

  /// Uniform integer in [0, n) by rejection on the top bits.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct GenerativeConfig {
  std::size_t dim = 0;
  std::size_t n_speakers = 0;
  std::size_t utts_per_speaker = 0;
  Matrix between_cov;
  Matrix within_cov;
  Vector global_mean;
  std::uint64_t seed = 0;
  /// Prefix of generated speaker ids; utterance ids extend them.
  std::string speaker_prefix = "spk";

  /// Checks shapes and symmetry (1e-12); factorization is checked by generate().
  void validate() const;
};

/// Isotropic / diagonal helper used by tests and the CLI.
GenerativeConfig make_config(std::size_t dim, std::size_t n_speakers,
                             std::size_t utts_per_speaker, double between_var,
                             double within_var, std::uint64_t seed);

/// Speaker s draws y_s ~ N(mean, between) and its utterances
/// y_s + e, e ~ N(0, within), all from CounterRng(seed, s). Ids are
/// `<prefix><s:05>` and `<prefix><s:05>-<u:03>`.
EmbeddingSet generate(const GenerativeConfig& config);

/// Out-of-domain and in-domain sets with disjoint "out-"/"in-" speaker
/// namespaces (the configured prefixes are extended).
std::pair<EmbeddingSet, EmbeddingSet> make_two_domain(const GenerativeConfig& config_out,
                                                      const GenerativeConfig& config_in);

/// Lower factor L with L L^T = cov. Cholesky when positive definite, else
/// V sqrt(Lambda) from the eigendecomposition if the matrix is PSD within
/// tolerance. Throws NumericalError otherwise.
Matrix covariance_factor(const Matrix& cov, std::string_view what);

/// `diag:v1,v2,...`, `iso:v`, or a path to a whitespace-separated matrix file.
Matrix parse_covariance_spec(std::string_view spec, std::size_t dim);

/// `zero`, `fill:v`, `sparse:i=v,j=w`, or `v1,v2,...`.
Vector parse_mean_spec(std::string_view spec, std::size_t dim);

/// Reads `key=value` lines: dim, speakers, utts_per_speaker, between, within,
/// mean, seed, prefix. Unknown keys are errors.
GenerativeConfig read_generative_config(const std::filesystem::path& path);

/// Trials built from a labeled set: each speaker's first `enroll_utts`
/// utterances form a model named after the speaker, its remaining
/// utterances are target tests, and `nontargets_per_model` tests are drawn
/// from other speakers.
struct TrialDesign {
  EnrollmentMap enrollment;
  TrialList trials;
  TrialKey key;
};

TrialDesign make_trials(const EmbeddingSet& set, std::size_t enroll_utts,
                        std::size_t nontargets_per_model, std::uint64_t seed);

}  // namespace spkback
