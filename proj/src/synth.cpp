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

#include "spkback/synth.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace spkback {

std::uint64_t CounterRng::below(std::uint64_t n) {
  if (n == 0) throw DataError("CounterRng::below(0)");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

void GenerativeConfig::validate() const {
  const auto d = static_cast<Eigen::Index>(dim);
  if (dim == 0) throw DataError("generative config: dim must be positive");
  if (n_speakers == 0) throw DataError("generative config: n_speakers must be positive");
  if (utts_per_speaker == 0) throw DataError("generative config: utts_per_speaker must be positive");
  if (between_cov.rows() != d || between_cov.cols() != d) {
    throw DataError("generative config: between_cov must be dim x dim");
  }
  if (within_cov.rows() != d || within_cov.cols() != d) {
    throw DataError("generative config: within_cov must be dim x dim");
  }
  if (global_mean.size() != d) throw DataError("generative config: global_mean must have dim entries");
  if (!between_cov.allFinite() || !within_cov.allFinite() || !global_mean.allFinite()) {
    throw DataError("generative config: non-finite parameter");
  }
  auto asym = [](const Matrix& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
  };
  if (asym(between_cov) > 1e-12) throw DataError("generative config: between_cov not symmetric");
  if (asym(within_cov) > 1e-12) throw DataError("generative config: within_cov not symmetric");
}

GenerativeConfig make_config(std::size_t dim, std::size_t n_speakers,
                             std::size_t utts_per_speaker, double between_var,
                             double within_var, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(dim);
  GenerativeConfig c;
  c.dim = dim;
  c.n_speakers = n_speakers;
  c.utts_per_speaker = utts_per_speaker;
  c.between_cov = between_var * Matrix::Identity(d, d);
  c.within_cov = within_var * Matrix::Identity(d, d);
  c.global_mean = Vector::Zero(d);
  c.seed = seed;
  return c;
}

Matrix covariance_factor(const Matrix& cov, std::string_view what) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": eigendecomposition failed");
  }
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw NumericalError(std::string(what) + " is not positive semi-definite (min eigenvalue " +
                         std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
  Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

EmbeddingSet generate(const GenerativeConfig& config) {
  config.validate();
  Eigen::LLT<Matrix> within_llt(config.within_cov);
  if (within_llt.info() != Eigen::Success) {
    throw NumericalError("within_cov is not positive definite (Cholesky failed)");
  }
  const Matrix within_factor = within_llt.matrixL();
  const Matrix between_factor = covariance_factor(config.between_cov, "between_cov");

  const auto d = static_cast<Eigen::Index>(config.dim);
  const std::size_t total = config.n_speakers * config.utts_per_speaker;
  Matrix vectors(d, static_cast<Eigen::Index>(total));
  std::vector<std::string> utts;
  std::vector<std::string> spks;
  utts.reserve(total);
  spks.reserve(total);

  char buf[32];
  for (std::size_t s = 0; s < config.n_speakers; ++s) {
    CounterRng rng(config.seed, s);
    std::snprintf(buf, sizeof(buf), "%05zu", s);
    const std::string spk = config.speaker_prefix + buf;
    const Vector y = config.global_mean + between_factor * rng.normal_vector(d);
    for (std::size_t u = 0; u < config.utts_per_speaker; ++u) {
      const auto col = static_cast<Eigen::Index>(utts.size());
      vectors.col(col) = y + within_factor * rng.normal_vector(d);
      std::snprintf(buf, sizeof(buf), "-%03zu", u);
      utts.push_back(spk + buf);
      spks.push_back(spk);
    }
  }
  return EmbeddingSet(std::move(utts), std::move(spks), std::move(vectors));
}

std::pair<EmbeddingSet, EmbeddingSet> make_two_domain(const GenerativeConfig& config_out,
                                                      const GenerativeConfig& config_in) {
  if (config_out.dim != config_in.dim) {
    throw DataError("make_two_domain: dimension mismatch (" + std::to_string(config_out.dim) +
                    " vs " + std::to_string(config_in.dim) + ")");
  }
  GenerativeConfig out = config_out;
  GenerativeConfig in = config_in;
  out.speaker_prefix = "out-" + out.speaker_prefix;
  in.speaker_prefix = "in-" + in.speaker_prefix;
  return {generate(out), generate(in)};
}

namespace {

std::vector<double> parse_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(',', start);
    auto tok = text.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                : pos - start);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw DataError(std::string(what) + ": cannot parse number '" + std::string(tok) + "'");
    }
    out.push_back(v);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Matrix read_matrix_file(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open matrix file '" + path.string() + "'");
  std::vector<double> values;
  double v;
  while (is >> v) values.push_back(v);
  if (!is.eof()) throw DataError("matrix file '" + path.string() + "': non-numeric entry");
  if (values.size() != dim * dim) {
    throw DataError("matrix file '" + path.string() + "': expected " + std::to_string(dim * dim) +
                    " entries, found " + std::to_string(values.size()));
  }
  const auto d = static_cast<Eigen::Index>(dim);
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), d, d);
}

}  // namespace

Matrix parse_covariance_spec(std::string_view spec, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (spec.starts_with("iso:")) {
    auto v = parse_list(spec.substr(4), "iso covariance");
    if (v.size() != 1) throw DataError("iso covariance takes one value");
    return v[0] * Matrix::Identity(d, d);
  }
  if (spec.starts_with("diag:")) {
    auto v = parse_list(spec.substr(5), "diag covariance");
    if (v.size() != dim) {
      throw DataError("diag covariance: expected " + std::to_string(dim) + " values, found " +
                      std::to_string(v.size()));
    }
    return Eigen::Map<Vector>(v.data(), d).asDiagonal();
  }
  return read_matrix_file(std::filesystem::path(std::string(spec)), dim);
}

Vector parse_mean_spec(std::string_view spec, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (spec == "zero") return Vector::Zero(d);
  if (spec.starts_with("fill:")) {
    auto v = parse_list(spec.substr(5), "fill mean");
    if (v.size() != 1) throw DataError("fill mean takes one value");
    return Vector::Constant(d, v[0]);
  }
  if (spec.starts_with("sparse:")) {
    Vector m = Vector::Zero(d);
    std::string_view rest = spec.substr(7);
    std::size_t start = 0;
    while (start < rest.size()) {
      auto pos = rest.find(',', start);
      auto item = rest.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                   : pos - start);
      auto eq = item.find('=');
      if (eq == std::string_view::npos) throw DataError("sparse mean: expected index=value");
      std::size_t idx = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + eq, idx);
      if (ec != std::errc() || p != item.data() + eq || idx >= dim) {
        throw DataError("sparse mean: bad index '" + std::string(item.substr(0, eq)) + "'");
      }
      m(static_cast<Eigen::Index>(idx)) = parse_list(item.substr(eq + 1), "sparse mean").at(0);
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return m;
  }
  auto v = parse_list(spec, "mean");
  if (v.size() != dim) {
    throw DataError("mean: expected " + std::to_string(dim) + " values, found " +
                    std::to_string(v.size()));
  }
  return Eigen::Map<Vector>(v.data(), d);
}

GenerativeConfig read_generative_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config '" + path.string() + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  static const std::unordered_set<std::string> known = {
      "dim", "speakers", "utts_per_speaker", "between", "within", "mean", "seed", "prefix"};
  for (const auto& [k, v] : kv) {
    if (!known.contains(k)) throw DataError(path.string() + ": unknown key '" + k + "'");
  }
  auto require = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw DataError(path.string() + ": missing key '" + k + "'");
    return it->second;
  };
  auto to_size = [&](const std::string& k) {
    const std::string& s = require(k);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw DataError(path.string() + ": bad integer for '" + k + "'");
    }
    return v;
  };
  GenerativeConfig c;
  c.dim = to_size("dim");
  c.n_speakers = to_size("speakers");
  c.utts_per_speaker = to_size("utts_per_speaker");
  if (c.dim == 0) throw DataError(path.string() + ": dim must be positive");
  c.between_cov = parse_covariance_spec(require("between"), c.dim);
  c.within_cov = parse_covariance_spec(require("within"), c.dim);
  c.global_mean = kv.contains("mean") ? parse_mean_spec(kv["mean"], c.dim)
                                      : Vector::Zero(static_cast<Eigen::Index>(c.dim));
  if (kv.contains("seed")) c.seed = to_size("seed");
  if (kv.contains("prefix")) c.speaker_prefix = kv["prefix"];
  c.validate();
  return c;
}

TrialDesign make_trials(const EmbeddingSet& set, std::size_t enroll_utts,
                        std::size_t nontargets_per_model, std::uint64_t seed) {
  if (enroll_utts == 0) throw DataError("make_trials: enroll_utts must be positive");
  const SpeakerGroups groups = group_by_speaker(set);
  std::vector<EnrollmentModel> models;
  std::vector<std::size_t> test_pool;
  std::vector<std::size_t> owner;  // speaker index of each test_pool entry
  std::vector<std::vector<std::size_t>> own_tests(groups.speakers.size());
  for (std::size_t s = 0; s < groups.speakers.size(); ++s) {
    const auto& members = groups.members[s];
    if (members.size() <= enroll_utts) continue;
    EnrollmentModel m{groups.speakers[s], {}};
    for (std::size_t k = 0; k < enroll_utts; ++k) m.utt_ids.push_back(set.utt_id(members[k]));
    models.push_back(std::move(m));
    for (std::size_t k = enroll_utts; k < members.size(); ++k) {
      own_tests[s].push_back(members[k]);
      test_pool.push_back(members[k]);
      owner.push_back(s);
    }
  }
  if (models.size() < 2) {
    throw DataError("make_trials: need at least two speakers with more than " +
                    std::to_string(enroll_utts) + " utterances");
  }

  std::vector<Trial> trials;
  std::vector<TrialLabel> labels;
  std::unordered_map<std::string, std::size_t> speaker_index;
  for (std::size_t s = 0; s < groups.speakers.size(); ++s) speaker_index[groups.speakers[s]] = s;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const std::size_t s = speaker_index.at(models[m].model_id);
    for (auto t : own_tests[s]) {
      trials.push_back({models[m].model_id, set.utt_id(t)});
      labels.push_back(TrialLabel::kTarget);
    }
    CounterRng rng(seed, m);
    std::unordered_set<std::size_t> chosen;
    const std::size_t available = test_pool.size() - own_tests[s].size();
    const std::size_t want = std::min(nontargets_per_model, available);
    while (chosen.size() < want) {
      const std::size_t pick = rng.below(test_pool.size());
      if (owner[pick] == s || !chosen.insert(pick).second) continue;
      trials.push_back({models[m].model_id, set.utt_id(test_pool[pick])});
      labels.push_back(TrialLabel::kNontarget);
    }
  }
  TrialKey key(trials, std::move(labels));
  return {EnrollmentMap(std::move(models)), TrialList(std::move(trials)), std::move(key)};
}

}  // namespace spkback
