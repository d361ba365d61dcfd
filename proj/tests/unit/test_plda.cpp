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

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spkback/error.hpp"
#include "spkback/kernel.hpp"
#include "spkback/plda.hpp"
#include "spkback/synth.hpp"
#include "test_util.hpp"

using namespace spkback;
using spkback::testing::TempDir;

namespace {

PldaModel random_model(std::mt19937_64& rng, Eigen::Index d) {
  return {testing::random_matrix(rng, d, 1), testing::random_spd(rng, d, 0.05),
          testing::random_spd(rng, d, 0.2)};
}

}  // namespace

TEST_CASE("recovers generating covariances") {
  auto cfg = make_config(5, 3000, 8, 2.0, 1.0, 123);
  const auto result = train_plda(generate(cfg));
  CHECK(result.warnings.empty());
  CHECK(testing::relative_frobenius(result.model.between, cfg.between_cov) < 0.10);
  CHECK(testing::relative_frobenius(result.model.within, cfg.within_cov) < 0.10);
}

TEST_CASE("EM log-likelihood never decreases") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 5; ++rep) {
    GenerativeConfig cfg;
    cfg.dim = 4 + rep;
    const auto d = static_cast<Eigen::Index>(cfg.dim);
    cfg.n_speakers = 150;
    cfg.utts_per_speaker = 2 + static_cast<std::size_t>(rep);
    cfg.between_cov = testing::random_spd(rng, d, 0.01);
    cfg.within_cov = testing::random_spd(rng, d, 0.5);
    cfg.global_mean = testing::random_matrix(rng, d, 1);
    cfg.seed = static_cast<std::uint64_t>(rep);
    const auto result = train_plda(generate(cfg), {50, 1e-12});
    const auto& ll = result.log_likelihood;
    REQUIRE(ll.size() >= 2);
    for (std::size_t i = 1; i < ll.size(); ++i) CHECK(ll[i] >= ll[i - 1] - 1e-9);
    CHECK(ll.back() == doctest::Approx(plda_log_likelihood(result.model, generate(cfg))));
  }
}

TEST_CASE("single-utterance speakers are flagged") {
  const auto set = generate(make_config(3, 200, 1, 1.0, 1.0, 2));
  const auto result = train_plda(set);
  REQUIRE(result.warnings.size() == 1);
  const Vector mean = set.vectors().rowwise().mean();
  const Matrix c = set.vectors().colwise() - mean;
  const Matrix total = c * c.transpose() / static_cast<double>(set.size());
  CHECK(result.model.between.isApprox(0.5 * total, 1e-12));
  CHECK(result.model.within.isApprox(0.5 * total, 1e-6));
  CHECK_THROWS_AS(train_plda(generate(make_config(3, 1, 4, 1.0, 1.0, 2))), DataError);
}

TEST_CASE("closed-form LLR in one dimension") {
  const PldaModel m{Vector::Zero(1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  const Vector one = Vector::Ones(1);
  // log N([1,1]; 0, [[2,1],[1,2]]) - log N([1,1]; 0, 2I).
  CHECK(score_plda(m, one, one) == doctest::Approx(0.31050770289255736).epsilon(1e-13));
  CHECK(std::abs(score_plda(m, one, one) -
                 oracle::stacked_llr(m.mean, m.between, m.within, one, one)) < 1e-12);
}

TEST_CASE("zero between-class covariance scores zero") {
  std::mt19937_64 rng(4);
  const PldaModel m{Vector::Zero(3), Matrix::Zero(3, 3), testing::random_spd(rng, 3)};
  for (int i = 0; i < 20; ++i) {
    CHECK(score_plda(m, testing::random_matrix(rng, 3, 1), testing::random_matrix(rng, 3, 1)) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("LLR matches the stacked-Gaussian density oracle") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 300; ++rep) {
    const Eigen::Index d = 1 + rep % 3;
    const auto m = random_model(rng, d);
    const Vector e = testing::random_matrix(rng, d, 1, 2.0);
    const Vector t = testing::random_matrix(rng, d, 1, 2.0);
    const double llr = score_plda(m, e, t);
    CHECK(std::abs(llr - oracle::stacked_llr(m.mean, m.between, m.within, e, t)) < 1e-8);
    CHECK(std::abs(llr - score_plda(m, t, e)) < 1e-12);
  }
}

TEST_CASE("same-speaker pairs outscore different-speaker pairs") {
  const auto cfg = make_config(10, 2000, 10, 1.0, 1.0, 8);
  const auto set = generate(cfg);
  const PldaModel m{cfg.global_mean, cfg.between_cov, cfg.within_cov};
  const PldaScorer scorer(m);
  const Matrix p = scorer.project(set.vectors());
  double same = 0.0, diff = 0.0;
  for (Eigen::Index i = 0; i < 10000; ++i) {
    const Eigen::Index spk = i % 2000;
    same += scorer.score_projected(p.col(10 * spk), p.col(10 * spk + 1 + i / 2000));
    diff += scorer.score_projected(p.col(10 * spk), p.col(10 * ((spk + 1 + i / 2000) % 2000)));
  }
  CHECK(same > diff);
}

TEST_CASE("adaptation") {
  std::mt19937_64 rng(9);
  const auto cfg = make_config(4, 10000, 10, 2.0, 1.0, 5);
  const PldaModel m{cfg.global_mean, cfg.between_cov, cfg.within_cov};

  SUBCASE("alpha zero leaves the model unchanged") {
    const auto in = generate(make_config(4, 50, 2, 5.0, 5.0, 1));
    const auto a = adapt_plda(m, in, 0.0);
    CHECK(a.mean == m.mean);
    CHECK(a.between == m.between);
    CHECK(a.within == m.within);
  }
  SUBCASE("self-adaptation is near identity") {
    const auto a = adapt_plda(m, generate(cfg), 1.0);
    CHECK(testing::relative_frobenius(a.between, m.between) < 0.05);
    CHECK((a.mean - m.mean).norm() < 0.05 * std::sqrt(m.within.trace() / 4.0));
  }
  SUBCASE("doubled total covariance") {
    const auto in = generate(make_config(4, 10000, 10, 4.0, 2.0, 6));
    const auto a = adapt_plda(m, in, 1.0);
    CHECK((a.between + a.within).trace() ==
          doctest::Approx(2.0 * (m.between + m.within).trace()).epsilon(0.05));
    // Excess split by trace share: B gets 2/3, W gets 1/3.
    CHECK((a.between - m.between).trace() ==
          doctest::Approx(2.0 * (a.within - m.within).trace()).epsilon(1e-9));
  }
  SUBCASE("shrinking data adds nothing") {
    const auto in = generate(make_config(4, 2000, 10, 0.5, 0.5, 6));
    const auto a = adapt_plda(m, in, 0.5);
    CHECK(a.between.isApprox(m.between, 0.02));
  }
  CHECK_THROWS_AS(adapt_plda(m, generate(make_config(3, 5, 2, 1, 1, 0)), 0.5), DataError);
  CHECK_THROWS_AS(adapt_plda(m, generate(cfg), 1.5), DataError);
}

TEST_CASE("multi-utterance enrollment averages scores") {
  std::mt19937_64 rng(23);
  const auto m = random_model(rng, 3);
  const Matrix v = testing::random_matrix(rng, 3, 5);
  Matrix w = v;
  w.col(1) = w.col(0);
  const EmbeddingSet set({"a", "b", "c", "d", "t"}, {}, w);
  const EnrollmentMap enroll({{"one", {"a"}}, {"twin", {"a", "b"}}, {"three", {"b", "c", "d"}},
                              {"t", {"t"}}});
  const TrialList trials({{"one", "t"}, {"twin", "t"}, {"three", "t"}});
  const auto scores = score_trials_plda(m, set, enroll, trials);
  const Vector t = w.col(4);
  const double single = score_plda(m, w.col(0), t);
  CHECK(std::abs(scores.score(0) - single) < 1e-12);
  CHECK(std::abs(scores.score(1) - single) < 1e-12);
  const double mean3 =
      (score_plda(m, w.col(1), t) + score_plda(m, w.col(2), t) + score_plda(m, w.col(3), t)) / 3.0;
  CHECK(std::abs(scores.score(2) - mean3) < 1e-12);

  CHECK_THROWS_AS(score_trials_plda(m, set, enroll, TrialList(std::vector<Trial>{{"nobody", "t"}})), DataError);
  CHECK_THROWS_AS(score_trials_plda(m, set, enroll, TrialList(std::vector<Trial>{{"one", "zz"}})), DataError);
}

TEST_CASE("parallel trial scoring is thread-count invariant") {
  const auto set = generate(make_config(6, 100, 4, 1.0, 1.0, 3));
  const auto design = make_trials(set, 2, 20, 1);
  const auto m = train_plda(set).model;
  const auto one = score_trials_plda(m, set, design.enrollment, design.trials, 1);
  const auto four = score_trials_plda(m, set, design.enrollment, design.trials, 4);
  CHECK(one.scores() == four.scores());
  CHECK(one.trials() == design.trials.trials());
}

TEST_CASE("model validation and files") {
  TempDir dir;
  std::mt19937_64 rng(1);
  const auto m = random_model(rng, 3);
  write_plda(m, dir / "m.bin");
  const auto back = read_plda(dir / "m.bin");
  CHECK(back.mean == m.mean);
  CHECK(back.between == m.between);
  CHECK(back.within == m.within);

  auto bad = m;
  bad.within = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(bad.validate(), NumericalError);
  bad = m;
  bad.between(0, 1) += 1.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  CHECK_THROWS_AS(score_plda(m, Vector::Zero(2), Vector::Zero(3)), DataError);
  CHECK_THROWS_AS(read_plda(dir / "absent"), DataError);
}
