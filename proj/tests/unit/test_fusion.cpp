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

#include <fstream>
#include <random>

#include "spkback/error.hpp"
#include "spkback/fusion.hpp"
#include "test_util.hpp"

using namespace spkback;
using spkback::testing::labeled_scores;
using spkback::testing::TempDir;

namespace {

// Equal-variance Gaussian scores with variance 2 mu are exact LLRs.
testing::LabeledScores true_llrs(std::mt19937_64& rng, std::size_t n, double mu, double p_target) {
  std::bernoulli_distribution coin(p_target);
  std::normal_distribution<double> tar(mu, std::sqrt(2.0 * mu));
  std::normal_distribution<double> non(-mu, std::sqrt(2.0 * mu));
  std::vector<double> s(n);
  std::vector<bool> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i < 2 ? i == 0 : coin(rng);
    s[i] = labels[i] ? tar(rng) : non(rng);
  }
  return labeled_scores(s, labels);
}

}  // namespace

TEST_CASE("calibrated LLRs are left nearly unchanged") {
  std::mt19937_64 rng(1);
  const auto ls = true_llrs(rng, 100000, 2.0, 0.3);
  const auto model = train_fusion({ls.scores}, ls.key);
  REQUIRE(model.n_systems() == 1);
  CHECK(model.weights[0] >= 0.9);
  CHECK(model.weights[0] <= 1.1);
  CHECK(std::abs(model.offset) < 0.1);
}

TEST_CASE("uninformative scores give a stationary offset-only model") {
  std::vector<double> s(40, 3.0);
  std::vector<bool> labels(40, false);
  for (int i = 0; i < 10; ++i) labels[i] = true;
  const auto ls = labeled_scores(s, labels);
  const auto model = train_fusion({ls.scores}, ls.key);
  const Vector params = (Vector(2) << model.weights[0], model.offset).finished();
  const auto obj = fusion_objective(align_systems({ls.scores}, ls.key), ls.key, params, 0.05, 0.0);
  CHECK(obj.gradient.norm() < 1e-8);
  // Scores are constant, so only w * 3 + b is identified; the min-norm step keeps w small.
  CHECK(std::abs(model.weights[0]) < 1.0);
}

TEST_CASE("duplicated systems share weight under ridge") {
  std::mt19937_64 rng(2);
  const auto ls = true_llrs(rng, 5000, 1.5, 0.5);
  FusionOptions opt;
  opt.ridge = 1e-3;
  const auto model = train_fusion({ls.scores, ls.scores}, ls.key, opt);
  CHECK(std::abs(model.weights[0] - model.weights[1]) < 1e-6);
}

TEST_CASE("restarts converge to the same optimum") {
  std::mt19937_64 rng(3);
  const auto a = true_llrs(rng, 3000, 1.0, 0.4);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> b;
  for (double s : a.scores.scores()) b.push_back(0.5 * s + noise(rng));
  const ScoreSet second = a.scores.with_scores(b);
  const auto ref = train_fusion({a.scores, second}, a.key);
  std::uniform_real_distribution<double> init(-3.0, 3.0);
  for (int r = 0; r < 5; ++r) {
    const Vector start = (Vector(3) << init(rng), init(rng), init(rng)).finished();
    const auto m = train_fusion({a.scores, second}, a.key, {}, start);
    CHECK(std::abs(m.weights[0] - ref.weights[0]) <= 1e-6);
    CHECK(std::abs(m.weights[1] - ref.weights[1]) <= 1e-6);
    CHECK(std::abs(m.offset - ref.offset) <= 1e-6);
  }
}

TEST_CASE("calibration does not worsen Cllr and fusion dominates") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto base = true_llrs(rng, 2000, 1.0 + 0.3 * rep, 0.2 + 0.05 * rep);
    std::normal_distribution<double> noise(0.0, 2.0);
    std::vector<double> warped, other;
    for (double s : base.scores.scores()) {
      warped.push_back(3.0 * s - 4.0);
      other.push_back(s + noise(rng));
    }
    const ScoreSet a = base.scores.with_scores(warped);
    const ScoreSet b = base.scores.with_scores(other);
    FusionOptions opt;
    opt.effective_prior = 0.5;  // Cllr is the loss at prior 0.5, up to log 2
    const auto ca = apply_fusion(train_fusion({a}, base.key, opt), {a});
    const auto cb = apply_fusion(train_fusion({b}, base.key, opt), {b});
    CHECK(cllr(ca, base.key) <= cllr(a, base.key) + 1e-9);
    CHECK(cllr(cb, base.key) <= cllr(b, base.key) + 1e-9);
    const auto fused = apply_fusion(train_fusion({a, b}, base.key, opt), {a, b});
    CHECK(cllr(fused, base.key) <= std::min(cllr(ca, base.key), cllr(cb, base.key)) + 1e-9);
  }
}

TEST_CASE("apply_fusion arithmetic") {
  const ScoreSet a({{"e", "t"}, {"e", "u"}}, {2.0, -1.0});
  const ScoreSet b({{"e", "u"}, {"e", "t"}}, {0.0, 4.0});
  const CalibrationModel identity{{1.0}, 0.0, 0.05};
  CHECK(apply_fusion(identity, {a}).scores() == a.scores());
  CHECK(apply_fusion(identity, {a}, 2.5).scores() == std::vector<double>{4.5, 1.5});
  const CalibrationModel half{{0.5, 0.5}, -1.0, 0.05};
  const auto fused = apply_fusion(half, {a, b});
  CHECK(fused.trials() == a.trials());
  CHECK(fused.score(0) == 2.0);
  CHECK(fused.score(1) == -1.5);
  CHECK_THROWS_AS(apply_fusion(half, {a}), DataError);
  CHECK_THROWS_AS(apply_fusion(half, {a, ScoreSet({{"e", "t"}}, {1.0})}), DataError);
}

TEST_CASE("cllr fixtures") {
  const auto zero = labeled_scores({0, 0, 0}, {true, false, false});
  CHECK(cllr(zero.scores, zero.key) == doctest::Approx(1.0).epsilon(1e-15));
  const auto perfect = labeled_scores({700, -700}, {true, false});
  CHECK(cllr(perfect.scores, perfect.key) < 1e-100);
  const auto small = labeled_scores({1.0, -1.0}, {true, false});
  CHECK(cllr(small.scores, small.key) ==
        doctest::Approx(std::log2(1.0 + std::exp(-1.0))).epsilon(1e-15));
  const auto one_class = labeled_scores({1.0, 2.0}, {true, true});
  CHECK_THROWS_AS(cllr(one_class.scores, one_class.key), DataError);
  CHECK_THROWS_AS(train_fusion({one_class.scores}, one_class.key), DataError);
}

TEST_CASE("training preconditions") {
  const auto ls = labeled_scores({1.0, -1.0}, {true, false});
  CHECK_THROWS_AS(train_fusion({}, ls.key), DataError);
  CHECK_THROWS_AS(train_fusion({ScoreSet({{"e0", "t0"}}, {1.0})}, ls.key), DataError);
  FusionOptions bad;
  bad.effective_prior = 1.0;
  CHECK_THROWS_AS(train_fusion({ls.scores}, ls.key, bad), DataError);
  bad = {};
  bad.ridge = -1.0;
  CHECK_THROWS_AS(train_fusion({ls.scores}, ls.key, bad), DataError);
}

TEST_CASE("calibration file round-trip") {
  TempDir dir;
  const CalibrationModel m{{0.25, -1.5, 3.0}, 0.125, 0.01};
  write_calibration(m, dir / "cal.txt");
  const auto back = read_calibration(dir / "cal.txt");
  CHECK(back.weights == m.weights);
  CHECK(back.offset == m.offset);
  CHECK(back.effective_prior == m.effective_prior);
  std::ofstream(dir / "bad.txt") << "prior=0.05\nw_1=1\n";
  CHECK_THROWS_AS(read_calibration(dir / "bad.txt"), DataError);
}
