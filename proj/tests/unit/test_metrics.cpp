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

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spkback/error.hpp"
#include "spkback/metrics.hpp"
#include "test_util.hpp"

using namespace spkback;
using spkback::testing::labeled_scores;

namespace {

std::vector<bool> random_labels(std::mt19937_64& rng, std::size_t n) {
  std::vector<bool> labels(n);
  std::bernoulli_distribution coin(0.3);
  for (auto&& l : labels) l = coin(rng);
  labels[0] = true;
  labels[1] = false;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

// Coarse scores so that ties are common.
std::vector<double> random_scores(std::mt19937_64& rng, const std::vector<bool>& labels,
                                  bool quantized) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(labels.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = n(rng) + (labels[i] ? 1.5 : 0.0);
    if (quantized) s[i] = std::round(4.0 * s[i]) / 4.0;
  }
  return s;
}

}  // namespace

TEST_CASE("eer on worked fixtures") {
  SUBCASE("interleaved targets and nontargets") {
    const auto ls = labeled_scores({1, 3, 2, 4}, {true, true, false, false});
    CHECK(eer(error_profile(ls.scores, ls.key)) == 0.5);
  }
  SUBCASE("separable") {
    const auto ls = labeled_scores({1, 0}, {true, false});
    const auto profile = error_profile(ls.scores, ls.key);
    CHECK(eer(profile) == 0.0);
    const auto det = det_points(profile);
    CHECK(std::find(det.begin(), det.end(), std::make_pair(0.0, 0.0)) != det.end());
    CHECK(min_dcf(profile, {}).value == 0.0);
  }
  SUBCASE("anti-separable") {
    const auto ls = labeled_scores({0, 1}, {true, false});
    CHECK(eer(error_profile(ls.scores, ls.key)) == 1.0);
  }
}

TEST_CASE("all-equal scores give two operating points") {
  const auto ls = labeled_scores({0.5, 0.5, 0.5, 0.5}, {true, false, true, false});
  const auto profile = error_profile(ls.scores, ls.key);
  const auto det = det_points(profile);
  REQUIRE(det.size() == 2);
  CHECK(det[0] == std::make_pair(0.0, 1.0));
  CHECK(det[1] == std::make_pair(1.0, 0.0));
  CHECK(min_dcf(profile, {0.5, 1.0, 1.0}).value == 1.0);
}

TEST_CASE("profile is monotone and bounded") {
  std::mt19937_64 rng(11);
  const auto labels = random_labels(rng, 300);
  const auto ls = labeled_scores(random_scores(rng, labels, true), labels);
  const auto p = error_profile(ls.scores, ls.key);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p.p_miss[i] >= 0.0);
    CHECK(p.p_fa[i] <= 1.0);
    if (i > 0) {
      CHECK(p.thresholds[i] > p.thresholds[i - 1]);
      CHECK(p.p_miss[i] >= p.p_miss[i - 1]);
      CHECK(p.p_fa[i] <= p.p_fa[i - 1]);
    }
  }
}

TEST_CASE("metrics match the brute-force scan exactly") {
  std::mt19937_64 rng(2024);
  const std::vector<DcfParams> points = {{0.01, 1, 1}, {0.005, 1, 1}, {0.5, 1, 1}, {0.2, 3, 0.5}};
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng() % 199;
    const auto labels = random_labels(rng, n);
    const auto scores = random_scores(rng, labels, rep % 2 == 0);
    const auto ls = labeled_scores(scores, labels);
    const auto profile = error_profile(ls.scores, ls.key);

    CHECK(eer(profile) == oracle::brute_eer(scores, labels));
    CHECK(det_points(profile) == oracle::brute_det(scores, labels));
    for (const auto& dp : points) {
      CHECK(min_dcf(profile, dp).value ==
            oracle::brute_min_dcf(scores, labels, dp.p_target, dp.c_miss, dp.c_fa));
      CHECK(act_dcf(ls.scores, ls.key, dp) ==
            oracle::brute_act_dcf(scores, labels, dp.p_target, dp.c_miss, dp.c_fa));
    }
    const double both = primary_dcf(ls.scores, ls.key, default_dcf_params());
    const double expected = (oracle::brute_min_dcf(scores, labels, 0.01, 1, 1) +
                             oracle::brute_min_dcf(scores, labels, 0.005, 1, 1)) /
                            2.0;
    CHECK(both == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("min_dcf threshold reproduces its value") {
  std::mt19937_64 rng(5);
  const auto labels = random_labels(rng, 120);
  const auto scores = random_scores(rng, labels, false);
  const auto ls = labeled_scores(scores, labels);
  const DcfParams dp{0.05, 1, 1};
  const auto best = min_dcf(error_profile(ls.scores, ls.key), dp);
  std::size_t misses = 0, fas = 0, nt = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    nt += labels[i] ? 1 : 0;
    if (labels[i] && scores[i] < best.threshold) ++misses;
    if (!labels[i] && scores[i] >= best.threshold) ++fas;
  }
  CHECK(normalized_dcf(misses, fas, nt, scores.size() - nt, dp) == best.value);
}

TEST_CASE("invariance to monotone transforms and trial order") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const auto labels = random_labels(rng, 150);
    const auto scores = random_scores(rng, labels, rep % 2 == 0);
    const auto base = labeled_scores(scores, labels);
    const auto bp = error_profile(base.scores, base.key);

    std::vector<double> warped(scores);
    for (auto& s : warped) s = std::exp(0.5 * s) + 3.0;
    const auto w = labeled_scores(warped, labels);
    const auto wp = error_profile(w.scores, w.key);
    CHECK(eer(wp) == eer(bp));
    CHECK(det_points(wp) == det_points(bp));
    CHECK(min_dcf(wp, {}).value == min_dcf(bp, {}).value);

    std::vector<std::size_t> perm(scores.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Trial> trials;
    std::vector<double> s;
    for (auto i : perm) {
      trials.push_back(base.scores.trial(i));
      s.push_back(scores[i]);
    }
    const ScoreSet shuffled(trials, s);
    const auto sp = error_profile(shuffled, base.key);
    CHECK(eer(sp) == eer(bp));
    CHECK(min_dcf(sp, {}).value == min_dcf(bp, {}).value);
    CHECK(act_dcf(shuffled, base.key, {}) == act_dcf(base.scores, base.key, {}));
  }
}

TEST_CASE("actDCF bounds and miscalibration") {
  std::mt19937_64 rng(3);
  const auto labels = random_labels(rng, 400);
  const auto scores = random_scores(rng, labels, false);
  const auto ls = labeled_scores(scores, labels);
  for (const auto& dp : std::vector<DcfParams>{{0.01, 1, 1}, {0.3, 2, 1}}) {
    CHECK(act_dcf(ls.scores, ls.key, dp) >=
          min_dcf(error_profile(ls.scores, ls.key), dp).value - 1e-12);
  }
  CHECK(DcfParams{0.5, 1, 1}.bayes_threshold() == 0.0);

  std::vector<double> shifted(scores);
  for (auto& s : shifted) s += 10.0;
  const auto sh = labeled_scores(shifted, labels);
  const DcfParams dp{0.5, 1, 1};
  CHECK(act_dcf(sh.scores, sh.key, dp) > act_dcf(ls.scores, ls.key, dp));
  CHECK(min_dcf(error_profile(sh.scores, sh.key), dp).value ==
        min_dcf(error_profile(ls.scores, ls.key), dp).value);
}

TEST_CASE("primary DCF averages operating points") {
  std::mt19937_64 rng(8);
  const auto labels = random_labels(rng, 60);
  const auto ls = labeled_scores(random_scores(rng, labels, false), labels);
  const DcfParams dp{0.01, 1, 1};
  const double single = min_dcf(error_profile(ls.scores, ls.key), dp).value;
  CHECK(primary_dcf(ls.scores, ls.key, {dp}) == single);
  CHECK(primary_dcf(ls.scores, ls.key, {dp, dp}) == single);
  CHECK_THROWS_AS(primary_dcf(ls.scores, ls.key, {}), DataError);
}

TEST_CASE("metric preconditions") {
  const auto one_class = labeled_scores({1, 2}, {true, true});
  CHECK_THROWS_AS(error_profile(one_class.scores, one_class.key), DataError);

  const auto ls = labeled_scores({1, 2}, {true, false});
  const ScoreSet partial({ls.scores.trial(0)}, {1.0});
  CHECK_THROWS_AS(error_profile(partial, ls.key), DataError);
  CHECK_THROWS_AS((DcfParams{0.0, 1, 1}.validate()), DataError);
  CHECK_THROWS_AS((DcfParams{0.1, -1, 1}.validate()), DataError);
}

TEST_CASE("report formatting") {
  const std::vector<SystemReport> rows = {{"plda", 0.0453, 0.19, std::nullopt},
                                          {"fusion", 0.04, 0.1873, 0.2412}};
  const std::string text = format_report(rows);
  CHECK(text.find("4.53") != std::string::npos);
  CHECK(text.find("0.190") != std::string::npos);
  CHECK(text.find("0.241") != std::string::npos);
  CHECK(text.find(" -") != std::string::npos);
  const std::string tsv = format_report_tsv(rows);
  CHECK(tsv.rfind("system\tEER%\tminDCF\tactDCF\n", 0) == 0);
  CHECK(tsv.find("fusion\t4.00\t0.187\t0.241") != std::string::npos);
}
