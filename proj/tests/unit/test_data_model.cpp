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
#include "spkback/io.hpp"
#include "test_util.hpp"

using namespace spkback;
using spkback::testing::TempDir;

namespace {

EmbeddingSet random_set(std::mt19937_64& rng, std::size_t dim, std::size_t count, bool labeled) {
  std::vector<std::string> utts, spks;
  for (std::size_t i = 0; i < count; ++i) {
    utts.push_back("utt" + std::to_string(i));
    if (labeled) spks.push_back("spk" + std::to_string(i % 7));
  }
  return EmbeddingSet(utts, spks,
                      testing::random_matrix(rng, static_cast<Eigen::Index>(dim),
                                             static_cast<Eigen::Index>(count)));
}

void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream(p) << body;
}

}  // namespace

TEST_CASE("embedding set invariants") {
  Matrix v = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(EmbeddingSet({"a", "a"}, {}, v), DataError);
  CHECK_THROWS_AS(EmbeddingSet({"a", "b"}, {"s"}, v), DataError);
  CHECK_THROWS_AS(EmbeddingSet({"a"}, {}, v), DataError);
  v(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(EmbeddingSet({"a", "b"}, {}, v), DataError);

  const EmbeddingSet ok({"a", "b"}, {"s", "s"}, Matrix::Ones(3, 2));
  CHECK(ok.labeled());
  CHECK(ok.find("b") == 1u);
  CHECK_FALSE(ok.find("c").has_value());
  CHECK_FALSE(ok.unlabeled().labeled());
  CHECK(ok.with_vectors(Matrix::Zero(5, 2)).dim() == 5);
}

TEST_CASE("trial containers reject duplicates") {
  CHECK_THROWS_AS(TrialList({{"e", "t"}, {"e", "t"}}), DataError);
  CHECK_THROWS_AS(TrialKey({{"e", "t"}, {"e", "t"}}, {TrialLabel::kTarget, TrialLabel::kNontarget}),
                  DataError);
  CHECK_THROWS_AS(ScoreSet({{"e", "t"}}, {std::numeric_limits<double>::infinity()}), DataError);
  const TrialKey one({{"e", "t"}}, {TrialLabel::kTarget});
  CHECK_THROWS_AS(one.require_both_classes(), DataError);

  const ScoreSet s({{"a", "b"}, {"c", "d"}}, {1.0, 2.0});
  CHECK(s.aligned_to({{"c", "d"}, {"a", "b"}}) == std::vector<double>{2.0, 1.0});
  CHECK_THROWS_AS(s.aligned_to({{"x", "y"}}), DataError);
}

TEST_CASE("enrollment map") {
  CHECK_THROWS_AS(EnrollmentMap(std::vector<EnrollmentModel>{{"m", {}}}), DataError);
  CHECK_THROWS_AS(EnrollmentMap({{"m", {"a"}}, {"m", {"b"}}}), DataError);
  const EmbeddingSet set({"a", "b"}, {}, Matrix::Ones(2, 2));
  EnrollmentMap({{"m", {"a", "b"}}}).validate_against(set);
  CHECK_THROWS_AS(EnrollmentMap({{"m", {"a", "z"}}}).validate_against(set), DataError);
  CHECK(EnrollmentMap::identity(set).find("b")->utt_ids == std::vector<std::string>{"b"});
}

TEST_CASE("embedding files round-trip") {
  TempDir dir;
  std::mt19937_64 rng(1);

  SUBCASE("two records of dim 3") {
    const auto set = random_set(rng, 3, 2, true);
    write_embeddings(set, dir / "a.txt", EmbeddingFormat::kText);
    const auto back = read_embeddings(dir / "a.txt");
    CHECK(back.dim() == 3);
    CHECK(back.size() == 2);
  }
  SUBCASE("empty set") {
    const EmbeddingSet empty(10);
    write_embeddings(empty, dir / "e.bin", EmbeddingFormat::kBinary);
    const auto back = read_embeddings(dir / "e.bin");
    CHECK(back.empty());
    CHECK(back.dim() == 10);
  }
  SUBCASE("binary is bit-identical, text within 1e-12") {
    for (std::size_t dim : {100u, 192u, 512u}) {
      const auto set = random_set(rng, dim, 50, dim != 100);
      write_embeddings(set, dir / "b.bin", EmbeddingFormat::kBinary);
      CHECK(read_embeddings(dir / "b.bin", EmbeddingFormat::kBinary) == set);
      write_embeddings(set, dir / "b.txt", EmbeddingFormat::kText);
      const auto text = read_embeddings(dir / "b.txt", EmbeddingFormat::kText);
      CHECK(text.utt_ids() == set.utt_ids());
      CHECK(text.speaker_ids() == set.speaker_ids());
      CHECK((text.vectors() - set.vectors()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("binary round-trip property over dims and counts") {
  TempDir dir;
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t dim = 1 + rng() % 600;
    const std::size_t count = rep == 0 ? 0 : rng() % 1001;
    const auto set = random_set(rng, dim, count, rep % 3 != 0);
    write_embeddings(set, dir / "p.bin", EmbeddingFormat::kBinary);
    CHECK(read_embeddings(dir / "p.bin") == set);
  }
}

TEST_CASE("invalid embedding files are rejected") {
  TempDir dir;
  write_text(dir / "bad.txt", "#dim=3 labeled=0\nu1 1 2 3\nu2 1 2 3\nu3 1 2 3 4\n");
  try {
    read_embeddings(dir / "bad.txt", EmbeddingFormat::kText);
    FAIL("expected a dimension mismatch");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("record 3") != std::string::npos);
  }
  write_text(dir / "dup.txt", "#dim=1 labeled=0\nu1 1\nu1 2\n");
  CHECK_THROWS_AS(read_embeddings(dir / "dup.txt"), DataError);
  write_text(dir / "nan.txt", "#dim=1 labeled=0\nu1 nan\n");
  CHECK_THROWS_AS(read_embeddings(dir / "nan.txt"), DataError);
  write_text(dir / "trunc.bin", "SVE1\x03");
  CHECK_THROWS_AS(read_embeddings(dir / "trunc.bin", EmbeddingFormat::kBinary), DataError);
  CHECK_THROWS_AS(read_embeddings(dir / "missing.bin"), DataError);
}

TEST_CASE("key, trial, score and enrollment files") {
  TempDir dir;
  write_text(dir / "k", "e1\tt1\ttarget\ne1\tt2\tnontarget\textra\n");
  const auto key = read_key(dir / "k");
  REQUIRE(key.size() == 2);
  CHECK(key.trial(0) == Trial{"e1", "t1"});
  CHECK(key.is_target(0));
  CHECK_FALSE(key.is_target(1));

  write_text(dir / "bogus", "e1\tt1\tbogus\n");
  CHECK_THROWS_AS(read_key(dir / "bogus"), DataError);
  write_text(dir / "short", "e1\n");
  CHECK_THROWS_AS(read_trials(dir / "short"), DataError);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 10.0);
  std::vector<Trial> trials;
  std::vector<double> scores;
  for (int i = 0; i < 1000; ++i) {
    trials.push_back({"m" + std::to_string(i % 31), "u" + std::to_string(i)});
    scores.push_back(n(rng));
  }
  const ScoreSet set(trials, scores);
  write_scores(set, dir / "s");
  const auto back = read_scores(dir / "s");
  CHECK(back.trials() == set.trials());
  CHECK(back.scores() == set.scores());

  write_trials(TrialList(trials), dir / "t");
  CHECK(read_trials(dir / "t").trials() == trials);
  write_key(key, dir / "k2");
  CHECK(read_key(dir / "k2").labels() == key.labels());

  const EnrollmentMap map({{"m1", {"a", "b"}}, {"m2", {"c"}}});
  write_enrollment(map, dir / "enr");
  const auto m = read_enrollment(dir / "enr");
  REQUIRE(m.size() == 2);
  CHECK(m.find("m1")->utt_ids == std::vector<std::string>{"a", "b"});
}
