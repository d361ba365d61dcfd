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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "spkback/data_model.hpp"

namespace spkback {

enum class EmbeddingFormat { kBinary, kText };

/// Binary layout, all little-endian:
///   "SVE1" | u32 dim | u64 count | count x record
///   record = u16 len | utt id | u8 has_speaker | [u16 len | speaker id] | dim x f64
/// Text layout: header `#dim=D labeled={0,1}` then `utt [spk] v1 ... vD` per line.
EmbeddingSet read_embeddings(const std::filesystem::path& path,
                             EmbeddingFormat format);
void write_embeddings(const EmbeddingSet& set,
                      const std::filesystem::path& path,
                      EmbeddingFormat format);

/// Sniffs the "SVE1" magic, falling back to text.
EmbeddingSet read_embeddings(const std::filesystem::path& path);

TrialList read_trials(const std::filesystem::path& path);
void write_trials(const TrialList& trials, const std::filesystem::path& path);

TrialKey read_key(const std::filesystem::path& path);
void write_key(const TrialKey& key, const std::filesystem::path& path);

ScoreSet read_scores(const std::filesystem::path& path);
void write_scores(const ScoreSet& scores, const std::filesystem::path& path);

EnrollmentMap read_enrollment(const std::filesystem::path& path);
void write_enrollment(const EnrollmentMap& map,
                      const std::filesystem::path& path);

/// Shortest-safe decimal form of a double (17 significant digits).
std::string format_real(double value);

namespace binary {

// Little-endian primitives shared by the model containers.
void write_magic(std::ostream& os, std::string_view magic);
void expect_magic(std::istream& is, std::string_view magic,
                  const std::filesystem::path& path);
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);

/// Row-major f64 block.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols);

}  // namespace binary

}  // namespace spkback
