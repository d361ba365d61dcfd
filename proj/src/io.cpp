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

#include "spkback/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

namespace spkback {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw DataError("cannot open '" + path.string() + "' for reading");
  return is;
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream os(path, binary ? (std::ios::binary | std::ios::trunc) : std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  return os;
}

void finish(std::ofstream& os, const fs::path& path) {
  os.flush();
  if (!os) throw DataError("write to '" + path.string() + "' failed");
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i == line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> parse_real(std::string_view tok) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return v;
}

// Reads LF-terminated lines, skipping blank lines and '#' comments.
template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  auto is = open_in(path, false);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    fn(std::string_view(line), lineno);
  }
}

[[noreturn]] void line_error(const fs::path& path, std::size_t lineno,
                             const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + what);
}

void read_exact(std::istream& is, char* dst, std::size_t n) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw DataError("unexpected end of binary file");
  }
}

template <typename T>
void write_le(std::ostream& os, T v) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  std::array<char, sizeof(T)> bytes;
  read_exact(is, bytes.data(), sizeof(T));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return v;
}

void write_string16(std::ostream& os, const std::string& s) {
  if (s.size() > 0xffff) throw DataError("identifier longer than 65535 bytes: " + s.substr(0, 32));
  binary::write_u16(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string16(std::istream& is) {
  std::string s(binary::read_u16(is), '\0');
  read_exact(is, s.data(), s.size());
  return s;
}

constexpr std::string_view kEmbeddingMagic = "SVE1";

EmbeddingSet read_embeddings_binary(const fs::path& path) {
  auto is = open_in(path, true);
  binary::expect_magic(is, kEmbeddingMagic, path);
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
  try {
    dim = binary::read_u32(is);
    count = binary::read_u64(is);
  } catch (const DataError&) {
    throw DataError(path.string() + ": truncated header");
  }
  if (dim == 0) throw DataError(path.string() + ": malformed header (dim 0)");

  std::vector<std::string> utts;
  std::vector<std::string> spks;
  Matrix vectors(dim, 0);
  std::optional<bool> labeled;
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::string where = path.string() + ": record " + std::to_string(r + 1);
    try {
      std::string utt = read_string16(is);
      std::uint8_t has_spk = 0;
      read_exact(is, reinterpret_cast<char*>(&has_spk), 1);
      if (has_spk > 1) throw DataError("bad speaker flag");
      if (!labeled) labeled = has_spk == 1;
      if (*labeled != (has_spk == 1)) {
        throw DataError("speaker label presence differs from earlier records");
      }
      if (has_spk) spks.push_back(read_string16(is));
      if (vectors.cols() == static_cast<Eigen::Index>(utts.size())) {
        vectors.conservativeResize(Eigen::NoChange,
                                   std::max<Eigen::Index>(16, 2 * vectors.cols()));
      }
      auto col = vectors.col(static_cast<Eigen::Index>(utts.size()));
      for (std::uint32_t k = 0; k < dim; ++k) {
        col(k) = binary::read_f64(is);
        if (!std::isfinite(col(k))) throw DataError("non-finite value");
      }
      utts.push_back(std::move(utt));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw DataError(path.string() + ": trailing bytes after " + std::to_string(count) +
                    " records");
  }
  vectors.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(utts.size()));
  if (utts.empty()) return EmbeddingSet(dim, labeled.value_or(false));
  return EmbeddingSet(std::move(utts), std::move(spks), std::move(vectors));
}

EmbeddingSet read_embeddings_text(const fs::path& path) {
  auto is = open_in(path, false);
  std::string header;
  if (!std::getline(is, header)) throw DataError(path.string() + ": missing header");
  unsigned long dim = 0;
  int labeled = -1;
  {
    char tail = 0;
    if (std::sscanf(header.c_str(), "#dim=%lu labeled=%d%c", &dim, &labeled, &tail) != 2 ||
        dim == 0 || (labeled != 0 && labeled != 1)) {
      throw DataError(path.string() + ": malformed header '" + header +
                      "' (expected '#dim=D labeled={0,1}')");
    }
  }
  const std::size_t id_cols = labeled ? 2 : 1;
  std::vector<std::string> utts;
  std::vector<std::string> spks;
  std::vector<double> values;
  std::string line;
  std::size_t record = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++record;
    auto toks = split_ws(line);
    const std::string where = path.string() + ": record " + std::to_string(record);
    if (toks.size() != id_cols + dim) {
      throw DataError(where + ": dimension mismatch (expected " + std::to_string(dim) +
                      " values, found " +
                      std::to_string(toks.size() < id_cols ? 0 : toks.size() - id_cols) + ")");
    }
    utts.emplace_back(toks[0]);
    if (labeled) spks.emplace_back(toks[1]);
    for (std::size_t k = id_cols; k < toks.size(); ++k) {
      auto v = parse_real(toks[k]);
      if (!v) throw DataError(where + ": cannot parse value '" + std::string(toks[k]) + "'");
      if (!std::isfinite(*v)) throw DataError(where + ": non-finite value");
      values.push_back(*v);
    }
  }
  if (utts.empty()) return EmbeddingSet(dim, labeled == 1);
  Matrix vectors = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(dim),
                                      static_cast<Eigen::Index>(utts.size()));
  return EmbeddingSet(std::move(utts), std::move(spks), std::move(vectors));
}

}  // namespace

std::string format_real(double value) {
  std::array<char, 32> buf;
  int n = std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

namespace binary {

void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

void expect_magic(std::istream& is, std::string_view magic, const fs::path& path) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (static_cast<std::size_t>(is.gcount()) != magic.size() || got != magic) {
    throw DataError(path.string() + ": malformed header (expected magic '" +
                    std::string(magic) + "')");
  }
}

void write_u16(std::ostream& os, std::uint16_t v) { write_le(os, v); }
void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }
std::uint16_t read_u16(std::istream& is) { return read_le<std::uint16_t>(is); }
std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }
double read_f64(std::istream& is) { return std::bit_cast<double>(read_le<std::uint64_t>(is)); }

void write_matrix(std::ostream& os, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
}

Matrix read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_f64(is);
  return m;
}

}  // namespace binary

EmbeddingSet read_embeddings(const fs::path& path, EmbeddingFormat format) {
  return format == EmbeddingFormat::kBinary ? read_embeddings_binary(path)
                                            : read_embeddings_text(path);
}

EmbeddingSet read_embeddings(const fs::path& path) {
  auto is = open_in(path, true);
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  const bool binary = is.gcount() == 4 &&
                      std::string_view(magic.data(), 4) == kEmbeddingMagic;
  return read_embeddings(path, binary ? EmbeddingFormat::kBinary : EmbeddingFormat::kText);
}

void write_embeddings(const EmbeddingSet& set, const fs::path& path,
                      EmbeddingFormat format) {
  if (format == EmbeddingFormat::kBinary) {
    auto os = open_out(path, true);
    binary::write_magic(os, kEmbeddingMagic);
    binary::write_u32(os, static_cast<std::uint32_t>(set.dim()));
    binary::write_u64(os, set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      write_string16(os, set.utt_id(i));
      const char flag = set.labeled() ? 1 : 0;
      os.write(&flag, 1);
      if (set.labeled()) write_string16(os, set.speaker_id(i));
      auto v = set.vector(i);
      for (Eigen::Index k = 0; k < v.size(); ++k) binary::write_f64(os, v(k));
    }
    finish(os, path);
    return;
  }
  auto os = open_out(path, false);
  os << "#dim=" << set.dim() << " labeled=" << (set.labeled() ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << set.utt_id(i);
    if (set.labeled()) os << ' ' << set.speaker_id(i);
    auto v = set.vector(i);
    for (Eigen::Index k = 0; k < v.size(); ++k) os << ' ' << format_real(v(k));
    os << '\n';
  }
  finish(os, path);
}

TrialList read_trials(const fs::path& path) {
  std::vector<Trial> trials;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    auto cols = split(line, '\t');
    if (cols.size() < 2 || cols[0].empty() || cols[1].empty()) {
      line_error(path, lineno, "expected 'enroll_id<TAB>test_id'");
    }
    trials.push_back({std::string(cols[0]), std::string(cols[1])});
  });
  return TrialList(std::move(trials));
}

void write_trials(const TrialList& trials, const fs::path& path) {
  auto os = open_out(path, false);
  for (const auto& t : trials) os << t.enroll_id << '\t' << t.test_id << '\n';
  finish(os, path);
}

TrialKey read_key(const fs::path& path) {
  std::vector<Trial> trials;
  std::vector<TrialLabel> labels;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    auto cols = split(line, '\t');
    if (cols.size() < 3 || cols[0].empty() || cols[1].empty()) {
      line_error(path, lineno, "expected 'enroll_id<TAB>test_id<TAB>{target|nontarget}'");
    }
    TrialLabel label;
    if (cols[2] == "target") {
      label = TrialLabel::kTarget;
    } else if (cols[2] == "nontarget") {
      label = TrialLabel::kNontarget;
    } else {
      line_error(path, lineno, "unknown label '" + std::string(cols[2]) + "'");
    }
    trials.push_back({std::string(cols[0]), std::string(cols[1])});
    labels.push_back(label);
  });
  return TrialKey(std::move(trials), std::move(labels));
}

void write_key(const TrialKey& key, const fs::path& path) {
  auto os = open_out(path, false);
  for (std::size_t i = 0; i < key.size(); ++i) {
    os << key.trial(i).enroll_id << '\t' << key.trial(i).test_id << '\t'
       << (key.is_target(i) ? "target" : "nontarget") << '\n';
  }
  finish(os, path);
}

ScoreSet read_scores(const fs::path& path) {
  std::vector<Trial> trials;
  std::vector<double> scores;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    auto cols = split(line, '\t');
    if (cols.size() < 3 || cols[0].empty() || cols[1].empty()) {
      line_error(path, lineno, "expected 'enroll_id<TAB>test_id<TAB>score'");
    }
    auto v = parse_real(cols[2]);
    if (!v || !std::isfinite(*v)) {
      line_error(path, lineno, "bad score '" + std::string(cols[2]) + "'");
    }
    trials.push_back({std::string(cols[0]), std::string(cols[1])});
    scores.push_back(*v);
  });
  return ScoreSet(std::move(trials), std::move(scores));
}

void write_scores(const ScoreSet& scores, const fs::path& path) {
  auto os = open_out(path, false);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    os << scores.trial(i).enroll_id << '\t' << scores.trial(i).test_id << '\t'
       << format_real(scores.score(i)) << '\n';
  }
  finish(os, path);
}

EnrollmentMap read_enrollment(const fs::path& path) {
  std::vector<EnrollmentModel> models;
  for_each_line(path, [&](std::string_view line, std::size_t lineno) {
    auto cols = split(line, '\t');
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      line_error(path, lineno, "expected 'model_id<TAB>utt1,utt2,...'");
    }
    EnrollmentModel m{std::string(cols[0]), {}};
    for (auto u : split(cols[1], ',')) {
      if (u.empty()) line_error(path, lineno, "empty utterance id");
      m.utt_ids.emplace_back(u);
    }
    models.push_back(std::move(m));
  });
  return EnrollmentMap(std::move(models));
}

void write_enrollment(const EnrollmentMap& map, const fs::path& path) {
  auto os = open_out(path, false);
  for (const auto& m : map.models()) {
    os << m.model_id << '\t';
    for (std::size_t i = 0; i < m.utt_ids.size(); ++i) {
      if (i) os << ',';
      os << m.utt_ids[i];
    }
    os << '\n';
  }
  finish(os, path);
}

}  // namespace spkback
