#pragma once

// Stream sources: seeded synthetic vectors, UCI bag-of-words docword files
// and FIMI transaction files.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cvsketch/error.hpp"
#include "cvsketch/frequency_vector.hpp"
#include "cvsketch/random.hpp"

namespace cvsketch {

enum class Split { Whole, FirstHalf, SecondHalf };

constexpr const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::Whole: return "whole";
    case Split::FirstHalf: return "first-half";
    case Split::SecondHalf: return "second-half";
  }
  return "whole";
}

struct SyntheticSource {
  std::uint64_t distinct = 1000;
  std::int64_t freq_lo = 1;
  std::int64_t freq_hi = 5000;
  std::uint64_t seed = 0;
  std::uint64_t offset = 0;  // first item id
};

struct BagOfWordsSource {
  std::string path;
  Split split = Split::Whole;
};

struct FimiSource {
  std::string path;
  Split split = Split::Whole;
};

/// A vector already materialized as an `item,count` CSV.
struct VectorCsvSource {
  std::string path;
};

struct StreamSpec {
  std::variant<SyntheticSource, BagOfWordsSource, FimiSource, VectorCsvSource> source;
  std::optional<std::uint64_t> declared_universe;
};

/// Items [offset, offset + distinct) get counts uniform on [freq_lo, freq_hi];
/// the universe is max(universe, offset + distinct).
inline FrequencyVector generate_synthetic(std::uint64_t distinct, std::int64_t freq_lo,
                                          std::int64_t freq_hi, std::uint64_t seed,
                                          std::uint64_t offset = 0, std::uint64_t universe = 0) {
  if (distinct < 1 || freq_lo < 1 || freq_lo > freq_hi) {
    throw Error(ErrorKind::InvalidArgument,
                "synthetic stream needs distinct >= 1 and 1 <= freq_lo <= freq_hi");
  }
  std::vector<std::int64_t> counts(std::max(universe, offset + distinct), 0);
  Rng rng(seed);
  for (std::uint64_t i = 0; i < distinct; ++i) counts[offset + i] = uniform_int(rng, freq_lo, freq_hi);
  return FrequencyVector(std::move(counts));
}

inline FrequencyVector generate_synthetic(const SyntheticSource& s, std::uint64_t universe = 0) {
  return generate_synthetic(s.distinct, s.freq_lo, s.freq_hi, s.seed, s.offset, universe);
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return in;
}

/// Next whitespace-delimited token starting at or after `pos`; empty at end.
inline std::string_view next_token(std::string_view line, std::size_t& pos) {
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
  const std::size_t start = pos;
  while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t' && line[pos] != '\r') ++pos;
  return line.substr(start, pos - start);
}

inline bool parse_u64(std::string_view token, std::uint64_t& out) {
  if (token.empty()) return false;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

inline bool parse_i64(std::string_view token, std::int64_t& out) {
  if (token.empty()) return false;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc() && res.ptr == token.data() + token.size();
}

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

/// UCI docword format: header lines D, W, NNZ, then `docID wordID count`
/// with 1-based ids. FirstHalf keeps documents 1..ceil(D/2).
inline FrequencyVector load_bag_of_words(std::istream& in, Split split,
                                         const std::string& name = "<stream>") {
  std::uint64_t header[3];
  std::string line;
  std::uint64_t line_no = 0;
  for (auto& h : header) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw Error(ErrorKind::MalformedHeader, name + ": missing header line " + std::to_string(line_no));
    }
    std::size_t pos = 0;
    const auto tok = detail::next_token(line, pos);
    if (!detail::parse_u64(tok, h) || !detail::next_token(line, pos).empty()) {
      throw Error(ErrorKind::MalformedHeader,
                  name + ": header line " + std::to_string(line_no) + " is not a single integer");
    }
  }
  const std::uint64_t docs = header[0];
  const std::uint64_t words = header[1];
  const std::uint64_t nnz = header[2];
  const std::uint64_t first_half_docs = (docs + 1) / 2;

  FrequencyVector v(words);
  std::uint64_t entries = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    std::size_t pos = 0;
    std::uint64_t doc = 0;
    std::uint64_t word = 0;
    std::int64_t count = 0;
    const bool ok = detail::parse_u64(detail::next_token(line, pos), doc) &&
                    detail::parse_u64(detail::next_token(line, pos), word) &&
                    detail::parse_i64(detail::next_token(line, pos), count) &&
                    detail::next_token(line, pos).empty() && count >= 0;
    if (!ok) {
      throw Error(ErrorKind::MalformedLine,
                  name + ": line " + std::to_string(line_no) + ": expected 'docID wordID count'");
    }
    if (doc < 1 || doc > docs || word < 1 || word > words) {
      throw Error(ErrorKind::IdOutOfRange, name + ": line " + std::to_string(line_no) +
                                               ": id outside D=" + std::to_string(docs) +
                                               ", W=" + std::to_string(words));
    }
    ++entries;
    const bool first = doc <= first_half_docs;
    if (split == Split::Whole || (split == Split::FirstHalf) == first) v.add(word - 1, count);
  }
  if (entries != nnz) {
    throw Error(ErrorKind::MalformedHeader, name + ": header declares NNZ=" + std::to_string(nnz) +
                                                " but the file has " + std::to_string(entries) +
                                                " entries");
  }
  return v;
}

inline FrequencyVector load_bag_of_words(const std::string& path, Split split) {
  auto in = detail::open_input(path);
  return load_bag_of_words(in, split, path);
}

namespace detail {

/// Parses one FIMI transaction into `out` (appending ids); throws with the
/// 1-based column of the offending token.
inline void parse_transaction(std::string_view line, std::uint64_t line_no, const std::string& name,
                              std::vector<std::uint64_t>& out) {
  std::size_t pos = 0;
  for (;;) {
    const auto tok = next_token(line, pos);
    if (tok.empty()) return;
    std::uint64_t id = 0;
    if (!parse_u64(tok, id)) {
      const std::size_t column = pos - tok.size() + 1;
      throw Error(ErrorKind::MalformedToken, name + ": line " + std::to_string(line_no) + ", column " +
                                                 std::to_string(column) + ": '" + std::string(tok) +
                                                 "' is not a non-negative integer id");
    }
    out.push_back(id);
  }
}

inline void add_ids(std::vector<std::int64_t>& counts, std::span<const std::uint64_t> ids) {
  for (const auto id : ids) {
    if (id >= counts.size()) counts.resize(id + 1, 0);
    ++counts[id];
  }
}

}  // namespace detail

/// One transaction per line, whitespace-separated non-negative ids. Halves
/// split by line index with the first half taking ceil(lines/2) lines; the
/// universe is max id + 1 over the whole file in every split.
inline FrequencyVector load_fimi(const std::string& path, Split split) {
  std::uint64_t lines = 0;
  if (split != Split::Whole) {
    auto in = detail::open_input(path);
    std::string line;
    while (std::getline(in, line)) ++lines;
  }
  const std::uint64_t first_half = (lines + 1) / 2;

  auto in = detail::open_input(path);
  std::vector<std::int64_t> counts;
  std::uint64_t universe = 0;
  std::vector<std::uint64_t> ids;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    ids.clear();
    detail::parse_transaction(line, line_no, path, ids);
    for (const auto id : ids) universe = std::max(universe, id + 1);
    const bool first = line_no <= first_half;
    if (split == Split::Whole || (split == Split::FirstHalf) == first) detail::add_ids(counts, ids);
  }
  counts.resize(universe, 0);
  return FrequencyVector(std::move(counts));
}

enum class UpdateOrder { ById, Shuffled };

/// One update per nonzero item, delta = count.
inline std::vector<StreamUpdate> as_updates(const FrequencyVector& v, UpdateOrder order = UpdateOrder::ById,
                                            std::uint64_t seed = 0) {
  std::vector<StreamUpdate> out;
  const auto counts = v.counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] != 0) out.push_back({i, counts[i]});
  }
  if (order == UpdateOrder::Shuffled) {
    Rng rng(seed);
    shuffle(std::span<StreamUpdate>(out), rng);
  }
  return out;
}

inline constexpr const char* kVectorCsvHeader = "item,count";

/// Dense: one row per item in the universe, zeros included.
inline void write_vector_csv(std::ostream& out, const FrequencyVector& v) {
  out << kVectorCsvHeader << '\n';
  const auto counts = v.counts();
  for (std::size_t i = 0; i < counts.size(); ++i) out << i << ',' << counts[i] << '\n';
}

inline FrequencyVector read_vector_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || std::string_view(line).substr(0, line.find('\r')) != kVectorCsvHeader) {
    throw Error(ErrorKind::MalformedHeader, name + ": expected header '" + kVectorCsvHeader + "'");
  }
  std::vector<std::int64_t> counts;
  std::vector<bool> seen;
  std::uint64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    std::string_view row(line);
    if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
    const auto comma = row.find(',');
    std::uint64_t item = 0;
    std::int64_t count = 0;
    if (comma == std::string_view::npos || !detail::parse_u64(row.substr(0, comma), item) ||
        !detail::parse_i64(row.substr(comma + 1), count) || count < 0) {
      throw Error(ErrorKind::MalformedLine, name + ": line " + std::to_string(line_no));
    }
    if (item >= counts.size()) {
      counts.resize(item + 1, 0);
      seen.resize(item + 1, false);
    }
    if (seen[item]) {
      throw Error(ErrorKind::MalformedLine,
                  name + ": line " + std::to_string(line_no) + ": duplicate item " + std::to_string(item));
    }
    seen[item] = true;
    counts[item] = count;
  }
  return FrequencyVector(std::move(counts));
}

inline FrequencyVector read_vector_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return read_vector_csv(in, path);
}

/// Loads the source and applies the declared universe, which may only grow it.
inline FrequencyVector materialize(const StreamSpec& spec) {
  FrequencyVector v = std::visit(
      [&](const auto& s) -> FrequencyVector {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SyntheticSource>) {
          return generate_synthetic(s);
        } else if constexpr (std::is_same_v<T, BagOfWordsSource>) {
          return load_bag_of_words(s.path, s.split);
        } else if constexpr (std::is_same_v<T, FimiSource>) {
          return load_fimi(s.path, s.split);
        } else {
          return read_vector_csv(s.path);
        }
      },
      spec.source);
  if (spec.declared_universe) {
    if (*spec.declared_universe < v.universe()) {
      throw Error(ErrorKind::IdOutOfRange, "stream has items beyond the declared universe " +
                                               std::to_string(*spec.declared_universe));
    }
    v.resize(*spec.declared_universe);
  }
  return v;
}

}  // namespace cvsketch
