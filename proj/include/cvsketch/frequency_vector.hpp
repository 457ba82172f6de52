#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvsketch/error.hpp"

namespace cvsketch {

struct StreamUpdate {
  std::uint64_t item = 0;
  std::int64_t delta = 0;

  friend bool operator==(const StreamUpdate&, const StreamUpdate&) = default;
};

/// Dense non-negative per-item counts over the universe [0, n).
class FrequencyVector {
 public:
  FrequencyVector() = default;
  explicit FrequencyVector(std::size_t universe) : counts_(universe, 0) {}
  explicit FrequencyVector(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i] < 0) {
        throw Error(ErrorKind::InvalidArgument,
                    "negative count at item " + std::to_string(i));
      }
    }
  }
  FrequencyVector(std::initializer_list<std::int64_t> counts)
      : FrequencyVector(std::vector<std::int64_t>(counts)) {}

  std::size_t universe() const noexcept { return counts_.size(); }
  std::span<const std::int64_t> counts() const noexcept { return counts_; }
  std::int64_t operator[](std::size_t i) const noexcept { return counts_[i]; }

  void add(std::uint64_t item, std::int64_t count) {
    if (item >= counts_.size()) {
      throw Error(ErrorKind::ItemOutOfRange, "item " + std::to_string(item) +
                                                 " outside universe " +
                                                 std::to_string(counts_.size()));
    }
    if (counts_[item] + count < 0) {
      throw Error(ErrorKind::InvalidArgument, "count would become negative");
    }
    counts_[item] += count;
  }

  /// Grows the universe; existing counts are kept.
  void resize(std::size_t universe) {
    if (universe < counts_.size()) {
      throw Error(ErrorKind::InvalidArgument, "cannot shrink a frequency vector");
    }
    counts_.resize(universe, 0);
  }

  friend bool operator==(const FrequencyVector&, const FrequencyVector&) = default;

 private:
  std::vector<std::int64_t> counts_;
};

}  // namespace cvsketch
