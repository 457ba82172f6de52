#pragma once

// JSON persistence for sketch state.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvsketch/error.hpp"
#include "cvsketch/hashing.hpp"
#include "cvsketch/point_query.hpp"
#include "cvsketch/tug_of_war.hpp"

namespace cvsketch {

/// {seed, degree, universe, counter}
inline nlohmann::json sketch_to_json(const TugOfWarSketch<PolySignHash>& s) {
  return {{"seed", s.hash()->seed()},
          {"degree", s.hash()->degree()},
          {"universe", s.universe()},
          {"counter", s.counter()}};
}

inline TugOfWarSketch<PolySignHash> tug_of_war_from_json(const nlohmann::json& j) {
  try {
    auto hash = std::make_shared<const PolySignHash>(PolySignHash::create(
        j.at("universe").get<std::uint64_t>(), j.at("seed").get<std::uint64_t>(),
        j.at("degree").get<std::size_t>()));
    return TugOfWarSketch<PolySignHash>(std::move(hash), j.at("counter").get<std::int64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedLine, std::string("sketch JSON: ") + e.what());
  }
}

namespace detail {

template <typename Sketch>
nlohmann::json table_to_json(const Sketch& s, const char* kind) {
  nlohmann::json seeds = nlohmann::json::array();
  nlohmann::json counters = nlohmann::json::array();
  for (std::size_t r = 0; r < s.rows(); ++r) {
    seeds.push_back(s.row_hash(r).seed());
    nlohmann::json row = nlohmann::json::array();
    for (std::uint64_t b = 0; b < s.buckets(); ++b) row.push_back(s.counter(r, b));
    counters.push_back(std::move(row));
  }
  return {{"params", {{"kind", kind}, {"rows", s.rows()}, {"buckets", s.buckets()}, {"universe", s.universe()}}},
          {"seeds", std::move(seeds)},
          {"counters", std::move(counters)}};
}

struct TableState {
  std::uint64_t buckets = 0;
  std::uint64_t universe = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::int64_t> counters;
};

inline TableState table_from_json(const nlohmann::json& j, const char* kind) {
  try {
    const auto& p = j.at("params");
    if (p.at("kind").get<std::string>() != kind) {
      throw Error(ErrorKind::MalformedLine, std::string("sketch JSON is not of kind ") + kind);
    }
    TableState t;
    t.buckets = p.at("buckets").get<std::uint64_t>();
    t.universe = p.at("universe").get<std::uint64_t>();
    t.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const auto rows = p.at("rows").get<std::size_t>();
    const auto& c = j.at("counters");
    if (t.seeds.size() != rows || c.size() != rows) {
      throw Error(ErrorKind::MalformedLine, "sketch JSON row count mismatch");
    }
    for (const auto& row : c) {
      const auto values = row.get<std::vector<std::int64_t>>();
      if (values.size() != t.buckets) throw Error(ErrorKind::MalformedLine, "sketch JSON bucket count mismatch");
      t.counters.insert(t.counters.end(), values.begin(), values.end());
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedLine, std::string("sketch JSON: ") + e.what());
  }
}

}  // namespace detail

/// {params, seeds, counters}; seeds are the per-row bucket-hash seeds.
inline nlohmann::json sketch_to_json(const CountMinSketch<PolyHashFamily>& s) {
  return detail::table_to_json(s, "count-min");
}

inline nlohmann::json sketch_to_json(const CountSketch<PolyHashFamily, PolySignHash>& s) {
  return detail::table_to_json(s, "count-sketch");
}

inline CountMinSketch<PolyHashFamily> count_min_from_json(const nlohmann::json& j) {
  const auto t = detail::table_from_json(j, "count-min");
  std::vector<std::shared_ptr<const PolyHashFamily>> rows;
  for (const auto seed : t.seeds) {
    rows.push_back(std::make_shared<const PolyHashFamily>(PolyHashFamily::create(2, t.buckets, t.universe, seed)));
  }
  CountMinSketch<PolyHashFamily> s(std::move(rows));
  s.set_counters(t.counters);
  return s;
}

inline CountSketch<PolyHashFamily, PolySignHash> count_sketch_from_json(const nlohmann::json& j) {
  const auto t = detail::table_from_json(j, "count-sketch");
  std::vector<std::shared_ptr<const PolyHashFamily>> rows;
  std::vector<std::shared_ptr<const PolySignHash>> signs;
  for (const auto seed : t.seeds) {
    rows.push_back(std::make_shared<const PolyHashFamily>(PolyHashFamily::create(2, t.buckets, t.universe, seed)));
    signs.push_back(std::make_shared<const PolySignHash>(PolySignHash::create(t.universe, mix_seed(seed, 1), 2)));
  }
  CountSketch<PolyHashFamily, PolySignHash> s(std::move(rows), std::move(signs));
  s.set_counters(t.counters);
  return s;
}

}  // namespace cvsketch
