#pragma once

// Repeated-trial experiment driver: configuration, parallel trials, summary
// statistics and CSV/JSON reports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "cvsketch/aggregation.hpp"
#include "cvsketch/control_variates.hpp"
#include "cvsketch/datasets.hpp"
#include "cvsketch/error.hpp"
#include "cvsketch/format.hpp"
#include "cvsketch/hashing.hpp"
#include "cvsketch/moments.hpp"
#include "cvsketch/point_query.hpp"
#include "cvsketch/random.hpp"
#include "cvsketch/theory.hpp"
#include "cvsketch/tug_of_war.hpp"

namespace cvsketch {

using json = nlohmann::json;

enum class Task { F2, IP, CmsQuery, CsQuery };
enum class ProxyKind { RawEstimate, GroundTruth };

constexpr const char* to_string(Task t) noexcept {
  switch (t) {
    case Task::F2: return "f2";
    case Task::IP: return "ip";
    case Task::CmsQuery: return "cms-query";
    case Task::CsQuery: return "cs-query";
  }
  return "f2";
}

constexpr const char* to_string(ProxyKind p) noexcept {
  return p == ProxyKind::GroundTruth ? "ground_truth" : "raw_estimate";
}

struct MomConfig {
  std::size_t groups = kExperimentPlan.groups;
  std::size_t per_group = kExperimentPlan.per_group;
  std::uint64_t shuffle_seed = 0;
};

struct ExperimentConfig {
  Task task = Task::F2;
  StreamSpec stream{SyntheticSource{}, std::nullopt};
  std::optional<StreamSpec> stream_g;  // second stream for the IP task
  std::size_t trials = 1000;
  std::uint64_t master_seed = 0;
  ProxyKind proxy_policy = ProxyKind::RawEstimate;
  IpMomentMode ip_mode = IpMomentMode::Gaussian;
  std::optional<MomConfig> mom;  // default 20 x 50 when trials == 1000
  std::string output;            // CSV path; summary goes next to it
  bool exhaustive = false;       // enumerate all 2^n sign vectors instead of hashing
  std::optional<std::uint64_t> cv_universe;
  // point-query tasks
  std::uint64_t query_item = 0;
  std::optional<std::size_t> rows;
  std::optional<std::uint64_t> buckets;
  std::optional<double> epsilon;
  std::optional<double> delta;
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& msg) {
  throw Error(ErrorKind::ConfigInvalid, msg);
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end()) {
      config_error(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(where + ": key '" + key + "' has the wrong type");
  }
}

inline std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    config_error(where + ": key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline Split parse_split(const std::string& s, const std::string& where) {
  if (s == "whole") return Split::Whole;
  if (s == "first-half") return Split::FirstHalf;
  if (s == "second-half") return Split::SecondHalf;
  config_error(where + ": split must be whole, first-half or second-half");
}

inline std::string resolve_path(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? path : (base / p).string();
}

}  // namespace detail

inline StreamSpec parse_stream(const json& j, const std::filesystem::path& base_dir = {},
                               const std::string& where = "stream") {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    detail::config_error(where + " needs a string 'type'");
  }
  const auto type = j.at("type").get<std::string>();
  StreamSpec spec;
  if (j.contains("universe")) spec.declared_universe = detail::get_u64(j, "universe", 0, where);
  if (type == "synthetic") {
    detail::check_keys(j, {"type", "distinct", "freq_lo", "freq_hi", "seed", "offset", "universe"}, where);
    SyntheticSource s;
    s.distinct = detail::get_u64(j, "distinct", s.distinct, where);
    s.freq_lo = detail::get_or<std::int64_t>(j, "freq_lo", s.freq_lo, where);
    s.freq_hi = detail::get_or<std::int64_t>(j, "freq_hi", s.freq_hi, where);
    s.seed = detail::get_u64(j, "seed", s.seed, where);
    s.offset = detail::get_u64(j, "offset", s.offset, where);
    if (s.distinct < 1 || s.freq_lo < 1 || s.freq_lo > s.freq_hi) {
      detail::config_error(where + ": synthetic needs distinct >= 1 and 1 <= freq_lo <= freq_hi");
    }
    spec.source = s;
  } else if (type == "bag-of-words" || type == "fimi") {
    detail::check_keys(j, {"type", "path", "split", "universe"}, where);
    const auto path = detail::get_or<std::string>(j, "path", "", where);
    if (path.empty()) detail::config_error(where + ": '" + type + "' needs a path");
    const auto split = detail::parse_split(detail::get_or<std::string>(j, "split", "whole", where), where);
    if (type == "fimi") {
      spec.source = FimiSource{detail::resolve_path(path, base_dir), split};
    } else {
      spec.source = BagOfWordsSource{detail::resolve_path(path, base_dir), split};
    }
  } else if (type == "vector-csv") {
    detail::check_keys(j, {"type", "path", "universe"}, where);
    const auto path = detail::get_or<std::string>(j, "path", "", where);
    if (path.empty()) detail::config_error(where + ": 'vector-csv' needs a path");
    spec.source = VectorCsvSource{detail::resolve_path(path, base_dir)};
  } else {
    detail::config_error(where + ": unknown type '" + type + "'");
  }
  return spec;
}

inline json stream_to_json(const StreamSpec& spec) {
  json j = std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SyntheticSource>) {
          return {{"type", "synthetic"}, {"distinct", s.distinct}, {"freq_lo", s.freq_lo},
                  {"freq_hi", s.freq_hi}, {"seed", s.seed},        {"offset", s.offset}};
        } else if constexpr (std::is_same_v<T, BagOfWordsSource>) {
          return {{"type", "bag-of-words"}, {"path", s.path}, {"split", to_string(s.split)}};
        } else if constexpr (std::is_same_v<T, FimiSource>) {
          return {{"type", "fimi"}, {"path", s.path}, {"split", to_string(s.split)}};
        } else {
          return {{"type", "vector-csv"}, {"path", s.path}};
        }
      },
      spec.source);
  if (spec.declared_universe) j["universe"] = *spec.declared_universe;
  return j;
}

/// Relative dataset paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  const std::string where = "config";
  detail::check_keys(j, {"task", "stream", "stream_g", "trials", "master_seed", "proxy_policy", "ip_mode",
                         "mom", "output", "exhaustive", "cv_universe", "query_item", "rows", "buckets",
                         "epsilon", "delta"},
                     where);
  ExperimentConfig cfg;
  const auto task = detail::get_or<std::string>(j, "task", "f2", where);
  if (task == "f2") {
    cfg.task = Task::F2;
  } else if (task == "ip") {
    cfg.task = Task::IP;
  } else if (task == "cms-query") {
    cfg.task = Task::CmsQuery;
  } else if (task == "cs-query") {
    cfg.task = Task::CsQuery;
  } else {
    detail::config_error("unknown task '" + task + "'");
  }
  if (!j.contains("stream")) detail::config_error("config needs a 'stream'");
  cfg.stream = parse_stream(j.at("stream"), base_dir, "stream");
  if (j.contains("stream_g")) cfg.stream_g = parse_stream(j.at("stream_g"), base_dir, "stream_g");
  if (cfg.task == Task::IP && !cfg.stream_g) detail::config_error("the ip task needs 'stream_g'");
  cfg.trials = detail::get_u64(j, "trials", cfg.trials, where);
  if (cfg.trials < 1) detail::config_error("trials must be >= 1");
  cfg.master_seed = detail::get_u64(j, "master_seed", cfg.master_seed, where);

  const auto proxy = detail::get_or<std::string>(j, "proxy_policy", "raw_estimate", where);
  if (proxy == "raw_estimate") {
    cfg.proxy_policy = ProxyKind::RawEstimate;
  } else if (proxy == "ground_truth") {
    cfg.proxy_policy = ProxyKind::GroundTruth;
  } else {
    detail::config_error("proxy_policy must be raw_estimate or ground_truth");
  }
  const auto mode = detail::get_or<std::string>(j, "ip_mode", "gaussian", where);
  if (mode == "gaussian") {
    cfg.ip_mode = IpMomentMode::Gaussian;
  } else if (mode == "exact") {
    cfg.ip_mode = IpMomentMode::Exact;
  } else {
    detail::config_error("ip_mode must be gaussian or exact");
  }

  if (j.contains("mom") && !j.at("mom").is_null()) {
    const auto& m = j.at("mom");
    detail::check_keys(m, {"groups", "per_group", "shuffle_seed"}, "mom");
    MomConfig mom;
    mom.groups = detail::get_u64(m, "groups", mom.groups, "mom");
    mom.per_group = detail::get_u64(m, "per_group", mom.per_group, "mom");
    mom.shuffle_seed = detail::get_u64(m, "shuffle_seed", cfg.master_seed, "mom");
    if (mom.groups < 1 || mom.per_group < 1) detail::config_error("mom groups and per_group must be >= 1");
    cfg.mom = mom;
  }
  cfg.output = detail::get_or<std::string>(j, "output", "", where);
  cfg.exhaustive = detail::get_or<bool>(j, "exhaustive", false, where);
  if (j.contains("cv_universe")) cfg.cv_universe = detail::get_u64(j, "cv_universe", 0, where);
  cfg.query_item = detail::get_u64(j, "query_item", 0, where);
  if (j.contains("rows")) cfg.rows = detail::get_u64(j, "rows", 1, where);
  if (j.contains("buckets")) cfg.buckets = detail::get_u64(j, "buckets", 2, where);
  if (j.contains("epsilon")) cfg.epsilon = detail::get_or<double>(j, "epsilon", 0.0, where);
  if (j.contains("delta")) cfg.delta = detail::get_or<double>(j, "delta", 0.0, where);

  if (cfg.exhaustive && (cfg.task == Task::CmsQuery || cfg.task == Task::CsQuery)) {
    detail::config_error("exhaustive mode applies to the f2 and ip tasks only");
  }
  if (cfg.epsilon.has_value() != cfg.delta.has_value()) {
    detail::config_error("epsilon and delta must be given together");
  }
  if (cfg.epsilon && (cfg.rows || cfg.buckets)) {
    detail::config_error("give either epsilon/delta or rows/buckets, not both");
  }
  if (cfg.rows && *cfg.rows < 1) detail::config_error("rows must be >= 1");
  if (cfg.buckets && *cfg.buckets < 2) detail::config_error("buckets must be >= 2");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j{{"task", to_string(cfg.task)},
         {"stream", stream_to_json(cfg.stream)},
         {"trials", cfg.trials},
         {"master_seed", cfg.master_seed},
         {"proxy_policy", to_string(cfg.proxy_policy)},
         {"ip_mode", to_string(cfg.ip_mode)},
         {"exhaustive", cfg.exhaustive}};
  if (cfg.stream_g) j["stream_g"] = stream_to_json(*cfg.stream_g);
  if (cfg.mom) {
    j["mom"] = {{"groups", cfg.mom->groups}, {"per_group", cfg.mom->per_group},
                {"shuffle_seed", cfg.mom->shuffle_seed}};
  }
  if (!cfg.output.empty()) j["output"] = cfg.output;
  if (cfg.cv_universe) j["cv_universe"] = *cfg.cv_universe;
  if (cfg.task == Task::CmsQuery || cfg.task == Task::CsQuery) {
    j["query_item"] = cfg.query_item;
    if (cfg.rows) j["rows"] = *cfg.rows;
    if (cfg.buckets) j["buckets"] = *cfg.buckets;
    if (cfg.epsilon) j["epsilon"] = *cfg.epsilon;
    if (cfg.delta) j["delta"] = *cfg.delta;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Reports

struct TrialRow {
  std::uint64_t trial = 0;
  double raw = 0.0;
  double corrected = 0.0;
  double c_hat = 0.0;
  double z = 0.0;
};

struct EstimatorSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double variance = 0.0;  // 1/(T-1); 0 for a single trial
  double mae = 0.0;
  std::optional<double> mom;
};

struct ReportSummary {
  Task task = Task::F2;
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  ProxyKind proxy_policy = ProxyKind::RawEstimate;
  IpMomentMode ip_mode = IpMomentMode::Gaussian;
  double ground_truth = 0.0;
  EstimatorSummary raw;
  EstimatorSummary corrected;
  std::optional<MomConfig> mom;
  std::optional<VarianceReport> theory;  // prediction with the exact coefficient
};

struct ExperimentReport {
  std::vector<TrialRow> rows;
  ReportSummary summary;
};

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty set");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline EstimatorSummary summarize(std::span<const double> values, double truth,
                                  const std::optional<MomConfig>& mom = std::nullopt) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "cannot summarize zero trials");
  EstimatorSummary s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q3 = quantile_sorted(sorted, 0.75);
  double sum = 0.0;
  double abs_err = 0.0;
  for (const double v : values) {
    sum += v;
    abs_err += std::abs(v - truth);
  }
  const auto t = static_cast<double>(values.size());
  s.mean = sum / t;
  s.mae = abs_err / t;
  double ss = 0.0;
  for (const double v : values) ss += (v - s.mean) * (v - s.mean);
  s.variance = values.size() > 1 ? ss / (t - 1.0) : 0.0;
  if (mom) {
    s.mom = shuffled_median_of_means(values, MoMPlan{mom->groups, mom->per_group, 0.0, 0.0},
                                     mom->shuffle_seed);
  }
  return s;
}

inline constexpr const char* kReportCsvHeader = "trial,raw,corrected,c_hat,z";

inline void write_report_csv(std::ostream& out, std::span<const TrialRow> rows) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.trial << ',' << format_double(r.raw) << ',' << format_double(r.corrected) << ','
        << format_double(r.c_hat) << ',' << format_double(r.z) << '\n';
  }
}

inline std::vector<TrialRow> read_report_csv(std::istream& in, const std::string& name = "<report>") {
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) {
    throw Error(ErrorKind::MalformedHeader, name + ": expected header '" + kReportCsvHeader + "'");
  }
  std::vector<TrialRow> rows;
  std::uint64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string_view rest(line);
    std::string_view fields[5];
    std::size_t nf = 0;
    for (; nf < 5; ++nf) {
      const auto comma = rest.find(',');
      fields[nf] = rest.substr(0, comma);
      if (comma == std::string_view::npos) {
        ++nf;
        rest = {};
        break;
      }
      rest.remove_prefix(comma + 1);
    }
    TrialRow r;
    const bool ok = nf == 5 && rest.empty() && detail::parse_u64(fields[0], r.trial) &&
                    parse_double(fields[1], r.raw) && parse_double(fields[2], r.corrected) &&
                    parse_double(fields[3], r.c_hat) && parse_double(fields[4], r.z);
    if (!ok) throw Error(ErrorKind::MalformedLine, name + ": line " + std::to_string(line_no));
    rows.push_back(r);
  }
  return rows;
}

inline json estimator_to_json(const EstimatorSummary& s) {
  json j{{"min", s.min},   {"q1", s.q1},     {"median", s.median},     {"q3", s.q3},
         {"max", s.max},   {"mean", s.mean}, {"variance", s.variance}, {"mae", s.mae}};
  j["mom"] = s.mom ? json(*s.mom) : json(nullptr);
  return j;
}

inline json summary_to_json(const ReportSummary& s) {
  json j{{"task", to_string(s.task)},
         {"trials", s.trials},
         {"master_seed", s.master_seed},
         {"proxy_policy", to_string(s.proxy_policy)},
         {"ip_mode", to_string(s.ip_mode)},
         {"ground_truth", s.ground_truth},
         {"raw", estimator_to_json(s.raw)},
         {"corrected", estimator_to_json(s.corrected)}};
  j["mom"] = s.mom ? json{{"groups", s.mom->groups},
                          {"per_group", s.mom->per_group},
                          {"shuffle_seed", s.mom->shuffle_seed}}
                   : json(nullptr);
  if (s.theory) {
    j["theory"] = {{"ams_var", s.theory->ams_var},
                   {"cv_reduction", s.theory->cv_reduction},
                   {"cv_var", s.theory->cv_var},
                   {"ratio", s.theory->ratio}};
  } else {
    j["theory"] = nullptr;
  }
  return j;
}

namespace detail {

inline EstimatorSummary estimator_from_json(const json& j) {
  EstimatorSummary s;
  s.min = j.at("min").get<double>();
  s.q1 = j.at("q1").get<double>();
  s.median = j.at("median").get<double>();
  s.q3 = j.at("q3").get<double>();
  s.max = j.at("max").get<double>();
  s.mean = j.at("mean").get<double>();
  s.variance = j.at("variance").get<double>();
  s.mae = j.at("mae").get<double>();
  if (!j.at("mom").is_null()) s.mom = j.at("mom").get<double>();
  return s;
}

}  // namespace detail

inline ReportSummary summary_from_json(const json& j) {
  try {
    ReportSummary s;
    const auto task = j.at("task").get<std::string>();
    s.task = task == "ip" ? Task::IP
             : task == "cms-query" ? Task::CmsQuery
             : task == "cs-query"  ? Task::CsQuery
                                   : Task::F2;
    s.trials = j.at("trials").get<std::size_t>();
    s.master_seed = j.at("master_seed").get<std::uint64_t>();
    s.proxy_policy =
        j.at("proxy_policy").get<std::string>() == "ground_truth" ? ProxyKind::GroundTruth : ProxyKind::RawEstimate;
    s.ip_mode = j.at("ip_mode").get<std::string>() == "exact" ? IpMomentMode::Exact : IpMomentMode::Gaussian;
    s.ground_truth = j.at("ground_truth").get<double>();
    s.raw = detail::estimator_from_json(j.at("raw"));
    s.corrected = detail::estimator_from_json(j.at("corrected"));
    if (!j.at("mom").is_null()) {
      const auto& m = j.at("mom");
      s.mom = MomConfig{m.at("groups").get<std::size_t>(), m.at("per_group").get<std::size_t>(),
                        m.at("shuffle_seed").get<std::uint64_t>()};
    }
    if (j.contains("theory") && !j.at("theory").is_null()) {
      const auto& t = j.at("theory");
      VarianceReport r;
      r.ams_var = t.at("ams_var").get<double>();
      r.cv_reduction = t.at("cv_reduction").get<double>();
      r.cv_var = t.at("cv_var").get<double>();
      r.ratio = t.at("ratio").get<double>();
      r.negative_cv_var = r.cv_var < 0.0;
      s.theory = r;
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InconsistentReport, std::string("summary JSON: ") + e.what());
  }
}

/// Summary path paired with a report CSV: `x.csv` -> `x.summary.json`.
inline std::string summary_path_for(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  if (p.extension() == ".csv") p.replace_extension();
  return p.string() + ".summary.json";
}

inline void write_report(const ExperimentReport& report, const std::string& csv_path) {
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + csv_path + "'");
    write_report_csv(out, report.rows);
  }
  const auto summary_path = summary_path_for(csv_path);
  std::ofstream out(summary_path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + summary_path + "'");
  out << summary_to_json(report.summary).dump(2) << '\n';
}

namespace detail {

inline bool close(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool close(const EstimatorSummary& a, const EstimatorSummary& b) {
  return close(a.min, b.min) && close(a.q1, b.q1) && close(a.median, b.median) && close(a.q3, b.q3) &&
         close(a.max, b.max) && close(a.mean, b.mean) && close(a.variance, b.variance) &&
         close(a.mae, b.mae) && a.mom.has_value() == b.mom.has_value() &&
         (!a.mom || close(*a.mom, *b.mom));
}

}  // namespace detail

/// Loads a report and checks that its summary is recomputable from the rows.
inline ExperimentReport load_report(const std::string& csv_path,
                                    std::optional<std::string> summary_path = std::nullopt) {
  ExperimentReport report;
  {
    std::ifstream in(csv_path);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + csv_path + "'");
    report.rows = read_report_csv(in, csv_path);
  }
  const auto sp = summary_path.value_or(summary_path_for(csv_path));
  std::ifstream in(sp);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + sp + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InconsistentReport, sp + ": " + e.what());
  }
  report.summary = summary_from_json(j);

  if (report.rows.size() != report.summary.trials) {
    throw Error(ErrorKind::InconsistentReport, "summary declares " + std::to_string(report.summary.trials) +
                                                   " trials but the CSV has " +
                                                   std::to_string(report.rows.size()));
  }
  std::vector<double> raw, corrected;
  for (const auto& r : report.rows) {
    raw.push_back(r.raw);
    corrected.push_back(r.corrected);
  }
  const auto& s = report.summary;
  if (!detail::close(summarize(raw, s.ground_truth, s.mom), s.raw) ||
      !detail::close(summarize(corrected, s.ground_truth, s.mom), s.corrected)) {
    throw Error(ErrorKind::InconsistentReport, "summary statistics do not match the per-trial rows");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Running

/// Worker count: `requested` if nonzero, else CV_SKETCH_THREADS, else the
/// hardware concurrency.
inline std::size_t resolve_threads(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("CV_SKETCH_THREADS")) {
    std::uint64_t v = 0;
    if (detail::parse_u64(env, v) && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Materialized inputs shared read-only by every trial.
struct PreparedData {
  FrequencyVector f;
  std::optional<FrequencyVector> g;
  double ground_truth = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double g2 = 0.0;
  std::uint64_t universe = 0;
};

inline PreparedData prepare(const ExperimentConfig& cfg) {
  PreparedData d;
  d.f = materialize(cfg.stream);
  if (cfg.task == Task::IP) {
    d.g = materialize(*cfg.stream_g);
    const auto n = std::max(d.f.universe(), d.g->universe());
    d.f.resize(n);
    d.g->resize(n);
  }
  d.universe = d.f.universe();
  if (d.universe < 1) throw Error(ErrorKind::IdOutOfRange, "stream has an empty universe");
  const Moments m = moments(d.f);
  d.f1 = to_double(m.f1);
  d.f2 = to_double(m.f2);
  switch (cfg.task) {
    case Task::F2: d.ground_truth = d.f2; break;
    case Task::IP: {
      const PairMoments p = pair_moments(d.f.counts(), d.g->counts());
      d.g2 = to_double(p.g.f2);
      d.ground_truth = to_double(p.ip);
      break;
    }
    case Task::CmsQuery:
    case Task::CsQuery:
      if (cfg.query_item >= d.universe) {
        throw Error(ErrorKind::ConfigInvalid, "query_item " + std::to_string(cfg.query_item) +
                                                  " outside universe " + std::to_string(d.universe));
      }
      d.ground_truth = static_cast<double>(d.f[cfg.query_item]);
      break;
  }
  if (cfg.cv_universe && *cfg.cv_universe > d.universe) {
    throw Error(ErrorKind::ConfigInvalid, "cv_universe exceeds the stream universe");
  }
  return d;
}

namespace detail {

template <SignSource Hash>
TrialRow tow_trial(const ExperimentConfig& cfg, const PreparedData& d, std::shared_ptr<const Hash> hash,
                   std::uint64_t trial) {
  TugOfWarSketch<Hash> sf(hash);
  sf.update(d.f);
  CvEstimate e;
  if (cfg.task == Task::F2) {
    const ProxyPolicy policy =
        cfg.proxy_policy == ProxyKind::GroundTruth ? ProxyPolicy{UseProvided{d.f2}} : ProxyPolicy{UseRawEstimate{}};
    e = cv_estimate_f2(sf, d.f1, policy, cfg.cv_universe);
  } else {
    TugOfWarSketch<Hash> sg(hash);
    sg.update(*d.g);
    const ProxyPolicy policy = cfg.proxy_policy == ProxyKind::GroundTruth
                                   ? ProxyPolicy{UseProvided{d.ground_truth}}
                                   : ProxyPolicy{UseRawEstimate{}};
    std::optional<VectorPair> vectors;
    if (cfg.ip_mode == IpMomentMode::Exact) vectors = VectorPair{d.f.counts(), d.g->counts()};
    e = cv_estimate_ip(sf, sg, d.f2, d.g2, policy, cfg.ip_mode, vectors);
  }
  return TrialRow{trial, e.raw, e.corrected, e.coefficient, e.cv_value};
}

inline SketchDims point_dims(const ExperimentConfig& cfg) {
  if (cfg.epsilon) {
    return cfg.task == Task::CmsQuery ? SketchDims::count_min(*cfg.epsilon, *cfg.delta)
                                      : SketchDims::count_sketch(*cfg.epsilon, *cfg.delta);
  }
  return SketchDims{cfg.buckets.value_or(2), cfg.rows.value_or(1)};
}

/// c_hat and z come from row 0.
inline TrialRow point_trial(const ExperimentConfig& cfg, const PreparedData& d, std::uint64_t trial,
                            std::uint64_t seed) {
  const SketchDims dims = point_dims(cfg);
  const ProxyPolicy policy = cfg.proxy_policy == ProxyKind::GroundTruth ? ProxyPolicy{UseProvided{d.ground_truth}}
                                                                        : ProxyPolicy{UseRawEstimate{}};
  PointCvResult r;
  if (cfg.task == Task::CmsQuery) {
    auto s = make_count_min(dims, d.universe, seed);
    s.update(d.f);
    r = s.cv_query(cfg.query_item, d.f1, policy, cfg.cv_universe);
  } else {
    auto s = make_count_sketch(dims, d.universe, seed);
    s.update(d.f);
    r = s.cv_query(cfg.query_item, d.f1, policy, cfg.cv_universe);
  }
  return TrialRow{trial, r.raw, r.corrected, r.rows.front().coefficient, r.rows.front().cv_value};
}

}  // namespace detail

struct RunOptions {
  std::size_t threads = 0;  // 0: CV_SKETCH_THREADS or hardware concurrency
};

/// Trial i hashes with seed mix_seed(master_seed, i). In exhaustive mode
/// trial i uses the sign vector whose bit j is the sign of item j, and the
/// trial count becomes 2^n.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const PreparedData& d,
                                       RunOptions opts = {}) {
  std::size_t trials = cfg.trials;
  if (cfg.exhaustive) {
    if (d.universe > 20) {
      throw Error(ErrorKind::ConfigInvalid, "exhaustive mode needs a universe of at most 20 items");
    }
    trials = std::size_t{1} << d.universe;
  }
  std::optional<MomConfig> mom = cfg.mom;
  if (!mom && trials == kExperimentPlan.total()) mom = MomConfig{20, 50, cfg.master_seed};
  if (mom && mom->groups * mom->per_group != trials) {
    throw Error(ErrorKind::ConfigInvalid, "mom groups x per_group = " +
                                              std::to_string(mom->groups * mom->per_group) + " but trials = " +
                                              std::to_string(trials));
  }

  ExperimentReport report;
  report.rows.resize(trials);
  const std::size_t threads = resolve_threads(opts.threads);
  parallel_for(trials, threads, [&](std::size_t i) {
    const std::uint64_t seed = mix_seed(cfg.master_seed, i);
    if (cfg.task == Task::F2 || cfg.task == Task::IP) {
      if (cfg.exhaustive) {
        report.rows[i] = detail::tow_trial(
            cfg, d, std::make_shared<const TableSignHash>(TableSignHash::from_mask(i, d.universe)), i);
      } else {
        report.rows[i] = detail::tow_trial(
            cfg, d, std::make_shared<const PolySignHash>(PolySignHash::create(d.universe, seed)), i);
      }
    } else {
      report.rows[i] = detail::point_trial(cfg, d, i, seed);
    }
  });

  std::vector<double> raw(trials), corrected(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    raw[i] = report.rows[i].raw;
    corrected[i] = report.rows[i].corrected;
  }
  auto& s = report.summary;
  s.task = cfg.task;
  s.trials = trials;
  s.master_seed = cfg.master_seed;
  s.proxy_policy = cfg.proxy_policy;
  s.ip_mode = cfg.ip_mode;
  s.ground_truth = d.ground_truth;
  s.mom = mom;
  s.raw = summarize(raw, d.ground_truth, mom);
  s.corrected = summarize(corrected, d.ground_truth, mom);
  if (cfg.task == Task::F2) {
    s.theory = f2_cv_report(d.f, cfg.cv_universe);
  } else if (cfg.task == Task::IP) {
    s.theory = ip_cv_report(d.f2, d.g2, d.ground_truth, cfg.ip_mode, VectorPair{d.f.counts(), d.g->counts()});
  }
  return report;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, RunOptions opts = {}) {
  return run_experiment(cfg, prepare(cfg), opts);
}

}  // namespace cvsketch
