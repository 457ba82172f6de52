// cvsketch: command-line front end for the sketches, the experiment harness
// and the oracle checks.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 data error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cvsketch/cvsketch.hpp"

namespace {

using namespace cvsketch;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

struct StreamArgs {
  std::string config;
  std::string vector_csv;
  std::string bow;
  std::string fimi;
  std::string split = "whole";
};

void add_stream_flags(CLI::App* cmd, StreamArgs& a, const std::string& suffix = "") {
  cmd->add_option("--vector" + suffix, a.vector_csv, "item,count CSV");
  cmd->add_option("--bow" + suffix, a.bow, "UCI docword file");
  cmd->add_option("--fimi" + suffix, a.fimi, "FIMI transaction file");
  cmd->add_option("--split" + suffix, a.split, "whole | first-half | second-half")
      ->check(CLI::IsMember({"whole", "first-half", "second-half"}));
}

std::optional<StreamSpec> stream_from_flags(const StreamArgs& a) {
  const Split split = a.split == "first-half"    ? Split::FirstHalf
                      : a.split == "second-half" ? Split::SecondHalf
                                                 : Split::Whole;
  int given = !a.vector_csv.empty() + !a.bow.empty() + !a.fimi.empty();
  if (given > 1) throw Error(ErrorKind::ConfigInvalid, "give at most one of --vector, --bow, --fimi");
  if (!a.vector_csv.empty()) return StreamSpec{VectorCsvSource{a.vector_csv}, std::nullopt};
  if (!a.bow.empty()) return StreamSpec{BagOfWordsSource{a.bow, split}, std::nullopt};
  if (!a.fimi.empty()) return StreamSpec{FimiSource{a.fimi, split}, std::nullopt};
  return std::nullopt;
}

ProxyKind parse_proxy(const std::string& s) {
  return s == "ground_truth" ? ProxyKind::GroundTruth : ProxyKind::RawEstimate;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << text;
}

nlohmann::json read_json_file(const std::string& path, ErrorKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(kind, path + ": " + e.what());
  }
}

nlohmann::json estimate_to_json(const CvEstimate& e) {
  return {{"raw", e.raw},
          {"corrected", e.corrected},
          {"c_hat", e.coefficient},
          {"z", e.cv_value},
          {"z_mean", e.cv_mean}};
}

// ---------------------------------------------------------------------------

struct EstimateF2Args {
  StreamArgs stream;
  std::uint64_t seed = 0;
  std::optional<double> f1;
  std::optional<double> f2_proxy;
  std::optional<std::uint64_t> cv_universe;
  std::optional<std::uint64_t> universe;
  std::string sketch_in;
  std::string sketch_out;
};

int run_estimate_f2(const EstimateF2Args& a) {
  std::optional<FrequencyVector> v;
  std::optional<StreamSpec> spec = stream_from_flags(a.stream);
  std::uint64_t seed = a.seed;
  if (!a.stream.config.empty()) {
    const auto cfg = load_config(a.stream.config);
    if (!spec) spec = cfg.stream;
    seed = cfg.master_seed;
  }
  if (spec) {
    v = materialize(*spec);
    if (a.universe) v->resize(std::max<std::uint64_t>(*a.universe, v->universe()));
  }

  std::optional<TugOfWarSketch<PolySignHash>> sketch;
  if (!a.sketch_in.empty()) {
    sketch = tug_of_war_from_json(read_json_file(a.sketch_in, ErrorKind::MalformedLine));
  } else if (v) {
    sketch = make_tug_of_war(v->universe(), seed);
  } else {
    throw Error(ErrorKind::ConfigInvalid, "need a stream or --sketch-in");
  }
  if (v) sketch->update(*v);
  if (!a.sketch_out.empty()) write_text_file(a.sketch_out, sketch_to_json(*sketch).dump(2) + "\n");

  double f1 = 0.0;
  if (a.f1) {
    f1 = *a.f1;
  } else if (v) {
    f1 = to_double(moments(*v).f1);
  } else {
    throw Error(ErrorKind::ConfigInvalid, "--f1 is required without a stream");
  }
  const ProxyPolicy policy = a.f2_proxy ? ProxyPolicy{UseProvided{*a.f2_proxy}} : ProxyPolicy{UseRawEstimate{}};
  const auto e = cv_estimate_f2(*sketch, f1, policy, a.cv_universe);
  auto out = estimate_to_json(e);
  out["counter"] = sketch->counter();
  out["f1"] = f1;
  if (v) out["ground_truth"] = to_double(moments(*v).f2);
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

struct EstimateIpArgs {
  StreamArgs f;
  StreamArgs g;
  std::uint64_t seed = 0;
  std::string proxy = "raw_estimate";
  std::string mode = "gaussian";
};

int run_estimate_ip(const EstimateIpArgs& a) {
  std::optional<StreamSpec> sf = stream_from_flags(a.f);
  std::optional<StreamSpec> sg = stream_from_flags(a.g);
  std::uint64_t seed = a.seed;
  if (!a.f.config.empty()) {
    const auto cfg = load_config(a.f.config);
    if (!sf) sf = cfg.stream;
    if (!sg && cfg.stream_g) sg = cfg.stream_g;
    seed = cfg.master_seed;
  }
  if (!sf || !sg) throw Error(ErrorKind::ConfigInvalid, "estimate-ip needs two streams");
  auto f = materialize(*sf);
  auto g = materialize(*sg);
  const auto n = std::max(f.universe(), g.universe());
  f.resize(n);
  g.resize(n);
  const auto hash = std::make_shared<const PolySignHash>(PolySignHash::create(n, seed));
  TugOfWarSketch<PolySignHash> tf(hash), tg(hash);
  tf.update(f);
  tg.update(g);
  const PairMoments p = pair_moments(f.counts(), g.counts());
  const ProxyPolicy policy =
      a.proxy == "ground_truth" ? ProxyPolicy{UseProvided{to_double(p.ip)}} : ProxyPolicy{UseRawEstimate{}};
  const IpMomentMode mode = a.mode == "exact" ? IpMomentMode::Exact : IpMomentMode::Gaussian;
  const auto e = cv_estimate_ip(tf, tg, to_double(p.f.f2), to_double(p.g.f2), policy, mode,
                                VectorPair{f.counts(), g.counts()});
  auto out = estimate_to_json(e);
  out["ground_truth"] = to_double(p.ip);
  out["f2"] = to_double(p.f.f2);
  out["g2"] = to_double(p.g.f2);
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

struct ExperimentArgs {
  std::string config;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string output;
  std::string proxy;
  std::string mode;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  auto cfg = load_config(a.config);
  if (a.trials) {
    cfg.trials = *a.trials;
    if (cfg.mom && cfg.mom->groups * cfg.mom->per_group != cfg.trials) cfg.mom.reset();
  }
  if (a.seed) cfg.master_seed = *a.seed;
  if (!a.output.empty()) cfg.output = a.output;
  if (!a.proxy.empty()) cfg.proxy_policy = parse_proxy(a.proxy);
  if (!a.mode.empty()) cfg.ip_mode = a.mode == "exact" ? IpMomentMode::Exact : IpMomentMode::Gaussian;
  if (cfg.output.empty()) throw Error(ErrorKind::ConfigInvalid, "no output path (config 'output' or --output)");

  const auto report = run_experiment(cfg, RunOptions{a.threads});
  write_report(report, cfg.output);
  const auto& s = report.summary;
  std::cout << "trials " << s.trials << ", ground truth " << format_double(s.ground_truth) << '\n'
            << "raw:       mean " << format_double(s.raw.mean) << ", variance " << format_double(s.raw.variance)
            << ", mae " << format_double(s.raw.mae) << '\n'
            << "corrected: mean " << format_double(s.corrected.mean) << ", variance "
            << format_double(s.corrected.variance) << ", mae " << format_double(s.corrected.mae) << '\n'
            << "wrote " << cfg.output << " and " << summary_path_for(cfg.output) << '\n';
  return kExitOk;
}

struct SweepArgs {
  std::string task = "f2";
  std::vector<double> thetas;
  std::vector<double> ratios;
  std::uint64_t universe = 1000;
  std::uint64_t seed = 1;
  std::size_t points = 20;
  std::int64_t freq_lo = 1;
  std::int64_t freq_hi = 10;
  std::string mode = "gaussian";
  std::string output;
};

int run_sweep(const SweepArgs& a) {
  std::vector<SweepRow> rows;
  if (a.task == "f2") {
    F2SweepConfig cfg;
    cfg.universe = a.universe;
    cfg.seed = a.seed;
    cfg.points = a.points;
    cfg.freq_lo = a.freq_lo;
    cfg.freq_hi = a.freq_hi;
    rows = ratio_sweep_f2(cfg);
  } else {
    IpSweepConfig cfg;
    cfg.universe = a.universe;
    cfg.seed = a.seed;
    if (!a.thetas.empty()) cfg.thetas = a.thetas;
    if (!a.ratios.empty()) cfg.norm_ratios = a.ratios;
    cfg.mode = a.mode == "exact" ? IpMomentMode::Exact : IpMomentMode::Gaussian;
    rows = ratio_sweep_ip(cfg);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  if (a.output.empty()) {
    std::cout << csv.str();
  } else {
    write_text_file(a.output, csv.str());
  }
  return kExitOk;
}

struct VerifyArgs {
  std::vector<std::string> case_files;
  std::size_t random_cases = 50;
  std::uint64_t seed = 2024;
};

int run_verify(const VerifyArgs& a) {
  std::vector<VerifyCases> batches;
  batches.push_back(random_verify_cases(a.random_cases, a.seed));
  for (const auto& path : a.case_files) {
    batches.push_back(verify_cases_from_json(read_json_file(path, ErrorKind::MalformedLine)));
  }
  bool ok = true;
  for (const auto& batch : batches) {
    for (const auto& c : run_verification(batch)) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.cases << " cases)";
      if (!c.passed) std::cout << ": " << c.detail;
      std::cout << '\n';
      ok = ok && c.passed;
    }
  }
  return ok ? kExitOk : kExitData;
}

struct GenArgs {
  std::uint64_t distinct = 1000;
  std::int64_t freq_lo = 1;
  std::int64_t freq_hi = 5000;
  std::uint64_t seed = 0;
  std::uint64_t offset = 0;
  std::uint64_t universe = 0;
  std::string output;
};

int run_gen(const GenArgs& a) {
  const auto v = generate_synthetic(a.distinct, a.freq_lo, a.freq_hi, a.seed, a.offset, a.universe);
  std::ostringstream csv;
  write_vector_csv(csv, v);
  if (a.output.empty()) {
    std::cout << csv.str();
  } else {
    write_text_file(a.output, csv.str());
  }
  return kExitOk;
}

struct IngestArgs {
  StreamArgs stream;
  std::optional<std::uint64_t> universe;
  std::string output;
};

int run_ingest(const IngestArgs& a) {
  auto spec = stream_from_flags(a.stream);
  if (!spec) throw Error(ErrorKind::ConfigInvalid, "ingest needs --vector, --bow or --fimi");
  spec->declared_universe = a.universe;
  const auto v = materialize(*spec);
  if (!a.output.empty()) {
    std::ostringstream csv;
    write_vector_csv(csv, v);
    write_text_file(a.output, csv.str());
  }
  const Moments m = moments(v);
  nlohmann::json out{{"universe", v.universe()},
                     {"f0", to_double(m.f0)},
                     {"f1", to_double(m.f1)},
                     {"f2", to_double(m.f2)},
                     {"f4", to_double(m.f4)}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tug-of-War, Count-Min and Count-Sketch estimators with control-variate corrections"};
  app.require_subcommand(1);
  int status = kExitOk;

  EstimateF2Args f2;
  auto* cmd_f2 = app.add_subcommand("estimate-f2", "Estimate F2 of one stream, raw and corrected");
  cmd_f2->add_option("--config", f2.stream.config, "experiment config whose stream and seed are used");
  add_stream_flags(cmd_f2, f2.stream);
  cmd_f2->add_option("--seed", f2.seed, "sign-hash seed");
  cmd_f2->add_option("--f1", f2.f1, "stream length (default: from the stream)");
  cmd_f2->add_option("--f2-proxy", f2.f2_proxy, "value used for F2 in the coefficient (default: raw estimate)");
  cmd_f2->add_option("--cv-universe", f2.cv_universe, "items the control variate sums over");
  cmd_f2->add_option("--universe", f2.universe, "declared universe size");
  cmd_f2->add_option("--sketch-in", f2.sketch_in, "resume from a saved sketch");
  cmd_f2->add_option("--sketch-out", f2.sketch_out, "save the sketch state");
  cmd_f2->callback([&] { status = run_estimate_f2(f2); });

  EstimateIpArgs ip;
  auto* cmd_ip = app.add_subcommand("estimate-ip", "Estimate the inner product of two streams");
  cmd_ip->add_option("--config", ip.f.config, "experiment config whose streams and seed are used");
  add_stream_flags(cmd_ip, ip.f);
  add_stream_flags(cmd_ip, ip.g, "-g");
  cmd_ip->add_option("--seed", ip.seed, "sign-hash seed");
  cmd_ip->add_option("--proxy", ip.proxy)->check(CLI::IsMember({"raw_estimate", "ground_truth"}));
  cmd_ip->add_option("--ip-mode", ip.mode)->check(CLI::IsMember({"gaussian", "exact"}));
  cmd_ip->callback([&] { status = run_estimate_ip(ip); });

  ExperimentArgs ex;
  auto* cmd_ex = app.add_subcommand("experiment", "Run repeated trials and write a CSV report and JSON summary");
  cmd_ex->add_option("--config", ex.config, "experiment config JSON")->required();
  cmd_ex->add_option("--trials", ex.trials);
  cmd_ex->add_option("--seed", ex.seed, "master seed");
  cmd_ex->add_option("--threads", ex.threads, "worker threads (default: CV_SKETCH_THREADS or all cores)");
  cmd_ex->add_option("--output", ex.output, "report CSV path");
  cmd_ex->add_option("--proxy", ex.proxy)->check(CLI::IsMember({"raw_estimate", "ground_truth"}));
  cmd_ex->add_option("--ip-mode", ex.mode)->check(CLI::IsMember({"gaussian", "exact"}));
  cmd_ex->callback([&] { status = run_experiment_cmd(ex); });

  SweepArgs sw;
  auto* cmd_sw = app.add_subcommand("sweep-ratio", "Theoretical corrected/raw variance ratios");
  cmd_sw->add_option("--task", sw.task)->check(CLI::IsMember({"f2", "ip"}));
  cmd_sw->add_option("--theta", sw.thetas, "angles in degrees (ip)")->delimiter(',');
  cmd_sw->add_option("--ratio", sw.ratios, "F2/G2 ratios (ip)")->delimiter(',');
  cmd_sw->add_option("--universe", sw.universe);
  cmd_sw->add_option("--seed", sw.seed);
  cmd_sw->add_option("--points", sw.points, "points (f2)");
  cmd_sw->add_option("--freq-lo", sw.freq_lo, "initial frequency lower bound (f2)");
  cmd_sw->add_option("--freq-hi", sw.freq_hi, "initial frequency upper bound (f2)");
  cmd_sw->add_option("--ip-mode", sw.mode)->check(CLI::IsMember({"gaussian", "exact"}));
  cmd_sw->add_option("--output", sw.output, "CSV path (default: stdout)");
  cmd_sw->callback([&] { status = run_sweep(sw); });

  VerifyArgs vf;
  auto* cmd_vf = app.add_subcommand("verify", "Check closed-form moments against exhaustive enumeration");
  cmd_vf->add_option("--cases", vf.case_files, "JSON case files");
  cmd_vf->add_option("--random", vf.random_cases, "number of random cases");
  cmd_vf->add_option("--seed", vf.seed);
  cmd_vf->callback([&] { status = run_verify(vf); });

  GenArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-synthetic", "Write a synthetic frequency vector as item,count CSV");
  cmd_gen->add_option("--distinct", gen.distinct);
  cmd_gen->add_option("--freq-lo", gen.freq_lo);
  cmd_gen->add_option("--freq-hi", gen.freq_hi);
  cmd_gen->add_option("--seed", gen.seed);
  cmd_gen->add_option("--offset", gen.offset, "first item id");
  cmd_gen->add_option("--universe", gen.universe, "minimum universe size");
  cmd_gen->add_option("--output", gen.output, "CSV path (default: stdout)");
  cmd_gen->callback([&] { status = run_gen(gen); });

  IngestArgs ing;
  auto* cmd_ing = app.add_subcommand("ingest", "Load a dataset, print its moments, optionally save it as CSV");
  add_stream_flags(cmd_ing, ing.stream);
  cmd_ing->add_option("--universe", ing.universe, "declared universe size");
  cmd_ing->add_option("--output", ing.output, "item,count CSV path");
  cmd_ing->callback([&] { status = run_ingest(ing); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_data_error(e.kind()) ? kExitData : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return status;
}
