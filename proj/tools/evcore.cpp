// Batch front end: load a model and data, run the FBST pipeline, emit
// reports and composable truth functions.
//
//   evcore run --model hardy-weinberg --data hw.json --m 1000000 --seed 7 --out report.json
//   evcore compose --op and --truth a.txt b.txt --out composite.json
//   evcore report report.json [...] [--truth tf.txt --csv curve.csv]
//
// Exit codes: 0 success, 2 optimizer failure, 3 data/schema error,
// 4 configuration error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evcore/io.hpp"
#include "evcore/models.hpp"

using json = nlohmann::json;
using namespace evcore;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOptimizer = 2;
constexpr int kExitData = 3;
constexpr int kExitConfig = 4;

struct RunConfig {
  std::string model;
  std::string data_path;
  std::string reference = "uniform";
  std::vector<double> ref_counts;
  std::string sampler;
  long m = 100000;
  double beta = 0.05;
  std::uint64_t seed = 1;
  int streams = 1;
  int k = 64;
  std::vector<double> loss;
  std::string out;
  std::string truth_out;
  double rho = 0.5;  // wearout ratio for CSV weibull input
};

json load_json(const std::string& path) {
  json j = json::parse(read_text_file(path));
  return j;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// comma-separated numeric rows; returns one vector per line
std::vector<Vec> load_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Vec> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    Vec row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      size_t pos = 0;
      double v = std::stod(cell, &pos);
      row.push_back(v);
    }
    if (!row.empty()) rows.push_back(row);
  }
  return rows;
}

ReferenceChoice parse_reference(const std::string& name) {
  if (name == "uniform") return ReferenceChoice::Uniform;
  if (name == "maxent") return ReferenceChoice::MaxEnt;
  if (name == "jeffreys") return ReferenceChoice::Jeffreys;
  if (name == "custom") return ReferenceChoice::Custom;
  throw CLI::ValidationError("--reference", "unknown reference '" + name + "'");
}

ModelBundle build_model_csv(const RunConfig& cfg);

ModelBundle build_model(const RunConfig& cfg) {
  if (has_suffix(cfg.data_path, ".csv")) return build_model_csv(cfg);
  json data = load_json(cfg.data_path);
  if (cfg.model == "hardy-weinberg") {
    if (!data.contains("counts")) throw std::runtime_error("schema: missing field 'counts'");
    Counts x = data["counts"].get<Counts>();
    Vec prior = data.value("prior_counts", std::vector<double>{0.0, 0.0, 0.0});
    return hardy_weinberg_model(x, prior, parse_reference(cfg.reference), Vec(cfg.ref_counts));
  }
  if (cfg.model == "cv") {
    for (const char* f : {"n", "mean", "c"})
      if (!data.contains(f)) throw std::runtime_error(std::string("schema: missing field '") + f + "'");
    CvSufficientStats st;
    st.n = data["n"].get<long>();
    st.mean = data["mean"].get<double>();
    if (data.contains("ss")) st.ss = data["ss"].get<double>();
    else if (data.contains("std")) st = CvSufficientStats::from_std(st.n, st.mean, data["std"].get<double>());
    else throw std::runtime_error("schema: need 'ss' or 'std'");
    bool log_coords = data.value("log_coordinates", false);
    return log_coords ? cv_model_log_coords(st, data["c"].get<double>())
                      : cv_model(st, data["c"].get<double>());
  }
  if (cfg.model == "contingency") {
    if (!data.contains("table") || !data.contains("kind"))
      throw std::runtime_error("schema: contingency needs 'table' and 'kind'");
    auto t = data["table"];
    if (!t.is_array() || t.size() != 2 || t[0].size() != 2 || t[1].size() != 2)
      throw std::runtime_error("schema: 'table' must be 2x2");
    std::string kind = data["kind"].get<std::string>();
    ContingencyKind ck;
    if (kind == "homogeneity") ck = ContingencyKind::Homogeneity;
    else if (kind == "independence") ck = ContingencyKind::Independence;
    else throw std::runtime_error("schema: unknown contingency kind '" + kind + "'");
    auto bundle = contingency_2x2_models(t[0][0].get<long>(), t[0][1].get<long>(),
                                         t[1][0].get<long>(), t[1][1].get<long>(), ck);
    return ModelBundle{bundle.model, bundle.hyp};
  }
  if (cfg.model == "weibull-wearout") {
    WearoutData w;
    if (!data.contains("failures")) throw std::runtime_error("schema: missing field 'failures'");
    w.failures = data["failures"].get<Vec>();
    w.withdrawals = data.value("withdrawals", Vec{});
    w.rho = data.value("rho", 0.5);
    w.beta_lo = data.value("beta_lo", 3.0);
    w.beta_hi = data.value("beta_hi", 4.0);
    return weibull_wearout_model(w);
  }
  if (cfg.model == "dose-equivalence") {
    if (!data.contains("observations")) throw std::runtime_error("schema: missing field 'observations'");
    std::vector<Vec> obs;
    for (const auto& row : data["observations"]) obs.push_back(row.get<Vec>());
    return dose_equivalence_model(dose_stats_from_observations(obs));
  }
  throw CLI::ValidationError("--model", "unknown model '" + cfg.model + "'");
}

// CSV entry points for raw-observation models: weibull rows are
// "time,event" (event 1 = failure, 0 = withdrawal), dose rows are the four
// response coordinates.
ModelBundle build_model_csv(const RunConfig& cfg) {
  auto rows = load_csv(cfg.data_path);
  if (cfg.model == "weibull-wearout") {
    WearoutData w;
    w.rho = cfg.rho;
    for (const Vec& r : rows) {
      if (r.size() != 2) throw std::runtime_error("schema: weibull CSV rows must be time,event");
      if (r[1] != 0.0) w.failures.push_back(r[0]);
      else w.withdrawals.push_back(r[0]);
    }
    return weibull_wearout_model(w);
  }
  if (cfg.model == "dose-equivalence") {
    for (const Vec& r : rows)
      if (r.size() != 4) throw std::runtime_error("schema: dose CSV rows must have 4 columns");
    return dose_equivalence_model(dose_stats_from_observations(rows));
  }
  throw std::runtime_error("schema: CSV input is only defined for the raw-observation models");
}

int cmd_run(const RunConfig& cfg) {
  ModelBundle bundle;
  try {
    bundle = build_model(cfg);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }

  EvalueConfig ec;
  ec.m = cfg.m;
  ec.beta = cfg.beta;
  ec.seed = cfg.seed;
  ec.threads = cfg.streams;
  ec.k_thresholds = cfg.k;
  ec.want_truth_function = !cfg.truth_out.empty();
  if (!cfg.sampler.empty()) {
    if (cfg.sampler == "exact") ec.sampler = SamplerMode::Exact;
    else if (cfg.sampler == "mcmc") ec.sampler = SamplerMode::Mcmc;
    else if (cfg.sampler == "quasi") ec.sampler = SamplerMode::Quasi;
    else {
      std::cerr << "error: unknown sampler '" << cfg.sampler << "'\n";
      return kExitConfig;
    }
  }

  EvalueReport rep;
  try {
    rep = compute_evalue(bundle.model, bundle.hyp, ec);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "optimizer/integration failure: " << e.what() << "\n";
    return kExitOptimizer;
  }
  if (rep.status_constrained != OptimStatus::Converged ||
      rep.status_unconstrained != OptimStatus::Converged) {
    std::cerr << "optimizer failure: unconstrained=" << status_name(rep.status_unconstrained)
              << " constrained=" << status_name(rep.status_constrained) << "\n";
    return kExitOptimizer;
  }

  std::string body = report_to_json(rep);
  if (!cfg.loss.empty()) {
    if (cfg.loss.size() != 3) {
      std::cerr << "error: --loss expects a,b,d\n";
      return kExitConfig;
    }
    LossParams lp{cfg.loss[0], cfg.loss[1], cfg.loss[2]};
    double phi;
    try {
      phi = lp.threshold();
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitConfig;
    }
    std::string extra = "  \"phi\": " + format_double(phi) +
                        ",\n  \"accept\": " + (decision_accept(rep.ev, lp) ? "true" : "false") + "\n}";
    body = body.substr(0, body.rfind("\n}")) + ",\n" + extra + "\n";
  }

  if (!cfg.out.empty()) write_text_file(cfg.out, body);
  else std::cout << body;
  if (!cfg.truth_out.empty() && rep.truth) write_text_file(cfg.truth_out, truth_function_to_text(*rep.truth));
  return kExitOk;
}

int cmd_compose(const std::string& op, const std::vector<std::string>& reports,
                const std::vector<std::string>& truths, const std::string& out,
                const std::string& truth_out) {
  std::ostringstream os;
  try {
    if (op == "or") {
      if (reports.empty()) throw std::runtime_error("or-composition needs report files");
      std::vector<double> evs;
      for (const auto& p : reports) {
        json j = load_json(p);
        if (!j.contains("ev")) throw std::runtime_error("missing field 'ev' in " + p);
        evs.push_back(j["ev"].get<double>());
      }
      double ev = possibilistic_disjunction(evs);
      os << "{\n  \"op\": \"or\",\n  \"ev\": " << format_double(ev) << ",\n  \"elementary\": [";
      for (size_t i = 0; i < evs.size(); ++i) os << (i ? "," : "") << format_double(evs[i]);
      os << "],\n  \"inconsistency\": " << format_double(inconsistency_index(evs)) << "\n}\n";
    } else if (op == "and") {
      if (truths.empty()) throw std::runtime_error("and-composition needs truth-function files");
      std::vector<TruthFunction> tfs;
      for (const auto& p : truths) {
        std::istringstream in(read_text_file(p));
        tfs.push_back(truth_function_from_text(in));
      }
      ConjunctionResult c = conjunction_evalue(tfs);
      os << "{\n  \"op\": \"and\",\n  \"ev\": " << format_double(c.ev)
         << ",\n  \"lower_bound\": " << format_double(c.lower_bound)
         << ",\n  \"upper_bound\": " << format_double(c.upper_bound) << ",\n  \"elementary\": [";
      for (size_t i = 0; i < tfs.size(); ++i) os << (i ? "," : "") << format_double(tfs[i].ev());
      os << "]\n}\n";
      if (!truth_out.empty()) write_text_file(truth_out, truth_function_to_text(c.composite));
    } else {
      std::cerr << "error: unknown composition op '" << op << "'\n";
      return kExitConfig;
    }
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  if (!out.empty()) write_text_file(out, os.str());
  else std::cout << os.str();
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& files, const std::string& truth_path,
               const std::string& csv_out) {
  static const char* kFields[] = {"model", "ev",    "ev_bar", "sev",  "delta",
                                  "m",     "seed",  "sampler", "log_s_star", "log_s_hat"};
  try {
    if (!files.empty()) {
      std::printf("%-26s %-12s %-12s %-12s %-12s %-9s %-8s %-7s %-14s %-14s\n", "model", "ev",
                  "ev_bar", "sev", "delta", "m", "seed", "sampler", "log_s_star", "log_s_hat");
      std::vector<double> evs;
      std::ostringstream csv;
      csv << "model,m,ev,ev_bar,sev,delta\n";
      for (const auto& p : files) {
        json j = load_json(p);
        std::string missing;
        for (const char* f : kFields)
          if (!j.contains(f)) missing += std::string(missing.empty() ? "" : ", ") + f;
        if (!missing.empty())
          throw std::runtime_error("report " + p + " is missing fields: " + missing);
        evs.push_back(j["ev"].get<double>());
        std::printf("%-26s %-12.6g %-12.6g %-12.6g %-12.6g %-9ld %-8llu %-7s %-14.8g %-14.8g\n",
                    j["model"].get<std::string>().c_str(), j["ev"].get<double>(),
                    j["ev_bar"].get<double>(), j["sev"].get<double>(), j["delta"].get<double>(),
                    j["m"].get<long>(),
                    static_cast<unsigned long long>(j["seed"].get<std::uint64_t>()),
                    j["sampler"].get<std::string>().c_str(), j["log_s_star"].get<double>(),
                    j["log_s_hat"].get<double>());
        csv << j["model"].get<std::string>() << "," << j["m"].get<long>() << ","
            << format_double(j["ev"].get<double>()) << ","
            << format_double(j["ev_bar"].get<double>()) << ","
            << format_double(j["sev"].get<double>()) << ","
            << format_double(j["delta"].get<double>()) << "\n";
      }
      if (evs.size() > 1)
        std::printf("inconsistency index: %.6g\n", inconsistency_index(evs));
      if (!csv_out.empty() && truth_path.empty()) write_text_file(csv_out, csv.str());
    }
    if (!truth_path.empty()) {
      std::istringstream in(read_text_file(truth_path));
      TruthFunction tf = truth_function_from_text(in);
      std::ostringstream csv;
      csv << "log_threshold,mass\n";
      for (size_t i = 0; i < tf.log_thresholds.size(); ++i)
        csv << format_double(tf.log_thresholds[i]) << "," << format_double(tf.mass[i]) << "\n";
      if (!csv_out.empty()) write_text_file(csv_out, csv.str());
      else std::cout << csv.str();
    }
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FBST e-value engine"};
  app.require_subcommand(1);

  RunConfig rc;
  if (const char* env_seed = std::getenv("EVCORE_SEED")) rc.seed = std::strtoull(env_seed, nullptr, 10);

  auto* run = app.add_subcommand("run", "compute an e-value report for a model and data set");
  run->add_option("--model", rc.model, "model name")->required();
  run->add_option("--data", rc.data_path, "data file (JSON)")->required();
  run->add_option("--reference", rc.reference, "reference density: uniform|maxent|jeffreys|custom");
  run->add_option("--ref-counts", rc.ref_counts, "custom reference pseudo-counts");
  run->add_option("--sampler", rc.sampler, "sampler: exact|mcmc|quasi");
  run->add_option("--m", rc.m, "Monte Carlo sample size")->check(CLI::Range(1000L, 1000000000L));
  run->add_option("--beta", rc.beta, "1 - confidence level")->check(CLI::Range(1e-6, 0.999999));
  run->add_option("--seed", rc.seed, "random seed");
  run->add_option("--streams", rc.streams, "execution threads")->check(CLI::Range(1, 64));
  run->add_option("--k", rc.k, "truth-function threshold count")->check(CLI::Range(1, 4096));
  run->add_option("--loss", rc.loss, "loss parameters a,b,d for the decision rule")->delimiter(',');
  run->add_option("--rho", rc.rho, "wearout ratio under test (CSV weibull input)");
  run->add_option("--out", rc.out, "report output path");
  run->add_option("--truth-out", rc.truth_out, "truth-function output path");

  std::string op, comp_out, comp_truth_out;
  std::vector<std::string> comp_reports, comp_truths;
  auto* compose = app.add_subcommand("compose", "combine e-values across independent models");
  compose->add_option("--op", op, "and|or")->required();
  compose->add_option("--reports", comp_reports, "report JSON files (or-composition)");
  compose->add_option("--truth", comp_truths, "truth-function files (and-composition)");
  compose->add_option("--out", comp_out, "composite report output path");
  compose->add_option("--truth-out", comp_truth_out, "composite truth-function output path");

  std::vector<std::string> rep_files;
  std::string rep_truth, rep_csv;
  auto* report = app.add_subcommand("report", "tabulate reports and emit plot-data CSV");
  report->add_option("files", rep_files, "report JSON files");
  report->add_option("--truth", rep_truth, "truth-function file for the W(v) curve");
  report->add_option("--csv", rep_csv, "CSV output path for the curve");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (run->parsed()) return cmd_run(rc);
  if (compose->parsed()) return cmd_compose(op, comp_reports, comp_truths, comp_out, comp_truth_out);
  if (report->parsed()) return cmd_report(rep_files, rep_truth, rep_csv);
  return kExitConfig;
}
