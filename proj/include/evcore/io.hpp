#pragma once

// Serialization: the e-value report as a flat JSON record and the truth
// function as an ordered text table. All numerics are rendered as decimal
// text with 17 significant digits so round trips are bit-stable and output
// for a fixed (config, seed) is byte-identical.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "evcore/fbst.hpp"

namespace evcore {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* sampler_name(SamplerMode m) {
  switch (m) {
    case SamplerMode::Exact: return "exact";
    case SamplerMode::Mcmc: return "mcmc";
    case SamplerMode::Quasi: return "quasi";
  }
  return "unknown";
}

inline const char* status_name(OptimStatus s) {
  switch (s) {
    case OptimStatus::Converged: return "converged";
    case OptimStatus::MaxIterations: return "max-iterations";
    case OptimStatus::LineSearchFailure: return "line-search-failure";
    case OptimStatus::SingularBasis: return "singular-basis";
    case OptimStatus::RestorationFailure: return "restoration-failure";
  }
  return "unknown";
}

inline std::string report_to_json(const EvalueReport& r) {
  std::ostringstream os;
  auto vec = [](const Vec& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += format_double(v[i]);
    }
    return s + "]";
  };
  os << "{\n";
  os << "  \"model\": \"" << r.model << "\",\n";
  os << "  \"ev\": " << format_double(r.ev) << ",\n";
  os << "  \"ev_bar\": " << format_double(r.ev_bar) << ",\n";
  os << "  \"sev\": " << format_double(r.sev) << ",\n";
  os << "  \"log_s_star\": " << format_double(r.log_s_star) << ",\n";
  os << "  \"theta_star\": " << vec(r.theta_star) << ",\n";
  os << "  \"log_s_hat\": " << format_double(r.log_s_hat) << ",\n";
  os << "  \"theta_hat\": " << vec(r.theta_hat) << ",\n";
  os << "  \"delta\": " << format_double(r.delta) << ",\n";
  os << "  \"beta\": " << format_double(r.beta) << ",\n";
  os << "  \"m\": " << r.m << ",\n";
  os << "  \"m_effective\": " << format_double(r.m_effective) << ",\n";
  os << "  \"seed\": " << r.seed << ",\n";
  os << "  \"sampler\": \"" << sampler_name(r.sampler) << "\",\n";
  os << "  \"status_unconstrained\": \"" << status_name(r.status_unconstrained) << "\",\n";
  os << "  \"status_constrained\": \"" << status_name(r.status_constrained) << "\",\n";
  os << "  \"t\": " << r.t << ",\n";
  os << "  \"h_dim\": " << r.h_dim << "\n";
  os << "}\n";
  return os.str();
}

inline SamplerMode sampler_from_name(const std::string& s) {
  if (s == "exact") return SamplerMode::Exact;
  if (s == "mcmc") return SamplerMode::Mcmc;
  if (s == "quasi") return SamplerMode::Quasi;
  throw std::runtime_error("unknown sampler name '" + s + "'");
}

inline OptimStatus status_from_name(const std::string& s) {
  if (s == "converged") return OptimStatus::Converged;
  if (s == "max-iterations") return OptimStatus::MaxIterations;
  if (s == "line-search-failure") return OptimStatus::LineSearchFailure;
  if (s == "singular-basis") return OptimStatus::SingularBasis;
  if (s == "restoration-failure") return OptimStatus::RestorationFailure;
  throw std::runtime_error("unknown status name '" + s + "'");
}

inline EvalueReport report_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  EvalueReport r;
  r.model = j.at("model").get<std::string>();
  r.ev = j.at("ev").get<double>();
  r.ev_bar = j.at("ev_bar").get<double>();
  r.sev = j.at("sev").get<double>();
  r.log_s_star = j.at("log_s_star").get<double>();
  r.theta_star = j.at("theta_star").get<Vec>();
  r.log_s_hat = j.at("log_s_hat").get<double>();
  r.theta_hat = j.at("theta_hat").get<Vec>();
  r.delta = j.at("delta").get<double>();
  r.beta = j.at("beta").get<double>();
  r.m = j.at("m").get<long>();
  r.m_effective = j.at("m_effective").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.sampler = sampler_from_name(j.at("sampler").get<std::string>());
  r.status_unconstrained = status_from_name(j.at("status_unconstrained").get<std::string>());
  r.status_constrained = status_from_name(j.at("status_constrained").get<std::string>());
  r.t = j.at("t").get<int>();
  r.h_dim = j.at("h_dim").get<int>();
  return r;
}

inline std::string truth_function_to_text(const TruthFunction& tf) {
  std::ostringstream os;
  os << "evcore-truth-function 1\n";
  os << "m " << tf.m << "\n";
  os << "seed " << tf.seed << "\n";
  os << "log_s_star " << format_double(tf.log_s_star) << "\n";
  os << "log_s_hat " << format_double(tf.log_s_hat) << "\n";
  os << "k " << tf.log_thresholds.size() << "\n";
  for (size_t i = 0; i < tf.log_thresholds.size(); ++i)
    os << format_double(tf.log_thresholds[i]) << " " << format_double(tf.mass[i]) << "\n";
  return os.str();
}

inline TruthFunction truth_function_from_text(std::istream& in) {
  TruthFunction tf;
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "evcore-truth-function" || version != 1)
    throw std::runtime_error("truth_function_from_text: not a truth-function file");
  std::string key;
  size_t k = 0;
  while (in >> key) {
    if (key == "m") in >> tf.m;
    else if (key == "seed") in >> tf.seed;
    else if (key == "log_s_star") in >> tf.log_s_star;
    else if (key == "log_s_hat") in >> tf.log_s_hat;
    else if (key == "k") {
      in >> k;
      break;
    } else {
      throw std::runtime_error("truth_function_from_text: unexpected field '" + key + "'");
    }
  }
  tf.log_thresholds.resize(k);
  tf.mass.resize(k);
  for (size_t i = 0; i < k; ++i) {
    if (!(in >> tf.log_thresholds[i] >> tf.mass[i]))
      throw std::runtime_error("truth_function_from_text: truncated table");
  }
  tf.validate();
  return tf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace evcore
