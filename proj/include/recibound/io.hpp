#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "recibound/bounds.hpp"
#include "recibound/core.hpp"
#include "recibound/learner.hpp"
#include "recibound/reciprocal.hpp"

namespace recibound {

using json = nlohmann::json;

/// Shortest round-trip decimal form of a double; deterministic and exact.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Dataset CSV: header x_1,..,x_{d_x},y with y left empty on unlabeled rows.
// ---------------------------------------------------------------------------

struct DataSet {
  std::vector<Instance> labeled;
  std::vector<Instance> pool;  // unlabeled rows; y is a placeholder 0
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing garbage");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string(what) + ": cannot parse number '" + s + "'");
  }
}

}  // namespace detail

inline DataSet read_dataset_csv(const std::string& path, const SpaceSpec& space) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("read_dataset_csv: empty file " + path);
  const auto header = detail::split_csv_line(line);
  const int d_x = space.d_x();
  if (static_cast<int>(header.size()) != d_x + 1 || header.back() != "y")
    throw std::invalid_argument(
        "read_dataset_csv: expected header x_1,..,x_" + std::to_string(d_x) +
        ",y in " + path);

  DataSet out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (static_cast<int>(cells.size()) != d_x + 1)
      throw std::invalid_argument("read_dataset_csv: wrong column count at line " +
                                  std::to_string(lineno) + " of " + path);
    Instance z;
    z.x.resize(d_x);
    for (int k = 0; k < d_x; ++k)
      z.x[k] = detail::parse_double(cells[k], "read_dataset_csv");
    const bool has_label = !cells.back().empty();
    z.y = has_label ? detail::parse_double(cells.back(), "read_dataset_csv") : 0.0;
    if (!z.valid_in(space))
      throw std::invalid_argument("read_dataset_csv: point outside the declared space at line " +
                                  std::to_string(lineno) + " of " + path);
    (has_label ? out.labeled : out.pool).push_back(std::move(z));
  }
  return out;
}

inline void write_dataset_csv(const std::string& path,
                              const std::vector<Instance>& labeled,
                              const std::vector<Instance>& pool, int d_x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  for (int k = 1; k <= d_x; ++k) out << "x_" << k << ",";
  out << "y\n";
  for (const auto& z : labeled) {
    for (double v : z.x) out << format_double(v) << ",";
    out << format_double(z.y) << "\n";
  }
  for (const auto& z : pool) {
    for (double v : z.x) out << format_double(v) << ",";
    out << "\n";
  }
}

inline void write_coupling_csv(const std::string& path, const Coupling& coupling) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_coupling_csv: cannot open " + path);
  out << "i,j,mass\n";
  for (std::size_t i = 0; i < coupling.mass.size(); ++i)
    for (std::size_t j = 0; j < coupling.mass[i].size(); ++j)
      if (coupling.mass[i][j] > 0.0)
        out << i << "," << j << "," << format_double(coupling.mass[i][j]) << "\n";
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

inline SpaceSpec space_from_json(const json& j) {
  if (!j.contains("d_x") || !j.contains("feature_box") || !j.contains("theta_box"))
    throw std::invalid_argument("space config: requires d_x, feature_box, theta_box");
  const int d_x = j.at("d_x").get<int>();
  auto parse_box = [](const json& arr, const char* what) {
    std::vector<Interval> box;
    for (const auto& pair : arr) {
      if (!pair.is_array() || pair.size() != 2)
        throw std::invalid_argument(std::string(what) + ": each entry must be [lo, hi]");
      box.push_back(Interval{pair[0].get<double>(), pair[1].get<double>()});
    }
    return box;
  };
  Interval label{0.0, 1.0};
  if (j.contains("label_range")) {
    const auto& lr = j.at("label_range");
    label = Interval{lr[0].get<double>(), lr[1].get<double>()};
  }
  return SpaceSpec(d_x, parse_box(j.at("feature_box"), "feature_box"), label,
                   parse_box(j.at("theta_box"), "theta_box"),
                   j.value("p", 1.0));
}

inline json space_to_json(const SpaceSpec& s) {
  json j;
  j["d_x"] = s.d_x();
  j["p"] = s.p();
  j["label_range"] = {s.label_range().lo, s.label_range().hi};
  json fb = json::array(), tb = json::array();
  for (const auto& iv : s.feature_box()) fb.push_back({iv.lo, iv.hi});
  for (const auto& iv : s.theta_box()) tb.push_back({iv.lo, iv.hi});
  j["feature_box"] = fb;
  j["theta_box"] = tb;
  return j;
}

inline LossSpec loss_from_json(const json& j, const SpaceSpec& space) {
  const std::string kind = j.value("kind", "logistic");
  if (kind == "logistic")
    return LossSpec(LossKind::logistic, 0.0, space);
  if (kind == "ridge_logistic")
    return LossSpec(LossKind::ridge_logistic, j.value("ridge_lambda", 0.0), space);
  throw std::invalid_argument("loss config: unknown kind '" + kind + "'");
}

inline AdaptationConfig adaptation_from_json(const json& j) {
  AdaptationConfig c;
  const std::string mode = j.value("mode", "greedy_add");
  if (mode == "greedy_add") c.mode = AdaptationMode::greedy_add;
  else if (mode == "nongreedy_replace") c.mode = AdaptationMode::nongreedy_replace;
  else throw std::invalid_argument("adaptation config: unknown mode '" + mode + "'");
  c.m = j.value("m", 1);
  c.selection_temperature = j.value("selection_temperature", 0.0);
  const std::string policy = j.value("replace_policy", "oldest_pseudo");
  if (policy == "oldest_pseudo") c.replace_policy = ReplacePolicy::oldest_pseudo;
  else if (policy == "random_seeded") c.replace_policy = ReplacePolicy::random_seeded;
  else throw std::invalid_argument("adaptation config: unknown replace_policy '" + policy + "'");
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

/// Weighted atom of a synthetic discrete ground truth.
struct WeightedAtom {
  double weight = 0.0;
  Instance point;
};

struct SyntheticSpec {
  long n_labeled = 0;
  long n_pool = 0;
  std::uint64_t generator_seed = 0;
  std::vector<WeightedAtom> true_distribution;
};

inline SyntheticSpec synthetic_from_json(const json& j) {
  SyntheticSpec s;
  s.n_labeled = j.at("n_labeled").get<long>();
  s.n_pool = j.at("n_pool").get<long>();
  s.generator_seed = j.at("generator_seed").get<std::uint64_t>();
  for (const auto& aj : j.at("true_distribution")) {
    WeightedAtom a;
    a.weight = aj.at("w").get<double>();
    a.point.y = aj.at("y").get<double>();
    a.point.x = aj.at("x").get<std::vector<double>>();
    s.true_distribution.push_back(std::move(a));
  }
  if (s.true_distribution.empty())
    throw std::invalid_argument("synthetic config: true_distribution must be nonempty");
  double sum = 0.0;
  for (const auto& a : s.true_distribution) {
    if (!(a.weight > 0.0))
      throw std::invalid_argument("synthetic config: atom weights must be positive");
    sum += a.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("synthetic config: atom weights must sum to 1");
  return s;
}

/// Everything cmd_run needs. Exactly one of (labeled_csv/pool_csv, synthetic)
/// must be present.
struct ExperimentConfig {
  SpaceSpec space;
  LossKind loss_kind = LossKind::logistic;
  double ridge_lambda = 0.0;
  AdaptationConfig adaptation;
  int T = 0;
  RunSettings erm;
  double delta = 0.05;
  std::optional<double> L_s_override;
  std::optional<double> C_a_override, C_b_override;
  std::optional<std::string> labeled_csv, pool_csv;
  std::optional<SyntheticSpec> synthetic;
  std::string output_dir = ".";
  bool export_samples = false;

  LossSpec loss_spec() const { return LossSpec(loss_kind, ridge_lambda, space); }
};

inline ExperimentConfig experiment_from_json(const json& j) {
  if (!j.contains("space")) throw std::invalid_argument("run config: missing 'space'");
  ExperimentConfig cfg{space_from_json(j.at("space"))};
  if (j.contains("loss")) {
    const auto spec = loss_from_json(j.at("loss"), cfg.space);
    cfg.loss_kind = spec.kind;
    cfg.ridge_lambda = spec.ridge_lambda;
  }
  if (j.contains("adaptation")) cfg.adaptation = adaptation_from_json(j.at("adaptation"));
  cfg.T = j.value("T", 0);
  if (cfg.T < 0) throw std::invalid_argument("run config: T must be >= 0");
  if (j.contains("erm")) {
    cfg.erm.erm_tol = j.at("erm").value("tol", 1e-8);
    cfg.erm.erm_max_iter = j.at("erm").value("max_iter", 50000);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    cfg.delta = b.value("delta", 0.05);
    if (b.contains("L_s")) cfg.L_s_override = b.at("L_s").get<double>();
    if (b.contains("C_a")) cfg.C_a_override = b.at("C_a").get<double>();
    if (b.contains("C_b")) cfg.C_b_override = b.at("C_b").get<double>();
  }
  const bool has_paths = j.contains("data") && j.at("data").contains("labeled_csv");
  const bool has_synth = j.contains("data") && j.at("data").contains("synthetic");
  if (has_paths == has_synth)
    throw std::invalid_argument(
        "run config: exactly one of data.labeled_csv/pool_csv or data.synthetic required");
  if (has_paths) {
    cfg.labeled_csv = j.at("data").at("labeled_csv").get<std::string>();
    cfg.pool_csv = j.at("data").at("pool_csv").get<std::string>();
  } else {
    cfg.synthetic = synthetic_from_json(j.at("data").at("synthetic"));
  }
  cfg.output_dir = j.value("output_dir", std::string("."));
  cfg.export_samples = j.value("export_samples", false);
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config parse error in " + path + ": " + e.what());
  }
  return experiment_from_json(j);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline json bound_report_to_json(const BoundReport& r) {
  json j;
  j["theorem"] = to_string(r.theorem_id);
  j["initial_gap"] = r.initial_gap;
  j["reciprocal_gap"] = r.reciprocal_gap;
  j["complexity_term"] = r.complexity_term;
  if (r.data_term) j["data_term"] = *r.data_term;
  j["total"] = r.total;
  j["confidence"] = r.confidence;
  return j;
}

inline json iteration_to_json(const IterationRecord& rec) {
  json j;
  j["t"] = rec.t;
  j["theta"] = rec.theta.theta;
  j["n"] = rec.sample.size();
  j["train_risk"] = rec.train_risk;
  if (rec.step_wasserstein) j["step_wasserstein"] = *rec.step_wasserstein;
  j["erm_converged"] = rec.erm_converged;
  return j;
}

/// JSON-lines path export: one record per iteration.
inline void write_path_jsonl(const std::string& path, const ReciprocalPath& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_path_jsonl: cannot open " + path);
  for (const auto& rec : p.iterations) out << iteration_to_json(rec).dump() << "\n";
}

}  // namespace recibound
