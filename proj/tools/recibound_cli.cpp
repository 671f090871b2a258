// Command-line front end: run self-training experiments, evaluate
// generalization bounds and stopping rules, emit bound curves, and execute
// the Monte Carlo validation suites.
//
// Exit codes: 0 success, 1 usage/config error, 2 validation violation,
// 3 numerical failure. Errors are reported as one JSON object on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recibound/recibound.hpp"

namespace fs = std::filesystem;
using recibound::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void emit_error(const std::string& code, const std::string& message) {
  json j;
  j["error"] = code;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Shared bound-input flags
// ---------------------------------------------------------------------------

struct BoundFlags {
  long n = 0;
  long m = 1;
  long T = 0;
  double p = 1.0;
  int d = 3;
  double D_Z = 0.0;
  double L_s = -1.0;
  double L_ell = -1.0;
  double delta = 0.05;
  double C_a = -1.0;
  double C_b = -1.0;
  double kappa = -1.0;
  double gamma = -1.0;
  double L_a = -1.0;
  double F_bound = -1.0;
  double covering_entropy = -1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n, "initial sample size")->required();
    cmd->add_option("--m", m, "points changed per iteration");
    cmd->add_option("--T", T, "iteration horizon (finite-T bounds)");
    cmd->add_option("--p", p, "Wasserstein order in [1,2]");
    cmd->add_option("--d", d, "instance-space dimension (must exceed 2p)");
    cmd->add_option("--d-z", D_Z, "diameter of the instance space");
    cmd->add_option("--l-s", L_s, "sample-adaptation Lipschitz constant");
    cmd->add_option("--l-ell", L_ell, "loss Lipschitz constant");
    cmd->add_option("--delta", delta, "failure probability in (0,1)");
    cmd->add_option("--c-a", C_a, "concentration constant C_a (default 2^(d/p))");
    cmd->add_option("--c-b", C_b, "concentration constant C_b (default 1/(4 D_Z^2))");
    cmd->add_option("--kappa", kappa, "gradient Lipschitz constant");
    cmd->add_option("--gamma", gamma, "strong-convexity modulus");
    cmd->add_option("--l-a", L_a, "Lipschitz constant of P -> argmin risk");
    cmd->add_option("--f-bound", F_bound, "uniform bound on hypothesis outputs");
    cmd->add_option("--covering-entropy", covering_entropy,
                    "entropy integral of the hypothesis class");
  }

  recibound::BoundInputs resolve() const {
    recibound::BoundInputs in;
    in.n = n;
    in.m = m;
    in.T = T;
    in.p = p;
    in.d = d;
    in.D_Z = D_Z;
    in.delta = delta;
    if (D_Z <= 0.0)
      throw std::invalid_argument("--d-z is required and must be > 0");
    in.C_a = C_a > 0.0 ? C_a : std::pow(2.0, static_cast<double>(d) / p);
    in.C_b = C_b > 0.0 ? C_b : 1.0 / (4.0 * D_Z * D_Z);
    if (L_ell < 0.0) throw std::invalid_argument("--l-ell is required");
    in.L_ell = L_ell;
    in.L_s = L_s < 0.0 ? 0.0 : L_s;
    in.kappa = kappa < 0.0 ? 0.0 : kappa;
    in.gamma = gamma < 0.0 ? 0.0 : gamma;
    in.L_a = L_a < 0.0 ? 0.0 : L_a;
    in.F_bound = F_bound < 0.0 ? 0.0 : F_bound;
    in.covering_entropy = covering_entropy < 0.0 ? 0.0 : covering_entropy;
    return in;
  }

  bool has_l_s() const { return L_s >= 0.0; }
};

void require_flag(bool present, const char* flag, const char* why) {
  if (!present)
    throw std::invalid_argument(std::string("missing ") + flag + ": " + why);
}

recibound::BoundReport evaluate_theorem(const std::string& theorem,
                                        const BoundFlags& flags,
                                        double train_risk, double risk_theta_T,
                                        double risk_theta_0) {
  const auto in = flags.resolve();
  if (theorem == "gen-gap") {
    require_flag(flags.has_l_s(), "--l-s",
                 "the convergent gap bound needs the adaptation Lipschitz constant");
    return recibound::gen_gap_bound(in, train_risk);
  }
  if (theorem == "anytime-gap") {
    if (in.T >= 2)
      require_flag(flags.has_l_s(), "--l-s",
                   "the anytime gap bound needs the adaptation Lipschitz constant for T >= 2");
    return recibound::anytime_gap_bound(in, train_risk);
  }
  if (theorem == "excess-risk" || theorem == "anytime-excess-risk") {
    require_flag(flags.gamma >= 0.0 && flags.gamma > 0.0, "--gamma",
                 "excess-risk bounds need a strongly convex loss (gamma > 0); "
                 "use ridge_logistic");
    require_flag(flags.kappa >= 0.0, "--kappa",
                 "excess-risk bounds need the gradient Lipschitz constant");
    require_flag(flags.L_a > 0.0, "--l-a",
                 "excess-risk bounds need the Lipschitz constant of P -> argmin risk; "
                 "it has no closed form and must be supplied (an empirical estimate works)");
    require_flag(flags.has_l_s(), "--l-s",
                 "excess-risk bounds need the adaptation Lipschitz constant");
    return theorem == "excess-risk" ? recibound::excess_risk_bound(in)
                                    : recibound::anytime_excess_risk_bound(in);
  }
  if (theorem == "data-dependent-excess") {
    return recibound::data_dependent_excess_bound(in, risk_theta_T, risk_theta_0);
  }
  throw std::invalid_argument(
      "unknown --theorem '" + theorem +
      "' (expected gen-gap, anytime-gap, excess-risk, anytime-excess-risk, "
      "or data-dependent-excess)");
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct ResolvedLs {
  std::optional<double> value;
  std::string source;
};

ResolvedLs resolve_l_s(const recibound::ExperimentConfig& cfg,
                       const recibound::ReciprocalPath& path, long n_initial) {
  if (cfg.L_s_override) return {cfg.L_s_override, "override"};
  if (cfg.adaptation.mode == recibound::AdaptationMode::greedy_add &&
      cfg.adaptation.m == 1)
    return {static_cast<double>(n_initial - 1) / static_cast<double>(n_initial),
            "theoretical_greedy_m1"};
  double measured = -1.0;
  std::vector<double> steps;
  for (const auto& rec : path.iterations)
    if (rec.step_wasserstein) steps.push_back(*rec.step_wasserstein);
  for (std::size_t k = 1; k < steps.size(); ++k)
    if (steps[k - 1] > 0.0) measured = std::max(measured, steps[k] / steps[k - 1]);
  if (measured >= 0.0) return {measured, "empirical_max_ratio"};
  return {std::nullopt, "unavailable"};
}

int cmd_run(const std::string& config_path) {
  const auto cfg = recibound::load_experiment_config(config_path);
  const auto loss = cfg.loss_spec();

  recibound::DataSet data;
  if (cfg.synthetic) {
    data = recibound::generate_synthetic(*cfg.synthetic, cfg.space);
  } else {
    const auto labeled_file = recibound::read_dataset_csv(*cfg.labeled_csv, cfg.space);
    if (labeled_file.labeled.empty())
      throw std::invalid_argument("labeled_csv contains no labeled rows");
    if (!labeled_file.pool.empty())
      throw std::invalid_argument("labeled_csv contains unlabeled rows");
    auto pool_file = recibound::read_dataset_csv(*cfg.pool_csv, cfg.space);
    data.labeled = labeled_file.labeled;
    data.pool = std::move(pool_file.pool);
    // Labeled rows in the pool file count as pool points; their labels are
    // discarded in favor of pseudo-labels.
    for (auto& z : pool_file.labeled) {
      z.y = 0.0;
      data.pool.push_back(std::move(z));
    }
  }
  if (data.labeled.empty())
    throw std::invalid_argument("run: labeled set is empty");

  const auto path = recibound::run_reciprocal(data.labeled, data.pool, cfg.T,
                                              loss, cfg.adaptation, cfg.erm);

  fs::create_directories(cfg.output_dir);
  const auto out = [&](const char* name) {
    return (fs::path(cfg.output_dir) / name).string();
  };

  recibound::write_path_jsonl(out("path.jsonl"), path);
  if (cfg.export_samples) {
    for (const auto& rec : path.iterations) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%04d.csv", rec.t);
      recibound::write_dataset_csv(out(name), rec.sample.points, {}, cfg.space.d_x());
    }
  }

  const long n_initial = static_cast<long>(data.labeled.size());
  const auto constants = recibound::default_constants(cfg.space);
  const auto loss_constants = recibound::derive_constants(loss);
  const auto ls = resolve_l_s(cfg, path, n_initial);

  recibound::BoundInputs in;
  in.n = n_initial;
  in.m = cfg.adaptation.m;
  in.p = cfg.space.p();
  in.d = cfg.space.d();
  in.D_Z = recibound::diameter_z(cfg.space);
  in.L_ell = loss_constants.L_ell;
  in.delta = cfg.delta;
  in.C_a = cfg.C_a_override.value_or(constants.C_a);
  in.C_b = cfg.C_b_override.value_or(constants.C_b);

  // Per-iteration gap bounds over the realized horizon.
  {
    std::ofstream bounds_out(out("bounds.jsonl"));
    for (const auto& rec : path.iterations) {
      if (rec.t >= 1 && !ls.value) break;  // no usable L_s: only t=0 is bounded
      recibound::BoundInputs it_in = in;
      it_in.T = rec.t;
      it_in.L_s = ls.value.value_or(0.0);
      auto rep = recibound::anytime_gap_bound(it_in, rec.train_risk);
      json row = recibound::bound_report_to_json(rep);
      row["t"] = rec.t;
      bounds_out << row.dump() << "\n";
    }
  }

  json summary;
  summary["config_path"] = config_path;
  summary["n_initial"] = n_initial;
  summary["n_final"] = path.iterations.back().sample.size();
  summary["iterations"] = path.iterations.size();
  summary["horizon"] = path.horizon;
  summary["pool_exhausted"] = path.pool_exhausted;
  summary["pool_remaining"] = path.pool_remaining.size();
  summary["final_train_risk"] = path.iterations.back().train_risk;
  summary["theta_final"] = path.iterations.back().theta.theta;
  summary["l_s"] = ls.value ? json(*ls.value) : json(nullptr);
  summary["l_s_source"] = ls.source;
  summary["constants"] = {{"d_z", in.D_Z},     {"l_ell", in.L_ell},
                          {"c_a", in.C_a},     {"c_b", in.C_b},
                          {"d", in.d},         {"p", in.p},
                          {"kappa", loss_constants.kappa},
                          {"gamma", loss_constants.gamma},
                          {"f_bound", loss_constants.F_bound}};

  if (ls.value) {
    // Gap terms at the configured horizon; overrides let a desk-scale run
    // report the bound arithmetic of a larger configured experiment.
    recibound::BoundInputs gap_in = in;
    gap_in.T = cfg.T;
    gap_in.L_s = *ls.value;
    auto gap = recibound::anytime_gap_bound(gap_in, 0.0);
    summary["gap_report"] = recibound::bound_report_to_json(gap);
    auto cert = recibound::anytime_gap_bound(gap_in, path.iterations.back().train_risk);
    summary["generalization_certificate"] = recibound::bound_report_to_json(cert);
  } else {
    summary["gap_report"] = nullptr;
    summary["generalization_certificate"] = nullptr;
  }

  std::ofstream sum_out(out("summary.json"));
  sum_out << summary.dump(2) << "\n";

  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// curve
// ---------------------------------------------------------------------------

int cmd_curve(const BoundFlags& flags, const std::string& sweep, long from,
              long to, long step, const std::vector<double>& deltas,
              const std::string& output) {
  if (sweep != "T" && sweep != "n")
    throw std::invalid_argument("--sweep must be T or n");
  if (step <= 0) throw std::invalid_argument("--step must be positive");
  if (to < from) throw std::invalid_argument("--to must be >= --from");
  if (sweep == "n" && from < 1)
    throw std::invalid_argument("--from must be >= 1 when sweeping n");

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!output.empty() && output != "-") {
    file.open(output);
    if (!file) throw std::runtime_error("cannot open output file " + output);
    os = &file;
  }

  *os << "t,initial_gap,reciprocal_gap,total,delta,n\n";
  const std::vector<double> delta_list =
      deltas.empty() ? std::vector<double>{flags.delta} : deltas;
  for (double delta : delta_list) {
    for (long v = from; v <= to; v += step) {
      auto in = flags.resolve();
      in.delta = delta;
      if (sweep == "T")
        in.T = v;
      else
        in.n = v;
      const auto rep = recibound::anytime_gap_bound(in, 0.0);
      *os << (sweep == "T" ? v : in.T) << ","
          << recibound::format_double(rep.initial_gap) << ","
          << recibound::format_double(rep.reciprocal_gap) << ","
          << recibound::format_double(rep.total) << ","
          << recibound::format_double(delta) << "," << in.n << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reciprocal-learning simulator and generalization-bound calculator"};
  app.require_subcommand(1);

  // --- run ---
  std::string run_config;
  auto* run = app.add_subcommand("run", "execute a self-training experiment from a JSON config");
  run->add_option("--config", run_config, "path to the experiment JSON")->required();

  // --- bound ---
  BoundFlags bound_flags;
  std::string bound_theorem;
  double bound_train_risk = 0.0, risk_theta_T = 0.0, risk_theta_0 = 0.0;
  auto* bound = app.add_subcommand("bound", "evaluate one generalization bound");
  bound->add_option("--theorem", bound_theorem,
                    "gen-gap | anytime-gap | excess-risk | anytime-excess-risk | "
                    "data-dependent-excess")
      ->required();
  bound_flags.attach(bound);
  bound->add_option("--train-risk", bound_train_risk,
                    "measured training risk added to gap bounds");
  bound->add_option("--risk-theta-t", risk_theta_T,
                    "risk of the final model on the initial sample");
  bound->add_option("--risk-theta-0", risk_theta_0,
                    "risk of the initial model on the initial sample");

  // --- stop ---
  BoundFlags stop_flags;
  double stop_epsilon = 0.0;
  auto* stop = app.add_subcommand("stop", "largest horizon keeping the gap within budget");
  stop->add_option("--epsilon", stop_epsilon, "generalization-gap budget")->required();
  stop_flags.attach(stop);

  // --- curve ---
  BoundFlags curve_flags;
  std::string curve_sweep = "T", curve_output;
  long curve_from = 0, curve_to = 100, curve_step = 1;
  std::vector<double> curve_deltas;
  auto* curve = app.add_subcommand("curve", "CSV sweep of the anytime gap bound");
  curve->add_option("--sweep", curve_sweep, "sweep variable: T or n");
  curve->add_option("--from", curve_from, "sweep start")->required();
  curve->add_option("--to", curve_to, "sweep end (inclusive)")->required();
  curve->add_option("--step", curve_step, "sweep stride");
  curve->add_option("--delta", curve_deltas, "failure probabilities (one block per value)");
  curve->add_option("--output,-o", curve_output, "output CSV path (default stdout)");
  curve_flags.attach(curve);

  // --- validate ---
  std::string validate_suite;
  long validate_trials = 0;
  std::uint64_t validate_seed = 1;
  std::string validate_details;
  auto* validate = app.add_subcommand("validate", "run a Monte Carlo validation suite");
  validate->add_option("--suite", validate_suite,
                       "distortion | concentration | oracle_ot | paper_replication")
      ->required();
  validate->add_option("--trials", validate_trials, "trials (suite-specific default)");
  validate->add_option("--seed", validate_seed, "master seed");
  validate->add_option("--details", validate_details, "write per-trial details JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config);

    if (bound->parsed()) {
      const auto rep = evaluate_theorem(bound_theorem, bound_flags, bound_train_risk,
                                        risk_theta_T, risk_theta_0);
      std::cout << recibound::bound_report_to_json(rep).dump(2) << "\n";
      return kExitOk;
    }

    if (stop->parsed()) {
      auto in = stop_flags.resolve();
      require_flag(stop_flags.has_l_s(), "--l-s",
                   "the stopping rule needs the adaptation Lipschitz constant");
      const auto res = recibound::stopping_rule(stop_epsilon, in);
      json j;
      j["status"] = res.status == recibound::StoppingStatus::finite ? "finite" : "unbounded";
      if (res.status == recibound::StoppingStatus::finite) {
        j["t_star"] = res.t_star;
        j["t_floor"] = res.t_floor;
      }
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    }

    if (curve->parsed())
      return cmd_curve(curve_flags, curve_sweep, curve_from, curve_to, curve_step,
                       curve_deltas, curve_output);

    if (validate->parsed()) {
      recibound::ValidationSuite suite;
      if (validate_suite == "distortion") suite = recibound::ValidationSuite::distortion;
      else if (validate_suite == "concentration") suite = recibound::ValidationSuite::concentration;
      else if (validate_suite == "oracle_ot") suite = recibound::ValidationSuite::oracle_ot;
      else if (validate_suite == "paper_replication") suite = recibound::ValidationSuite::paper_replication;
      else throw std::invalid_argument("unknown --suite '" + validate_suite + "'");

      if (validate_trials <= 0) {
        switch (suite) {
          case recibound::ValidationSuite::oracle_ot: validate_trials = 200; break;
          case recibound::ValidationSuite::distortion: validate_trials = 100; break;
          case recibound::ValidationSuite::concentration: validate_trials = 1000; break;
          case recibound::ValidationSuite::paper_replication: validate_trials = 1; break;
        }
      }
      auto rep = recibound::run_validation(suite, validate_trials, validate_seed);
      if (!validate_details.empty()) {
        std::ofstream det(validate_details);
        if (!det) throw std::runtime_error("cannot open " + validate_details);
        json full = recibound::validation_report_to_json(rep);
        full["details"] = rep.details;
        det << full.dump(2) << "\n";
        rep.details_path = validate_details;
      }
      std::cout << recibound::validation_report_to_json(rep).dump(2) << "\n";
      if (!rep.passed) {
        json diag;
        diag["error"] = "validation_violation";
        diag["suite"] = recibound::to_string(rep.suite);
        diag["violations"] = rep.violations;
        diag["worst_slack"] = rep.worst_slack;
        diag["details"] = rep.details;
        std::cerr << diag.dump() << "\n";
        return kExitValidation;
      }
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    emit_error("invalid_argument", e.what());
    return kExitUsage;
  } catch (const std::domain_error& e) {
    emit_error("domain_error", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    emit_error("numerical_failure", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}
