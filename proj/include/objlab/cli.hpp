#pragma once

// Command-line front end: verify, fig1, bandit, explore, empower.
// Settings resolve as defaults < --config file < command-line flags.
// Exit codes: 0 all hard checks pass, 1 a check failed, 2 usage/config error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "objlab/empowerment.hpp"
#include "objlab/mixturefit.hpp"
#include "objlab/sampling.hpp"
#include "objlab/suite.hpp"
#include "objlab/testbeds.hpp"

namespace objlab::cli {

enum ExitCode : int { kPass = 0, kFail = 1, kUsage = 2 };

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct BanditScenario {
  std::vector<double> phi{0.9, 0.1};
  double resolution = 1e-3;
  std::vector<double> theta{0.9, 0.1};
  double desire_floor = 0.01;
  double bernoulli_resolution = 1e-3;
};

struct ExploreScenario {
  double alpha = 1.0;
  double desire_reward = 0.99;
};

struct EmpowerScenario {
  std::size_t trials = 500;
  bool delta_past = true;
};

struct RunConfig {
  VerifyConfig verify;
  std::optional<std::string> out;
  std::string format = "json";
  Fig1Config fig1;
  BanditScenario bandit;
  ExploreScenario explore;
  EmpowerScenario empower;
};

// ---------------------------------------------------------------------------
// Config file

namespace detail {

using nlohmann::json;

inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void read_range(const json& j, const char* key, CardinalityRange& r) {
  if (!j.contains(key)) return;
  only_keys(j.at(key), {"min", "max"}, key);
  read(j.at(key), "min", r.lo);
  read(j.at(key), "max", r.hi);
}

}  // namespace detail

/// Applies a JSON config document on top of `cfg`.
inline void apply_config(const nlohmann::json& j, RunConfig& cfg) {
  using detail::only_keys;
  using detail::read;
  try {
    only_keys(j, {"seed", "trials", "tolerance", "out", "format", "threads", "cardinality", "sequence_cardinality",
                  "fig1", "bandit", "explore", "empower"},
              "config");
    read(j, "seed", cfg.verify.seed);
    read(j, "trials", cfg.verify.trials);
    read(j, "tolerance", cfg.verify.tolerance);
    read(j, "threads", cfg.verify.threads);
    read(j, "format", cfg.format);
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    detail::read_range(j, "cardinality", cfg.verify.cardinality);
    detail::read_range(j, "sequence_cardinality", cfg.verify.sequence_cardinality);
    if (j.contains("fig1")) {
      const auto& f = j.at("fig1");
      only_keys(f, {"steps", "learning_rate", "optimizer", "seed", "jitter", "kl_grid_points", "grid_points",
                    "unnormalized_evidence_desire"},
                "fig1");
      auto& o = cfg.fig1.optimizer;
      read(f, "steps", o.steps);
      read(f, "learning_rate", o.learning_rate);
      read(f, "seed", o.seed);
      read(f, "jitter", o.jitter);
      read(f, "kl_grid_points", cfg.fig1.kl_grid_points);
      read(f, "grid_points", cfg.fig1.grid.n_points);
      read(f, "unnormalized_evidence_desire", cfg.fig1.unnormalized_evidence_desire);
      if (f.contains("optimizer")) {
        const auto name = f.at("optimizer").get<std::string>();
        if (name == "adam") o.kind = OptimizerKind::adam;
        else if (name == "gd") o.kind = OptimizerKind::gradient_descent;
        else throw ConfigError("fig1.optimizer must be 'adam' or 'gd'");
      }
    }
    if (j.contains("bandit")) {
      const auto& b = j.at("bandit");
      only_keys(b, {"phi", "resolution", "bernoulli"}, "bandit");
      read(b, "phi", cfg.bandit.phi);
      read(b, "resolution", cfg.bandit.resolution);
      if (b.contains("bernoulli")) {
        const auto& bb = b.at("bernoulli");
        only_keys(bb, {"theta", "floor", "resolution"}, "bandit.bernoulli");
        read(bb, "theta", cfg.bandit.theta);
        read(bb, "floor", cfg.bandit.desire_floor);
        read(bb, "resolution", cfg.bandit.bernoulli_resolution);
      }
    }
    if (j.contains("explore")) {
      const auto& e = j.at("explore");
      only_keys(e, {"alpha", "desire_reward"}, "explore");
      read(e, "alpha", cfg.explore.alpha);
      read(e, "desire_reward", cfg.explore.desire_reward);
    }
    if (j.contains("empower")) {
      const auto& e = j.at("empower");
      only_keys(e, {"trials", "delta_past"}, "empower");
      read(e, "trials", cfg.empower.trials);
      read(e, "delta_past", cfg.empower.delta_past);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  apply_config(j, cfg);
}

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  if (cfg.out) return *cfg.out;
  if (const char* env = std::getenv("OBJLAB_OUT"); env && *env) return env;
  return ".";
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + file.string());
}

inline Json policy_json(const PolicySimplex& p) {
  Json a = Json::array();
  for (double v : p.weights()) a.push_back(v);
  return a;
}

inline Json to_json(const MatchingReport& r) {
  Json j;
  j["policy_divergence"] = policy_json(r.policy_divergence);
  j["policy_evidence"] = policy_json(r.policy_evidence);
  j["phi_bar"] = r.phi_bar;
  j["matching_index"] = r.matching_index;
  j["matching_index_evidence"] = r.matching_index_evidence;
  return j;
}

inline Json config_echo(const RunConfig& c) {
  Json j = objlab::to_json(c.verify);
  j["format"] = c.format;
  return j;
}

/// Writes {version, config, <payload>...} as JSON, or `csv_text` for csv.
inline std::filesystem::path write_report(const RunConfig& cfg, const std::string& stem, Json payload,
                                          const std::string& csv_text) {
  const auto dir = output_dir(cfg);
  if (cfg.format == "csv") {
    const auto file = dir / (stem + ".csv");
    write_text(file, csv_text);
    return file;
  }
  Json j;
  j["version"] = kVersion;
  j["config"] = config_echo(cfg);
  for (auto it = payload.begin(); it != payload.end(); ++it) j[it.key()] = it.value();
  const auto file = dir / (stem + ".json");
  write_text(file, to_json_string(j));
  return file;
}

inline std::string reports_csv(const std::vector<RelationReport>& reports) {
  std::ostringstream s;
  write_reports_csv(s, reports);
  return s.str();
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const SuiteReport s = run_verify(cfg.verify);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto file = write_report(cfg, "suite_report", objlab::to_json(s), reports_csv(s.reports));
  for (const auto& [id, sum] : s.by_relation) {
    out << (sum.failed ? "FAIL " : "ok   ") << std::left << std::setw(58) << id << " n=" << sum.count
        << " fail=" << sum.failed << " max_residual=" << std::setprecision(3) << sum.max_residual;
    if (sum.min_slack) out << " min_slack=" << *sum.min_slack;
    out << '\n';
  }
  out << "reports=" << s.reports.size() << " pass=" << s.passed << " fail=" << s.failed
      << " report_only_violations=" << s.probe_violations << " wall_seconds=" << std::setprecision(3) << secs << '\n'
      << "wrote " << file.string() << '\n';
  return s.ok() ? kPass : kFail;
}

inline int cmd_fig1(const RunConfig& cfg, std::ostream& out) {
  const auto dir = output_dir(cfg);
  const Fig1Result r = fig1_experiment(dir, cfg.fig1);
  auto comps = [](const std::vector<ComponentSummary>& cs) {
    Json a = Json::array();
    for (const auto& c : cs) a.push_back(Json{{"weight", c.weight}, {"mean", c.mean}, {"std", c.std_dev}});
    return a;
  };
  Json fig;
  fig["desire_mode"] = r.desire_mode;
  fig["desire_integral"] = r.desire_integral;
  fig["evidence"] = Json{{"final_loss", r.evidence.final_loss()},
                         {"kl", r.evidence_kl},
                         {"mass_near_mode", r.evidence_mass_near_mode},
                         {"components", comps(r.evidence_components)}};
  fig["divergence"] = Json{{"final_loss", r.divergence.final_loss()},
                           {"kl", r.divergence_kl},
                           {"components", comps(r.divergence_components)}};
  fig["checks"] = Json{{"divergence_kl_le_0.01", r.divergence_matches},
                       {"evidence_mass_and_kl", r.evidence_collapses},
                       {"evidence_std_at_floor_near_mode", r.evidence_at_floor}};
  fig["pass"] = r.pass();
  std::ostringstream csv;
  csv << std::setprecision(17) << "key,value\n"
      << "desire_mode," << r.desire_mode << "\nevidence_final_loss," << r.evidence.final_loss() << "\nevidence_kl,"
      << r.evidence_kl << "\nevidence_mass_near_mode," << r.evidence_mass_near_mode << "\ndivergence_final_loss,"
      << r.divergence.final_loss() << "\ndivergence_kl," << r.divergence_kl << "\npass," << (r.pass() ? 1 : 0) << '\n';
  const auto file = write_report(cfg, "fig1_summary", Json{{"fig1", fig}}, csv.str());
  out << std::setprecision(6) << "desire mode " << r.desire_mode << "\n"
      << "divergence fit: KL " << r.divergence_kl << (r.divergence_matches ? " (ok)" : " (FAIL)") << "\n"
      << "evidence fit:   KL " << r.evidence_kl << ", mass within 0.05 of mode " << r.evidence_mass_near_mode
      << (r.evidence_collapses && r.evidence_at_floor ? " (ok)" : " (FAIL)") << "\n"
      << "wrote " << (dir / "fig1_densities.csv").string() << " and " << file.string() << '\n';
  if (!r.pass()) out << "not converged: Figure 1 thresholds not met after " << cfg.fig1.optimizer.steps << " steps\n";
  return r.pass() ? kPass : kFail;
}

inline int cmd_bandit(const RunConfig& cfg, std::ostream& out) {
  const MatchingBandit b{cfg.bandit.phi};
  const MatchingReport closed = matching_bandit_policies(b);
  const MatchingReport grid = matching_bandit_search(b, cfg.bandit.resolution);
  const DesireDistribution desire = bernoulli_helper_desire(cfg.bandit.theta.size(), cfg.bandit.desire_floor);
  const MatchingReport bern = bernoulli_bandit_policies(cfg.bandit.theta, desire, cfg.bandit.bernoulli_resolution);

  const double tv = total_variation(grid.policy_divergence, PolicySimplex(grid.phi_bar));
  const auto best = static_cast<std::size_t>(std::max_element(b.phi.begin(), b.phi.end()) - b.phi.begin());
  const bool matching_ok = tv <= 2.0 * cfg.bandit.resolution;
  const bool evidence_ok = grid.policy_evidence[best] >= 0.999;
  const bool bern_ok = is_vertex(bern.policy_evidence) && (bern.policy_divergence.size() == 1 || is_interior(bern.policy_divergence));
  const bool pass = matching_ok && evidence_ok && bern_ok;

  Json j;
  j["deterministic"] = Json{{"phi", b.phi}, {"closed_form", to_json(closed)}, {"grid_search", to_json(grid)},
                            {"total_variation_to_phi_bar", tv}};
  j["bernoulli"] = Json{{"theta", cfg.bandit.theta}, {"desire_floor", cfg.bandit.desire_floor}, {"policies", to_json(bern)}};
  j["checks"] = Json{{"divergence_matches_phi_bar", matching_ok}, {"evidence_on_best_arm", evidence_ok},
                     {"bernoulli_interior_vs_vertex", bern_ok}};
  j["pass"] = pass;
  std::ostringstream csv;
  csv << std::setprecision(17) << "scenario,arm,phi_bar,policy_divergence,policy_evidence\n";
  for (std::size_t a = 0; a < grid.phi_bar.size(); ++a)
    csv << "deterministic," << a << ',' << grid.phi_bar[a] << ',' << grid.policy_divergence[a] << ','
        << grid.policy_evidence[a] << '\n';
  for (std::size_t a = 0; a < bern.phi_bar.size(); ++a)
    csv << "bernoulli," << a << ',' << bern.phi_bar[a] << ',' << bern.policy_divergence[a] << ','
        << bern.policy_evidence[a] << '\n';
  const auto file = write_report(cfg, "bandit_report", j, csv.str());
  out << std::setprecision(6) << "deterministic bandit: divergence matching index " << grid.matching_index
      << ", evidence matching index " << grid.matching_index_evidence << "\n"
      << "bernoulli bandit: divergence policy";
  for (double v : bern.policy_divergence.weights()) out << ' ' << v;
  out << ", evidence policy";
  for (double v : bern.policy_evidence.weights()) out << ' ' << v;
  out << "\nwrote " << file.string() << '\n';
  return pass ? kPass : kFail;
}

inline int cmd_explore(const RunConfig& cfg, std::ostream& out) {
  const TwoStepEnv env{cfg.explore.alpha};
  const TwoStepReport r = twostep_plan_scores(env, twostep_desire(cfg.explore.desire_reward), cfg.verify.tolerance);
  bool splits_ok = true;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : r.plans) {
    splits_ok = splits_ok && (!std::isfinite(p.divergence) || p.split.pass);
    lo = std::min(lo, p.divergence);
    hi = std::max(hi, p.divergence);
  }
  bool behavior_ok = true;
  if (env.alpha > 0.5 && cfg.explore.desire_reward > 0.5) behavior_ok = r.check_selected;
  if (env.alpha == 0.5) behavior_ok = hi - lo < 1e-10;
  const bool pass = splits_ok && behavior_ok;

  Json plans = Json::array();
  std::ostringstream csv;
  csv << std::setprecision(17)
      << "plan,evidence,divergence,desire_divergence,information_gain,check_information_gain\n";
  for (const auto& p : r.plans) {
    plans.push_back(Json{{"plan", p.plan.name()},
                         {"blind", p.plan.blind()},
                         {"evidence", p.evidence},
                         {"divergence", p.divergence},
                         {"desire_divergence", p.desire_divergence},
                         {"information_gain", p.information_gain},
                         {"check_information_gain", p.check_information_gain}});
    csv << p.plan.name() << ',' << p.evidence << ',' << p.divergence << ',' << p.desire_divergence << ','
        << p.information_gain << ',' << p.check_information_gain << '\n';
  }
  Json j;
  j["alpha"] = env.alpha;
  j["desire_reward"] = cfg.explore.desire_reward;
  j["plans"] = std::move(plans);
  j["best_divergence_plan"] = r.plans[r.best_divergence_plan].plan.name();
  j["best_evidence_plan"] = r.plans[r.best_evidence_plan].plan.name();
  j["check_margin"] = r.check_margin;
  j["check_selected"] = r.check_selected;
  j["pass"] = pass;
  const auto file = write_report(cfg, "explore_report", j, csv.str());
  out << std::setprecision(6) << "alpha " << env.alpha << ": divergence selects "
      << r.plans[r.best_divergence_plan].plan.name() << " (margin over best blind plan " << r.check_margin
      << "), evidence selects " << r.plans[r.best_evidence_plan].plan.name() << "\nwrote " << file.string() << '\n';
  return pass ? kPass : kFail;
}

inline int cmd_empower(const RunConfig& cfg, std::ostream& out) {
  std::vector<RelationReport> reports;
  Json mi = Json::array();
  for (std::size_t t = 0; t < cfg.empower.trials; ++t) {
    Rng rng = trial_rng(cfg.verify.seed, stream_id("empower"), t);
    const SequenceModel seq = random_sequence_model(rng, cfg.empower.delta_past, cfg.verify.sequence_cardinality);
    const SequenceDesire d = random_sequence_desire(rng, seq);
    RelationReport r = sequence_divergence_decomposition(seq, d, cfg.verify.tolerance);
    r.trial = t;
    reports.push_back(std::move(r));
    if (seq.delta_past()) {
      RelationReport p = past_divergence_delta_check(seq, d, cfg.verify.tolerance);
      p.trial = t;
      reports.push_back(std::move(p));
    }
    mi.push_back(empowerment_mi(seq));
  }
  std::stable_sort(reports.begin(), reports.end(), [](const RelationReport& x, const RelationReport& y) {
    return x.relation_id != y.relation_id ? x.relation_id < y.relation_id : x.trial < y.trial;
  });
  std::size_t failed = 0;
  double worst = 0.0;
  for (const auto& r : reports) {
    failed += r.pass ? 0 : 1;
    if (r.relation_id == "empowerment.sequence_divergence_decomposition")
      worst = std::max(worst, std::abs(*r.slack - (cfg.empower.delta_past ? 0.0 : r.term("Past Future Information"))));
  }
  Json rs = Json::array();
  for (const auto& r : reports) rs.push_back(objlab::to_json(r));
  Json j;
  j["delta_past"] = cfg.empower.delta_past;
  j["reports"] = std::move(rs);
  j["empowerment_mi"] = std::move(mi);
  j["aggregates"] = Json{{"total", reports.size()}, {"fail", failed}, {"max_unexplained_residual", worst}};
  const auto file = write_report(cfg, "empower_report", j, reports_csv(reports));
  out << std::setprecision(3) << "sequence models " << cfg.empower.trials << (cfg.empower.delta_past ? " (delta past)" : "")
      << ": failures " << failed << ", max unexplained residual " << worst << "\nwrote " << file.string() << '\n';
  return failed == 0 ? kPass : kFail;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Evidence vs Divergence objective workbench"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  struct Flags {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials, steps;
    std::optional<double> tolerance;
    std::optional<std::string> out, format, config;
    std::optional<unsigned> threads;
  } flags;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", flags.seed, "RNG seed");
    sub->add_option("--trials", flags.trials, "number of random trials (>= 1)");
    sub->add_option("--tolerance", flags.tolerance, "identity residual tolerance (> 0)");
    sub->add_option("--out", flags.out, "output directory (default: $OBJLAB_OUT or .)");
    sub->add_option("--format", flags.format, "report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--config", flags.config, "JSON config file");
  };
  CLI::App* verify = app.add_subcommand("verify", "randomized identity/bound suite -> suite_report.json");
  CLI::App* fig1 = app.add_subcommand("fig1", "Gaussian-mixture fits -> fig1_densities.csv, fig1_summary.json");
  CLI::App* bandit = app.add_subcommand("bandit", "probability matching -> bandit_report.json");
  CLI::App* explore = app.add_subcommand("explore", "two-step exploration -> explore_report.json");
  CLI::App* empower = app.add_subcommand("empower", "sequence decomposition -> empower_report.json");
  for (CLI::App* s : {verify, fig1, bandit, explore, empower}) common(s);
  verify->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  fig1->add_option("--steps", flags.steps, "optimizer steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  RunConfig cfg;
  try {
    if (flags.config) load_config_file(*flags.config, cfg);
    if (flags.seed) cfg.verify.seed = cfg.fig1.optimizer.seed = *flags.seed;
    if (flags.trials) cfg.verify.trials = cfg.empower.trials = *flags.trials;
    if (flags.tolerance) cfg.verify.tolerance = *flags.tolerance;
    if (flags.out) cfg.out = *flags.out;
    if (flags.format) cfg.format = *flags.format;
    if (flags.threads) cfg.verify.threads = *flags.threads;
    if (flags.steps) cfg.fig1.optimizer.steps = *flags.steps;
    if (cfg.format != "json" && cfg.format != "csv") throw ConfigError("format must be json or csv");
    if (cfg.empower.trials < 1) throw ConfigError("empower trials must be >= 1");
    cfg.verify.validate();
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*verify) return cmd_verify(cfg, out);
    if (*fig1) return cmd_fig1(cfg, out);
    if (*bandit) return cmd_bandit(cfg, out);
    if (*explore) return cmd_explore(cfg, out);
    if (*empower) return cmd_empower(cfg, out);
  } catch (const OptimizationError& e) {
    err << "not converged: " << e.what() << '\n';
    return kFail;
  } catch (const SupportError& e) {
    err << "check failed: " << e.what() << '\n';
    return kFail;
  } catch (const Error& e) {
    // invalid scenario parameters (probabilities out of range, bad sizes)
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace objlab::cli
