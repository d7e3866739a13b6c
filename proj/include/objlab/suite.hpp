#pragma once

// Randomized verification sweep over every relation, plus JSON/CSV
// serialization of reports. Output is byte-stable for a given config.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "objlab/empowerment.hpp"
#include "objlab/objectives.hpp"
#include "objlab/relations.hpp"
#include "objlab/report.hpp"
#include "objlab/sampling.hpp"

namespace objlab {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline void write_number(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "\"nan\"";
  } else if (std::isinf(v)) {
    out << (v > 0 ? "\"inf\"" : "\"-inf\"");
  } else {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  }
}

inline void write_json(std::ostream& out, const Json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        break;
      }
      out << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << pad << Json(it.key()).dump() << ": ";
        write_json(out, it.value(), indent, depth + 1);
      }
      out << '\n' << close_pad << '}';
      break;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        break;
      }
      out << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out << ",\n";
        out << pad;
        write_json(out, j[i], indent, depth + 1);
      }
      out << '\n' << close_pad << ']';
      break;
    }
    case Json::value_t::number_float: write_number(out, j.get<double>()); break;
    default: out << j.dump(); break;
  }
}

}  // namespace detail

/// Pretty JSON with every float at 17 significant digits.
inline std::string to_json_string(const Json& j) {
  std::ostringstream out;
  detail::write_json(out, j, 2, 0);
  out << '\n';
  return out.str();
}

inline Json to_json(const RelationReport& r) {
  Json j;
  j["relation_id"] = r.relation_id;
  j["kind"] = std::string(to_string(r.kind));
  j["trial"] = r.trial;
  j["lhs_label"] = r.lhs_label;
  j["lhs"] = r.lhs;
  Json terms = Json::object();
  for (const auto& t : r.terms) terms[t.label] = t.value;
  j["terms"] = std::move(terms);
  Json signs = Json::object();
  for (const auto& t : r.terms) signs[t.label] = t.sign;
  j["term_signs"] = std::move(signs);
  j["signed_sum"] = r.signed_sum;
  j["residual"] = r.residual;
  if (r.slack) j["slack"] = *r.slack;
  Json flags = Json::object();
  for (const auto& [k, v] : r.condition_flags) flags[k] = v;
  j["condition_flags"] = std::move(flags);
  j["pass"] = r.pass;
  if (r.error) j["error"] = *r.error;
  return j;
}

inline void write_reports_csv(std::ostream& out, const std::vector<RelationReport>& reports) {
  out << "relation_id,kind,trial,lhs,signed_sum,residual,slack,pass\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : reports)
    out << r.relation_id << ',' << to_string(r.kind) << ',' << r.trial << ',' << num(r.lhs) << ',' << num(r.signed_sum)
        << ',' << num(r.residual) << ',' << (r.slack ? num(*r.slack) : std::string()) << ',' << (r.pass ? 1 : 0)
        << '\n';
}

// ---------------------------------------------------------------------------
// Verification sweep

struct VerifyConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 1000;
  double tolerance = 1e-9;
  CardinalityRange cardinality{2, 5};
  CardinalityRange sequence_cardinality{2, 3};
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const {
    if (trials < 1) throw Error("trials must be >= 1");
    if (!(tolerance > 0.0)) throw Error("tolerance must be > 0");
    if (cardinality.lo < 1 || cardinality.lo > cardinality.hi) throw Error("invalid cardinality range");
    if (sequence_cardinality.lo < 1 || sequence_cardinality.lo > sequence_cardinality.hi)
      throw Error("invalid sequence cardinality range");
  }
};

struct RelationSummary {
  std::size_t count = 0, passed = 0, failed = 0;
  double max_residual = 0.0;
  std::optional<double> min_slack, max_slack;
  double slack_sum = 0.0;
  std::size_t flagged_violations = 0;  // probes: bound_holds false
};

struct SuiteReport {
  std::string version = kVersion;
  VerifyConfig config;
  std::vector<RelationReport> reports;
  std::size_t passed = 0, failed = 0, probes = 0, probe_violations = 0;
  std::map<std::string, RelationSummary> by_relation;

  bool ok() const { return failed == 0; }
};

/// Every relation evaluated on the models of one trial.
inline std::vector<RelationReport> verify_trial(const VerifyConfig& cfg, std::size_t trial) {
  std::vector<RelationReport> out;
  const double tol = cfg.tolerance;
  auto run = [&](const std::string& id, RelationKind kind, const std::function<RelationReport()>& f) {
    RelationReport r;
    try {
      r = f();
    } catch (const std::exception& e) {
      r.relation_id = id;
      r.kind = kind;
      r.pass = kind == RelationKind::probe;
      r.error = e.what();
      r.residual = std::numeric_limits<double>::quiet_NaN();
    }
    r.relation_id = id;
    r.trial = trial;
    out.push_back(std::move(r));
  };

  Rng rng = trial_rng(cfg.seed, stream_id("model"), trial);
  const GenerativeModel m = random_model(rng, cfg.cardinality);
  const DesireDistribution d = random_desire(rng, m.observation_space());
  const std::size_t a = uniform_size(rng, 0, m.num_actions() - 1);
  const PolicySimplex q_a = random_policy(rng, m.num_actions());
  const VariationalBelief q_marg{random_joint(rng, m.state_space()), std::nullopt};
  const VariationalBelief q_amort{random_joint(rng, m.state_space()),
                                  random_cond(rng, m.observation_space(), m.state_space())};
  const JointTable data = random_joint(rng, m.observation_space());
  const CondTable target_post = random_cond(rng, m.observation_space(), m.state_space());
  const DesireDistribution desire_x = random_desire(rng, m.state_space());
  const JointTable pj = random_joint(rng, m.joint(a).space());
  const JointTable tj = random_joint(rng, m.joint(a).space());

  Rng srng = trial_rng(cfg.seed, stream_id("sequence"), trial);
  const SequenceModel seq_delta = random_sequence_model(srng, true, cfg.sequence_cardinality);
  const SequenceDesire sd_delta = random_sequence_desire(srng, seq_delta);
  const SequenceModel seq_general = random_sequence_model(srng, false, cfg.sequence_cardinality);
  const SequenceDesire sd_general = random_sequence_desire(srng, seq_general);

  const Names latent = m.state_space().names();
  const Names obs = m.observation_space().names();
  using K = RelationKind;

  run("objectives.evidence_as_divergence", K::identity, [&] { return evidence_as_divergence(m, d, a, tol); });
  run("objectives.divergence_as_evidence", K::identity, [&] { return divergence_as_evidence(m, d, a, tol); });
  run("objectives.divergence_latent_decomposition", K::identity,
      [&] { return divergence_latent_decomposition(m, d, a, tol); });
  run("objectives.entropy_latent_identity", K::identity, [&] { return entropy_latent_identity(m, a, tol); });
  run("objectives.kl_control", K::identity, [&] { return kl_control(m.prior(), desire_x, a, tol); });
  run("probcore.info_gain_equals_mi", K::identity, [&] { return info_gain_equals_mi(m.joint(a), latent, obs, tol); });

  run("relations.cai_evidence_bound", K::bound, [&] { return cai_evidence_bound(m, d, q_a, std::nullopt, tol); });
  run("relations.efe_epistemic_decomposition", K::identity,
      [&] { return efe_epistemic_decomposition(q_marg, m, d, a, tol); });
  run("relations.efe_risk_ambiguity", K::identity, [&] { return efe_risk_ambiguity(q_marg, m, d, a, tol); });
  run("relations.efe_evidence_relation", K::identity, [&] { return efe_evidence_relation(q_marg, m, d, a, tol); });
  run("relations.efe_divergence_identity", K::identity, [&] { return efe_divergence_identity(q_amort, m, d, a, tol); });
  run("relations.efe_divergence_bound_probe", K::probe, [&] { return efe_divergence_bound_probe(q_amort, m, d, a); });
  run("relations.apdm_split", K::identity, [&] { return apdm_split(q_amort, m, d, data, a, tol); });
  run("relations.apdm_info_bound", K::bound, [&] { return apdm_info_bound(q_amort, m, target_post, data, tol); });
  run("relations.joint_vs_marginal_divergence", K::bound,
      [&] { return joint_vs_marginal_divergence(pj, tj, obs, tol); });
  run("relations.apdm_evidence_bound", K::bound,
      [&] { return apdm_evidence_bound(q_amort, m, d, target_post, data, a, tol); });
  run("relations.apdm_realize_preferences_split", K::identity,
      [&] { return apdm_realize_preferences_split(q_amort, m, d, data, a, tol); });

  run("empowerment.sequence_divergence_decomposition", K::bound,
      [&] { return sequence_divergence_decomposition(seq_delta, sd_delta, tol); });
  run("empowerment.sequence_divergence_decomposition_general", K::bound,
      [&] { return sequence_divergence_decomposition(seq_general, sd_general, tol); });
  run("empowerment.past_divergence_delta_check", K::identity,
      [&] { return past_divergence_delta_check(seq_delta, sd_delta, tol); });
  return out;
}

/// Recomputes aggregate counts and per-relation summaries from `reports`.
inline void aggregate(SuiteReport& s) {
  s.passed = s.failed = s.probes = s.probe_violations = 0;
  s.by_relation.clear();
  for (const auto& r : s.reports) {
    auto& sum = s.by_relation[r.relation_id];
    ++sum.count;
    (r.pass ? sum.passed : sum.failed)++;
    (r.pass ? s.passed : s.failed)++;
    if (std::isfinite(r.residual)) sum.max_residual = std::max(sum.max_residual, r.residual);
    if (r.slack) {
      sum.min_slack = sum.min_slack ? std::min(*sum.min_slack, *r.slack) : *r.slack;
      sum.max_slack = sum.max_slack ? std::max(*sum.max_slack, *r.slack) : *r.slack;
      sum.slack_sum += *r.slack;
    }
    if (r.kind == RelationKind::probe) {
      ++s.probes;
      if (r.error || (r.has_flag("bound_holds") && !r.flag("bound_holds"))) {
        ++s.probe_violations;
        ++sum.flagged_violations;
      }
    }
  }
}

/// Runs `trials` trials (possibly on several threads) and assembles the
/// reports sorted by (relation_id, trial).
inline SuiteReport run_verify(const VerifyConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<RelationReport>> per_trial(cfg.trials);
  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, cfg.trials));
  if (n_threads <= 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) per_trial[t] = verify_trial(cfg, t);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < cfg.trials; t += n_threads) per_trial[t] = verify_trial(cfg, t);
      });
    for (auto& th : pool) th.join();
  }
  SuiteReport s;
  s.config = cfg;
  for (auto& v : per_trial)
    for (auto& r : v) s.reports.push_back(std::move(r));
  std::stable_sort(s.reports.begin(), s.reports.end(), [](const RelationReport& x, const RelationReport& y) {
    return x.relation_id != y.relation_id ? x.relation_id < y.relation_id : x.trial < y.trial;
  });
  aggregate(s);
  return s;
}

inline Json to_json(const VerifyConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["tolerance"] = c.tolerance;
  j["cardinality"] = Json{{"min", c.cardinality.lo}, {"max", c.cardinality.hi}};
  j["sequence_cardinality"] = Json{{"min", c.sequence_cardinality.lo}, {"max", c.sequence_cardinality.hi}};
  return j;
}

inline Json to_json(const SuiteReport& s) {
  Json j;
  j["version"] = s.version;
  j["config"] = to_json(s.config);
  Json reports = Json::array();
  for (const auto& r : s.reports) reports.push_back(to_json(r));
  j["reports"] = std::move(reports);
  Json agg;
  agg["total"] = s.reports.size();
  agg["pass"] = s.passed;
  agg["fail"] = s.failed;
  agg["report_only"] = s.probes;
  agg["report_only_violations"] = s.probe_violations;
  Json rel = Json::object();
  for (const auto& [id, sum] : s.by_relation) {
    Json e;
    e["count"] = sum.count;
    e["pass"] = sum.passed;
    e["fail"] = sum.failed;
    e["max_residual"] = sum.max_residual;
    if (sum.min_slack) {
      e["min_slack"] = *sum.min_slack;
      e["mean_slack"] = sum.slack_sum / static_cast<double>(sum.count);
      e["max_slack"] = *sum.max_slack;
    }
    if (sum.flagged_violations) e["violations"] = sum.flagged_violations;
    rel[id] = std::move(e);
  }
  agg["by_relation"] = std::move(rel);
  j["aggregates"] = std::move(agg);
  return j;
}

}  // namespace objlab
