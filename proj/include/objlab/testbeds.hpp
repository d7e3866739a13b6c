#pragma once

// Behavioral testbeds: probability matching in bandits and directed
// information seeking in a two-step latent-context task.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "objlab/objectives.hpp"
#include "objlab/probcore.hpp"

namespace objlab {

// ---------------------------------------------------------------------------
// Policy search over the simplex

struct SimplexSearchResult {
  PolicySimplex policy;
  double value = 0.0;
  std::size_t evaluations = 0;
};

inline constexpr double kMaxGridPoints = 1e7;

namespace detail {

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

inline bool improves(double candidate, double best) {
  if (std::isnan(candidate)) return false;
  if (std::isinf(best) && best > 0) return candidate < best;
  return candidate < best - 1e-15 * (1.0 + std::abs(best));
}

}  // namespace detail

/// Minimizes `f` over the K-simplex: exhaustive grid at `resolution`, then
/// pairwise mass transfers with halving step down to 1e-10. Ties keep the
/// earliest grid point; the grid starts at the vertex on arm 0.
inline SimplexSearchResult simplex_search(const std::function<double(std::span<const double>)>& f, std::size_t k,
                                          double resolution) {
  if (k == 0) throw SizeError("simplex_search: need at least one arm");
  if (!(resolution > 0.0) || resolution > 0.1)
    throw SizeError("simplex_search: resolution too coarse (need at least 10 points per dimension)");
  const auto units = static_cast<std::size_t>(std::llround(1.0 / resolution));
  if (detail::binomial(units + k - 1, k - 1) > kMaxGridPoints)
    throw SizeError("simplex_search: grid too large; use a coarser resolution");

  SimplexSearchResult res;
  std::vector<double> best;
  double best_v = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> c(k, 0);
  c[0] = units;
  std::vector<double> pi(k);
  // compositions of `units` into k parts, from (units, 0, ..., 0) onward
  while (true) {
    for (std::size_t i = 0; i < k; ++i) pi[i] = static_cast<double>(c[i]) / static_cast<double>(units);
    const double v = f(pi);
    ++res.evaluations;
    if (best.empty() || detail::improves(v, best_v)) {
      best = pi;
      best_v = v;
    }
    // next composition: empty the last part into the slot after the
    // rightmost earlier nonzero part, minus one unit taken from it
    const std::size_t last = c[k - 1];
    c[k - 1] = 0;
    std::size_t i = k - 1;
    while (i > 0 && c[i - 1] == 0) --i;
    if (i == 0) break;
    --c[i - 1];
    c[i] = last + 1;
  }

  for (double delta = resolution; delta >= 1e-10; delta *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          if (i == j || best[i] <= 0.0) continue;
          const double d = std::min(delta, best[i]);
          std::vector<double> cand = best;
          cand[i] -= d;
          cand[j] += d;
          if (cand[i] < 1e-15) cand[i] = 0.0;
          const double v = f(cand);
          ++res.evaluations;
          if (detail::improves(v, best_v)) {
            best = std::move(cand);
            best_v = v;
            moved = true;
          }
        }
    }
  }
  double s = 0.0;
  for (double v : best) s += v;
  for (double& v : best) v /= s;
  res.policy = PolicySimplex(std::move(best));
  res.value = best_v;
  return res;
}

// ---------------------------------------------------------------------------
// Probability matching

/// 1 - total variation between a policy and the normalized reward profile.
inline double matching_index(const PolicySimplex& pi, std::span<const double> phi_bar) {
  if (pi.size() != phi_bar.size()) throw SpaceError("matching_index: size mismatch");
  double s = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) s += std::abs(pi[a] - phi_bar[a]);
  return 1.0 - 0.5 * s;
}

struct MatchingBandit {
  std::vector<double> phi;

  void validate() const {
    if (phi.empty()) throw SizeError("bandit needs at least one arm");
    bool any = false;
    for (double v : phi) {
      if (!(v >= 0.0 && v <= 1.0)) throw DistributionError("reward probabilities must lie in [0, 1]");
      any = any || v > 0.0;
    }
    if (!any) throw DistributionError("at least one reward probability must be positive");
  }

  std::vector<double> phi_bar() const {
    validate();
    double s = 0.0;
    for (double v : phi) s += v;
    std::vector<double> out(phi);
    for (double& v : out) v /= s;
    return out;
  }
};

struct MatchingReport {
  PolicySimplex policy_divergence;
  PolicySimplex policy_evidence;
  std::vector<double> phi_bar;
  double matching_index = 0.0;           // of the divergence policy
  double matching_index_evidence = 0.0;  // of the evidence policy
};

inline MatchingReport make_matching_report(PolicySimplex div, PolicySimplex ev, std::vector<double> phi_bar) {
  MatchingReport r{std::move(div), std::move(ev), std::move(phi_bar), 0.0, 0.0};
  r.matching_index = matching_index(r.policy_divergence, r.phi_bar);
  r.matching_index_evidence = matching_index(r.policy_evidence, r.phi_bar);
  return r;
}

/// Deterministic-observation bandit: arm a yields observation a, desire is
/// phi_bar (`pb`). Divergence objective KL[pi || phi_bar] and evidence objective
/// sum_a pi(a) ln phi_bar(a), both as functions of the policy.
inline double matching_divergence(std::span<const double> pb, std::span<const double> pi) {
  double d = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    if (pi[a] <= 0.0) continue;
    if (pb[a] <= 0.0) return std::numeric_limits<double>::infinity();
    d += pi[a] * std::log(pi[a] / pb[a]);
  }
  return d;
}

inline double matching_evidence(std::span<const double> pb, std::span<const double> pi) {
  double e = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    if (pi[a] <= 0.0) continue;
    if (pb[a] <= 0.0) return -std::numeric_limits<double>::infinity();
    e += pi[a] * std::log(pb[a]);
  }
  return e;
}

/// Closed form: the divergence policy is phi_bar itself; the evidence
/// policy is a point mass on the best arm (lowest index on ties).
inline MatchingReport matching_bandit_policies(const MatchingBandit& b) {
  const auto pb = b.phi_bar();
  const auto best = static_cast<std::size_t>(std::max_element(b.phi.begin(), b.phi.end()) - b.phi.begin());
  return make_matching_report(PolicySimplex(pb), PolicySimplex::delta(pb.size(), best), pb);
}

/// Grid-search counterpart of matching_bandit_policies.
inline MatchingReport matching_bandit_search(const MatchingBandit& b, double resolution = 1e-3) {
  const auto pb = b.phi_bar();
  auto div = simplex_search([&](std::span<const double> pi) { return matching_divergence(pb, pi); }, pb.size(), resolution);
  auto ev = simplex_search([&](std::span<const double> pi) { return -matching_evidence(pb, pi); }, pb.size(), resolution);
  return make_matching_report(div.policy, ev.policy, pb);
}

/// Observation space (arm, reward) for a K-armed Bernoulli bandit.
inline VariableSpace bernoulli_observation_space(std::size_t k) { return VariableSpace{{"arm", k}, {"reward", 2}}; }

/// p(arm, reward) = pi(arm) Bernoulli(reward; theta_arm).
inline JointTable bernoulli_outcomes(std::span<const double> theta, std::span<const double> pi) {
  const std::size_t k = theta.size();
  std::vector<double> v(2 * k);
  for (std::size_t a = 0; a < k; ++a) {
    v[2 * a] = pi[a] * (1.0 - theta[a]);
    v[2 * a + 1] = pi[a] * theta[a];
  }
  return JointTable::normalized(Table(bernoulli_observation_space(k), std::move(v)));
}

/// desire(arm, r) = desire(r) / K with desire(r = 1) = 1 - eps.
inline DesireDistribution bernoulli_helper_desire(std::size_t k, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DistributionError("desire floor must lie in (0, 1)");
  std::vector<double> v(2 * k);
  for (std::size_t a = 0; a < k; ++a) {
    v[2 * a] = eps / static_cast<double>(k);
    v[2 * a + 1] = (1.0 - eps) / static_cast<double>(k);
  }
  return DesireDistribution(JointTable::normalized(Table(bernoulli_observation_space(k), std::move(v))));
}

/// Both objectives optimized over mixture policies by simplex search.
inline MatchingReport bernoulli_bandit_policies(std::span<const double> theta, const DesireDistribution& desire,
                                                double resolution = 1e-3) {
  const MatchingBandit b{std::vector<double>(theta.begin(), theta.end())};
  b.validate();
  if (!(desire.space() == bernoulli_observation_space(theta.size())))
    throw SpaceError("desire must live on (arm, reward)");
  auto div = simplex_search(
      [&](std::span<const double> pi) {
        try {
          return divergence_objective(bernoulli_outcomes(theta, pi), desire);
        } catch (const SupportError&) {
          return std::numeric_limits<double>::infinity();
        }
      },
      theta.size(), resolution);
  auto ev = simplex_search(
      [&](std::span<const double> pi) { return -evidence_objective(bernoulli_outcomes(theta, pi), desire); },
      theta.size(), resolution);
  return make_matching_report(div.policy, ev.policy, b.phi_bar());
}

inline bool is_vertex(const PolicySimplex& pi) {
  return std::count_if(pi.weights().begin(), pi.weights().end(), [](double v) { return v > 0.0; }) == 1;
}

inline bool is_interior(const PolicySimplex& pi) {
  return std::all_of(pi.weights().begin(), pi.weights().end(), [](double v) { return v > 0.0; });
}

// ---------------------------------------------------------------------------
// Two-step latent-context environment
//
// Latent z in {A, B}, uniform. Step 1 either checks (signal s = z with
// probability alpha) or skips (s is a fair coin, independent of z). Step 2
// opens a door by a rule that may read s. Observation = (s, r) with
// r = 1 iff the door matches z.

struct TwoStepEnv {
  double alpha = 1.0;

  void validate() const {
    if (!(alpha >= 0.5 && alpha <= 1.0)) throw DistributionError("check accuracy alpha must lie in [0.5, 1]");
  }
};

enum class DoorRule { door_a, door_b, follow, oppose };

inline std::string_view to_string(DoorRule d) {
  switch (d) {
    case DoorRule::door_a: return "door_a";
    case DoorRule::door_b: return "door_b";
    case DoorRule::follow: return "follow";
    case DoorRule::oppose: return "oppose";
  }
  return "door_a";
}

struct TwoStepPlan {
  bool check = false;
  DoorRule door = DoorRule::door_a;

  std::string name() const { return std::string(check ? "check" : "skip") + "-" + std::string(to_string(door)); }
  /// The door does not depend on anything learned at step 1.
  bool blind() const { return !check || door == DoorRule::door_a || door == DoorRule::door_b; }
};

/// check x {door_a, door_b, follow, oppose} and skip x {door_a, door_b}.
/// A skip plan that reads the coin-flip signal is a randomized blind plan.
inline std::vector<TwoStepPlan> twostep_plans() {
  return {{true, DoorRule::door_a}, {true, DoorRule::door_b}, {true, DoorRule::follow},
          {true, DoorRule::oppose}, {false, DoorRule::door_a}, {false, DoorRule::door_b}};
}

inline VariableSpace twostep_space() { return VariableSpace{{"z", 2}, {"s", 2}, {"r", 2}}; }
inline VariableSpace twostep_observation_space() { return VariableSpace{{"s", 2}, {"r", 2}}; }

/// Joint p(z, s, r) under a plan.
inline JointTable twostep_joint(const TwoStepEnv& env, const TwoStepPlan& plan) {
  env.validate();
  std::vector<double> v(8, 0.0);
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t s = 0; s < 2; ++s) {
      const double ps = plan.check ? (s == z ? env.alpha : 1.0 - env.alpha) : 0.5;
      std::size_t door = 0;
      switch (plan.door) {
        case DoorRule::door_a: door = 0; break;
        case DoorRule::door_b: door = 1; break;
        case DoorRule::follow: door = s; break;
        case DoorRule::oppose: door = 1 - s; break;
      }
      const std::size_t r = door == z ? 1 : 0;
      v[z * 4 + s * 2 + r] += 0.5 * ps;
    }
  return JointTable(twostep_space(), std::move(v));
}

/// desire(s, r) = desire(r) / 2: indifferent to the signal.
inline DesireDistribution twostep_desire(double p_reward) {
  if (!(p_reward >= 0.0 && p_reward <= 1.0)) throw DistributionError("desire(r = 1) must lie in [0, 1]");
  return DesireDistribution(JointTable(twostep_observation_space(),
                                       {0.5 * (1.0 - p_reward), 0.5 * p_reward, 0.5 * (1.0 - p_reward), 0.5 * p_reward}));
}

struct PlanScore {
  TwoStepPlan plan;
  double evidence = 0.0;
  double divergence = 0.0;
  double desire_divergence = 0.0;       // E_z KL[p(s, r | z) || desire]
  double information_gain = 0.0;        // I(z; s, r)
  double check_information_gain = 0.0;  // I(z; s)
  RelationReport split;
};

struct TwoStepReport {
  double alpha = 1.0;
  std::vector<PlanScore> plans;
  std::size_t best_divergence_plan = 0;
  std::size_t best_evidence_plan = 0;
  /// best blind divergence minus best informed (non-blind) divergence.
  double check_margin = 0.0;
  bool check_selected = false;
};

inline TwoStepReport twostep_plan_scores(const TwoStepEnv& env, const DesireDistribution& desire,
                                         double tolerance = kDefaultIdentityTolerance) {
  if (!(desire.space() == twostep_observation_space())) throw SpaceError("two-step desire must live on (s, r)");
  TwoStepReport rep;
  rep.alpha = env.alpha;
  const Names latent{"z"};
  for (const auto& plan : twostep_plans()) {
    const JointTable j = twostep_joint(env, plan);
    const JointTable po = marginalize(j, {"s", "r"});
    PlanScore ps;
    ps.plan = plan;
    ps.evidence = evidence_objective(po, desire);
    ps.divergence = std::isfinite(ps.evidence) ? divergence_objective(po, desire) : std::numeric_limits<double>::infinity();
    if (std::isfinite(ps.divergence)) {
      ps.split = divergence_latent_decomposition(j, latent, desire, tolerance);
      ps.desire_divergence = ps.split.term("Desire Divergence");
      ps.information_gain = ps.split.term("Information Gain");
    } else {
      ps.desire_divergence = std::numeric_limits<double>::infinity();
      ps.information_gain = mutual_information(j, {"z"}, {"s", "r"});
    }
    ps.check_information_gain = mutual_information(j, {"z"}, {"s"});
    rep.plans.push_back(std::move(ps));
  }
  double best_blind = std::numeric_limits<double>::infinity(), best_informed = best_blind;
  for (std::size_t i = 0; i < rep.plans.size(); ++i) {
    const auto& p = rep.plans[i];
    if (p.divergence < rep.plans[rep.best_divergence_plan].divergence) rep.best_divergence_plan = i;
    if (p.evidence > rep.plans[rep.best_evidence_plan].evidence) rep.best_evidence_plan = i;
    (p.plan.blind() ? best_blind : best_informed) = std::min(p.plan.blind() ? best_blind : best_informed, p.divergence);
  }
  rep.check_margin = best_blind - best_informed;
  rep.check_selected = !rep.plans[rep.best_divergence_plan].plan.blind() && rep.check_margin > 0.0;
  return rep;
}

}  // namespace objlab
