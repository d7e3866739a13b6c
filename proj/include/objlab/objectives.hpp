#pragma once

// Evidence and Divergence objectives over a finite generative model and a
// desire distribution, with their exact entropy / information-gain
// decompositions and the KL-control special case.
//
// Sign conventions: H[p] = -sum p ln p >= 0 throughout, so
//   Evidence   = E_p[ln desire]        = -KL[p || desire] - H[p]
//   Divergence = KL[p || desire]       = -H[p] - Evidence
// Stochastic policies act through the mixture p(o) = sum_a pi(a) p(o | a).

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "objlab/probcore.hpp"
#include "objlab/report.hpp"

namespace objlab {

/// Distribution over a model's finite action set.
class PolicySimplex {
 public:
  PolicySimplex() = default;
  explicit PolicySimplex(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw DistributionError("policy must cover at least one action");
    double s = 0.0;
    for (double v : w_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw DistributionError("policy weights must be finite and nonnegative");
      s += v;
    }
    if (std::abs(s - 1.0) > kNormTolerance) throw DistributionError("policy weights sum to " + std::to_string(s));
  }

  static PolicySimplex uniform(std::size_t n) { return PolicySimplex(std::vector<double>(n, 1.0 / static_cast<double>(n))); }
  static PolicySimplex delta(std::size_t n, std::size_t a) {
    std::vector<double> w(n, 0.0);
    w.at(a) = 1.0;
    return PolicySimplex(std::move(w));
  }

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t a) const { return w_[a]; }
  std::span<const double> weights() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

/// Total-variation distance between two policies on the same action set.
inline double total_variation(const PolicySimplex& a, const PolicySimplex& b) {
  if (a.size() != b.size()) throw SpaceError("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

/// Which exponent sign maps rewards to desire. `reward_seeking` (exp(+beta r))
/// makes the highest reward the most desired outcome; `negated` uses
/// exp(-beta r) literally.
enum class BoltzmannSign { reward_seeking, negated };

/// Exogenous target distribution over observations.
class DesireDistribution {
 public:
  DesireDistribution() = default;
  explicit DesireDistribution(JointTable probs) : probs_(std::move(probs)) {}

  const JointTable& probs() const noexcept { return probs_; }
  const VariableSpace& space() const noexcept { return probs_.space(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double log_prob(std::size_t i) const {
    return probs_[i] > 0.0 ? std::log(probs_[i]) : -std::numeric_limits<double>::infinity();
  }

  const std::optional<std::vector<double>>& rewards() const noexcept { return rewards_; }
  double beta() const noexcept { return beta_; }
  /// ln Z of the Boltzmann map (0 when not built from rewards).
  double log_normalizer() const noexcept { return log_z_; }

 private:
  friend DesireDistribution desire_from_reward(VariableSpace, std::span<const double>, double, BoltzmannSign);

  JointTable probs_;
  std::optional<std::vector<double>> rewards_;
  double beta_ = 1.0;
  double log_z_ = 0.0;
};

/// desire(o) = exp(s * beta * r(o)) / Z with s = +1 (reward_seeking) or -1.
inline DesireDistribution desire_from_reward(VariableSpace space, std::span<const double> rewards, double beta,
                                             BoltzmannSign sign = BoltzmannSign::reward_seeking) {
  if (rewards.size() != space.size()) throw SpaceError("desire_from_reward: one reward per outcome required");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("desire_from_reward: beta must be finite and > 0");
  const double s = sign == BoltzmannSign::reward_seeking ? 1.0 : -1.0;
  std::vector<double> logits(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (!std::isfinite(rewards[i])) throw Error("desire_from_reward: non-finite reward at outcome " + std::to_string(i));
    logits[i] = s * beta * rewards[i];
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - top);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - top) / z;
  DesireDistribution d(JointTable(std::move(space), std::move(p)));
  d.rewards_ = std::vector<double>(rewards.begin(), rewards.end());
  d.beta_ = beta;
  d.log_z_ = top + std::log(z);
  return d;
}

/// Factored model: p(x | a) (prior over latents per action) and p(o | x)
/// (likelihood, independent of the action given the latent).
class GenerativeModel {
 public:
  GenerativeModel() = default;
  GenerativeModel(CondTable prior, CondTable likelihood) : prior_(std::move(prior)), likelihood_(std::move(likelihood)) {
    if (!(likelihood_.given() == prior_.target()))
      throw SpaceError("likelihood must be conditioned on exactly the latent space of the prior");
    for (const auto& v : likelihood_.target().variables())
      if (prior_.given().contains(v.name) || prior_.target().contains(v.name))
        throw SpaceError("observation variable '" + v.name + "' clashes with an action or latent name");
    for (std::size_t a = 0; a < prior_.rows(); ++a)
      if (!prior_.defined(a)) throw DistributionError("latent prior undefined for action " + std::to_string(a));
    for (std::size_t x = 0; x < likelihood_.rows(); ++x)
      if (!likelihood_.defined(x)) throw DistributionError("likelihood undefined for latent " + std::to_string(x));
  }

  std::size_t num_actions() const noexcept { return prior_.rows(); }
  const VariableSpace& action_space() const noexcept { return prior_.given(); }
  const VariableSpace& state_space() const noexcept { return prior_.target(); }
  const VariableSpace& observation_space() const noexcept { return likelihood_.target(); }
  const CondTable& prior() const noexcept { return prior_; }
  const CondTable& likelihood() const noexcept { return likelihood_; }

  /// p(x | a)
  JointTable state_prior(std::size_t a) const { return prior_.row_distribution(check(a)); }

  /// p(x, o | a) over state_space ⊕ observation_space.
  JointTable joint(std::size_t a) const { return build_joint({state_prior(a), likelihood_}); }

  /// p(o | a)
  JointTable observation_marginal(std::size_t a) const {
    const auto px = prior_.row(check(a));
    const std::size_t no = observation_space().size();
    std::vector<double> po(no, 0.0);
    for (std::size_t x = 0; x < px.size(); ++x)
      for (std::size_t o = 0; o < no; ++o) po[o] += px[x] * likelihood_(x, o);
    return JointTable::normalized(Table(observation_space(), std::move(po)));
  }

  /// Policy mixture sum_a pi(a) p(o | a).
  JointTable observation_marginal(const PolicySimplex& pi) const {
    if (pi.size() != num_actions()) throw SpaceError("policy size does not match the action set");
    std::vector<double> po(observation_space().size(), 0.0);
    for (std::size_t a = 0; a < pi.size(); ++a) {
      if (pi[a] <= 0.0) continue;
      const JointTable pa = observation_marginal(a);
      for (std::size_t o = 0; o < po.size(); ++o) po[o] += pi[a] * pa[o];
    }
    return JointTable::normalized(Table(observation_space(), std::move(po)));
  }

  /// p(x | o, a); rows for unreachable o are undefined.
  CondTable posterior(std::size_t a) const {
    return condition(joint(a), state_space().names(), observation_space().names());
  }

 private:
  std::size_t check(std::size_t a) const {
    if (a >= num_actions()) throw SpaceError("action index " + std::to_string(a) + " out of range");
    return a;
  }

  CondTable prior_;
  CondTable likelihood_;
};

namespace detail {

inline void require_same_space(const JointTable& p, const DesireDistribution& d) {
  if (!(p.space() == d.space())) throw SpaceError("desire distribution lives on a different observation space");
}

/// E_p[ln desire]; -inf when p puts mass where desire is zero.
inline double expected_log_desire(const JointTable& p, const DesireDistribution& desire) {
  require_same_space(p, desire);
  double e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (desire[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    e += p[i] * std::log(desire[i]);
  }
  return e;
}

}  // namespace detail

/// E_{p(o)}[ln desire(o)] for an explicit predicted distribution.
inline double evidence_objective(const JointTable& predicted, const DesireDistribution& desire) {
  return detail::expected_log_desire(predicted, desire);
}

inline double evidence_objective(const GenerativeModel& model, const DesireDistribution& desire, std::size_t action) {
  return evidence_objective(model.observation_marginal(action), desire);
}

inline double evidence_objective(const GenerativeModel& model, const DesireDistribution& desire, const PolicySimplex& pi) {
  return evidence_objective(model.observation_marginal(pi), desire);
}

/// KL[p(o) || desire(o)]; throws SupportError on absolute-continuity failure.
inline double divergence_objective(const JointTable& predicted, const DesireDistribution& desire) {
  detail::require_same_space(predicted, desire);
  return kl(predicted, desire.probs());
}

inline double divergence_objective(const GenerativeModel& model, const DesireDistribution& desire, std::size_t action) {
  return divergence_objective(model.observation_marginal(action), desire);
}

inline double divergence_objective(const GenerativeModel& model, const DesireDistribution& desire,
                                   const PolicySimplex& pi) {
  return divergence_objective(model.observation_marginal(pi), desire);
}

/// Action maximizing the Evidence objective (lowest index on ties).
inline std::size_t best_evidence_action(const GenerativeModel& model, const DesireDistribution& desire) {
  std::size_t best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < model.num_actions(); ++a) {
    const double v = evidence_objective(model, desire, a);
    if (a == 0 || v > best_v) {
      best = a;
      best_v = v;
    }
  }
  return best;
}

/// Action minimizing the Divergence objective (lowest index on ties).
inline std::size_t best_divergence_action(const GenerativeModel& model, const DesireDistribution& desire) {
  std::size_t best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < model.num_actions(); ++a) {
    const double v = divergence_objective(model, desire, a);
    if (v < best_v) {
      best = a;
      best_v = v;
    }
  }
  return best;
}

/// Evidence = -Divergence - Expected Future Entropy.
inline RelationReport evidence_as_divergence(const JointTable& predicted, const DesireDistribution& desire,
                                             double tolerance = kDefaultIdentityTolerance) {
  return ReportBuilder("objectives.evidence_as_divergence", RelationKind::identity)
      .lhs("Evidence", evidence_objective(predicted, desire))
      .minus("Divergence", divergence_objective(predicted, desire))
      .minus("Expected Future Entropy", entropy(predicted))
      .finish(tolerance);
}

inline RelationReport evidence_as_divergence(const GenerativeModel& model, const DesireDistribution& desire,
                                             std::size_t action, double tolerance = kDefaultIdentityTolerance) {
  return evidence_as_divergence(model.observation_marginal(action), desire, tolerance);
}

/// Divergence = -Expected Future Entropy - Evidence.
inline RelationReport divergence_as_evidence(const JointTable& predicted, const DesireDistribution& desire,
                                             double tolerance = kDefaultIdentityTolerance) {
  return ReportBuilder("objectives.divergence_as_evidence", RelationKind::identity)
      .lhs("Divergence", divergence_objective(predicted, desire))
      .minus("Expected Future Entropy", entropy(predicted))
      .minus("Evidence Objective", evidence_objective(predicted, desire))
      .finish(tolerance);
}

inline RelationReport divergence_as_evidence(const GenerativeModel& model, const DesireDistribution& desire,
                                             std::size_t action, double tolerance = kDefaultIdentityTolerance) {
  return divergence_as_evidence(model.observation_marginal(action), desire, tolerance);
}

/// KL[p(o) || desire] = E_{p(x)} KL[p(o|x) || desire] - E_{p(o)} KL[p(x|o) || p(x)]
/// for an arbitrary joint over latent ⊕ observation variables. The
/// observation variables are those of the desire space.
inline RelationReport divergence_latent_decomposition(const JointTable& joint, std::span<const std::string> latent,
                                                      const DesireDistribution& desire,
                                                      double tolerance = kDefaultIdentityTolerance) {
  const Names obs = desire.space().names();
  const JointTable po = marginalize(joint, obs);
  const JointTable px = marginalize(joint, latent);
  const CondTable lik = condition(joint, obs, latent);

  double desire_div = 0.0;
  for (std::size_t x = 0; x < lik.rows(); ++x)
    if (lik.defined(x)) desire_div += px[x] * kl(lik.row(x), desire.probs().probs());

  return ReportBuilder("objectives.divergence_latent_decomposition", RelationKind::identity)
      .lhs("Divergence", divergence_objective(po, desire))
      .plus("Desire Divergence", desire_div)
      .minus("Information Gain", expected_info_gain(joint, latent, obs))
      .finish(tolerance);
}

inline RelationReport divergence_latent_decomposition(const GenerativeModel& model, const DesireDistribution& desire,
                                                      std::size_t action, double tolerance = kDefaultIdentityTolerance) {
  detail::require_same_space(model.observation_marginal(action), desire);
  const Names latent = model.state_space().names();
  return divergence_latent_decomposition(model.joint(action), latent, desire, tolerance);
}

/// H[p(o)] = E_{p(x)} H[p(o|x)] + E_{p(o)} KL[p(x|o) || p(x)].
inline RelationReport entropy_latent_identity(const JointTable& joint, std::span<const std::string> latent,
                                              std::span<const std::string> obs,
                                              double tolerance = kDefaultIdentityTolerance) {
  return ReportBuilder("objectives.entropy_latent_identity", RelationKind::identity)
      .lhs("Marginal Entropy", entropy(marginalize(joint, obs)))
      .plus("Likelihood Entropy", conditional_entropy(joint, obs, latent))
      .plus("Expected Information Gain", expected_info_gain(joint, latent, obs))
      .finish(tolerance);
}

inline RelationReport entropy_latent_identity(const GenerativeModel& model, std::size_t action,
                                              double tolerance = kDefaultIdentityTolerance) {
  const Names latent = model.state_space().names();
  const Names obs = model.observation_space().names();
  return entropy_latent_identity(model.joint(action), latent, obs, tolerance);
}

/// The fully observed model o := x: identity likelihood over the state space.
inline GenerativeModel fully_observed_model(const CondTable& state_model, const std::string& observation_name = "obs") {
  const VariableSpace& xs = state_model.target();
  std::vector<Variable> ov;
  for (const auto& v : xs.variables()) ov.push_back({observation_name + "." + v.name, v.cardinality});
  const VariableSpace os(ov);
  std::vector<double> eye(xs.size() * xs.size(), 0.0);
  for (std::size_t i = 0; i < xs.size(); ++i) eye[i * xs.size() + i] = 1.0;
  return GenerativeModel(state_model, CondTable(xs, os, std::move(eye)));
}

/// KL[p(x | a) || desire(x)] for fully observed state. Evaluated through
/// divergence_objective on the relabeled model with identity likelihood.
inline double kl_control_objective(const CondTable& state_model, const DesireDistribution& desire_x, std::size_t action) {
  if (!(state_model.target() == desire_x.space())) throw SpaceError("kl_control_objective: desire must live on the state space");
  const GenerativeModel relabeled = fully_observed_model(state_model);
  const DesireDistribution on_obs(
      JointTable(relabeled.observation_space(),
                 std::vector<double>(desire_x.probs().probs().begin(), desire_x.probs().probs().end())));
  return divergence_objective(relabeled, on_obs, action);
}

/// KL control as the fully observed case: the relabeled divergence objective
/// against the direct KL[p(x | a) || desire(x)].
inline RelationReport kl_control(const CondTable& state_model, const DesireDistribution& desire_x, std::size_t action,
                                 double tolerance = kDefaultIdentityTolerance) {
  return ReportBuilder("objectives.kl_control", RelationKind::identity)
      .lhs("KL Control", kl_control_objective(state_model, desire_x, action))
      .plus("State Divergence", kl(state_model.row_distribution(action), desire_x.probs()))
      .finish(tolerance);
}

/// Expected posterior-to-prior KL against enumerated mutual information.
inline RelationReport info_gain_equals_mi(const JointTable& joint, std::span<const std::string> latent,
                                          std::span<const std::string> obs,
                                          double tolerance = kDefaultIdentityTolerance) {
  return ReportBuilder("probcore.info_gain_equals_mi", RelationKind::identity)
      .lhs("Information Gain", expected_info_gain(joint, latent, obs))
      .plus("Mutual Information", mutual_information(joint, latent, obs))
      .finish(tolerance);
}

}  // namespace objlab
