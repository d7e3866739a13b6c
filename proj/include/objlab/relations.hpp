#pragma once

// Relations between the Evidence/Divergence objectives and established
// control objectives: control-as-inference (ELBO over actions), expected
// free energy, and action-perception divergence minimization (APDM).
//
// Factor conventions (fixed here, used by every function below):
//   q(o, x)       = p(o | x) q(x)
//   desire(o, x)  = desire(o) p(x | o)      p(x | o) the model's exact posterior
//   A(o, x)       = q(x | o) p_data(o)
//   T(o, x)       = p(o, x) desire(o)       (unnormalized target)
// All identities are exact under these conventions and are asserted to a
// residual tolerance; inequalities are reported with an explicit slack.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "objlab/objectives.hpp"
#include "objlab/probcore.hpp"
#include "objlab/report.hpp"

namespace objlab {

/// Variational beliefs over latents: a marginal q(x) and optionally an
/// explicit amortized posterior q(x | o).
struct VariationalBelief {
  JointTable q_x;
  std::optional<CondTable> q_x_given_o;

  /// q(x | o): the explicit table if present, otherwise the posterior of
  /// p(o | x) q(x).
  CondTable posterior(const GenerativeModel& model) const {
    if (!(q_x.space() == model.state_space())) throw SpaceError("belief q(x) lives on a different latent space");
    if (q_x_given_o) {
      if (!(q_x_given_o->given() == model.observation_space()) || !(q_x_given_o->target() == model.state_space()))
        throw SpaceError("belief q(x|o) must be conditioned on the observation space");
      return *q_x_given_o;
    }
    const JointTable qxo = build_joint({q_x, model.likelihood()});
    return condition(qxo, model.state_space().names(), model.observation_space().names());
  }
};

namespace detail {

inline double safe_log(double v) { return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity(); }

/// Flat arrays for one action: p(x|a), p(o|x), p(o|a), p(x|o,a).
struct ActionView {
  std::size_t nx = 0, no = 0;
  std::vector<double> px, lik, po, post;
  std::vector<bool> post_defined;

  ActionView(const GenerativeModel& model, std::size_t a)
      : nx(model.state_space().size()), no(model.observation_space().size()) {
    const JointTable prior = model.state_prior(a);
    px.assign(prior.probs().begin(), prior.probs().end());
    lik.assign(model.likelihood().values().begin(), model.likelihood().values().end());
    po.assign(no, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t o = 0; o < no; ++o) po[o] += px[x] * lik[x * no + o];
    post.assign(no * nx, 0.0);
    post_defined.assign(no, false);
    for (std::size_t o = 0; o < no; ++o) {
      if (po[o] <= 0.0) continue;
      post_defined[o] = true;
      for (std::size_t x = 0; x < nx; ++x) post[o * nx + x] = px[x] * lik[x * no + o] / po[o];
    }
  }

  double joint(std::size_t x, std::size_t o) const { return px[x] * lik[x * no + o]; }
};

/// q(x) and q(x|o) as flat arrays, q(x|o) laid out [o * nx + x].
struct BeliefView {
  std::vector<double> qx, qpost;
  std::vector<bool> defined;

  BeliefView(const VariationalBelief& q, const GenerativeModel& model) {
    qx.assign(q.q_x.probs().begin(), q.q_x.probs().end());
    const CondTable c = q.posterior(model);
    qpost.assign(c.values().begin(), c.values().end());
    defined.resize(c.rows());
    for (std::size_t o = 0; o < c.rows(); ++o) defined[o] = c.defined(o);
  }
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw SupportError(what);
}

inline std::vector<double> to_vector(const JointTable& t) { return {t.probs().begin(), t.probs().end()}; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Control as inference over actions

/// sum_a q(a) Evidence(a) - KL[q || prior].
inline double elbo(const PolicySimplex& q, const PolicySimplex& prior, const GenerativeModel& model,
                   const DesireDistribution& desire) {
  if (q.size() != model.num_actions() || prior.size() != model.num_actions())
    throw SpaceError("elbo: policy sizes must match the action set");
  double reward = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (q[a] <= 0.0) continue;
    const double ev = evidence_objective(model, desire, a);
    if (!std::isfinite(ev)) return -std::numeric_limits<double>::infinity();
    reward += q[a] * ev;
  }
  return reward - kl(q.weights(), prior.weights());
}

/// ln sum_a prior(a) exp(Evidence(a)).
inline double log_evidence(const PolicySimplex& prior, const GenerativeModel& model, const DesireDistribution& desire) {
  if (prior.size() != model.num_actions()) throw SpaceError("log_evidence: prior size must match the action set");
  std::vector<double> terms;
  for (std::size_t a = 0; a < prior.size(); ++a) {
    if (prior[a] <= 0.0) continue;
    const double ev = evidence_objective(model, desire, a);
    if (std::isfinite(ev)) terms.push_back(std::log(prior[a]) + ev);
  }
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

/// Exact Boltzmann posterior over actions: prior(a) exp(Evidence(a)) / Z.
inline PolicySimplex action_posterior(const PolicySimplex& prior, const GenerativeModel& model,
                                      const DesireDistribution& desire) {
  const double lz = log_evidence(prior, model, desire);
  if (!std::isfinite(lz)) throw SupportError("action_posterior: every action has zero desire likelihood");
  std::vector<double> w(prior.size(), 0.0);
  for (std::size_t a = 0; a < prior.size(); ++a) {
    if (prior[a] <= 0.0) continue;
    const double ev = evidence_objective(model, desire, a);
    if (std::isfinite(ev)) w[a] = std::exp(std::log(prior[a]) + ev - lz);
  }
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= s;
  return PolicySimplex(std::move(w));
}

/// E_q[E_{p(o|a)} ln desire(o)] + H[q] with desire = Boltzmann(rewards).
/// Equals elbo under a uniform action prior plus ln |A|.
inline double cai_objective(const PolicySimplex& q, const GenerativeModel& model, std::span<const double> rewards,
                            double beta = 1.0, BoltzmannSign sign = BoltzmannSign::reward_seeking) {
  const DesireDistribution desire = desire_from_reward(model.observation_space(), rewards, beta, sign);
  double reward = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a)
    if (q[a] > 0.0) reward += q[a] * evidence_objective(model, desire, a);
  return reward + entropy(q.weights());
}

/// ln evidence = ELBO(q) + KL[q || exact action posterior]; slack = ln evidence - ELBO.
inline RelationReport cai_evidence_bound(const GenerativeModel& model, const DesireDistribution& desire,
                                         const PolicySimplex& q, const std::optional<PolicySimplex>& prior = std::nullopt,
                                         double tolerance = kDefaultIdentityTolerance) {
  const PolicySimplex p = prior.value_or(PolicySimplex::uniform(model.num_actions()));
  const double lz = log_evidence(p, model, desire);
  const double bound = elbo(q, p, model, desire);
  const double post_kl = kl(q.weights(), action_posterior(p, model, desire).weights());
  const double slack = lz - bound;
  return ReportBuilder("relations.cai_evidence_bound", RelationKind::bound)
      .lhs("Log Evidence", lz)
      .plus("ELBO", bound)
      .plus("Posterior Divergence", post_kl)
      .slack(slack)
      .flag("equality", std::abs(slack) <= kBoundSlack)
      .flag("single_action", model.num_actions() == 1)
      .finish(tolerance);
}

// ---------------------------------------------------------------------------
// Expected free energy

/// G = E_{q(o,x)}[ln q(x) - ln desire(o) - ln p(x|o)].
inline double efe(const VariationalBelief& q, const GenerativeModel& model, const DesireDistribution& desire,
                  std::size_t action) {
  detail::require_same_space(model.observation_marginal(action), desire);
  const detail::ActionView m(model, action);
  const auto qx = detail::to_vector(q.q_x);
  if (qx.size() != m.nx) throw SpaceError("efe: belief has the wrong latent size");
  double g = 0.0;
  for (std::size_t x = 0; x < m.nx; ++x)
    for (std::size_t o = 0; o < m.no; ++o) {
      const double w = qx[x] * m.lik[x * m.no + o];
      if (w <= 0.0) continue;
      detail::require(desire[o] > 0.0, "efe: predicted observation has zero desire");
      detail::require(m.post_defined[o] && m.post[o * m.nx + x] > 0.0, "efe: q(o,x) > 0 where the model posterior is 0");
      g += w * (std::log(qx[x]) - std::log(desire[o]) - std::log(m.post[o * m.nx + x]));
    }
  return g;
}

namespace detail {

/// Terms of the epistemic split under q(o,x) = p(o|x) q(x).
struct EfeEpistemicTerms {
  double efe, extrinsic, info_gain, posterior_divergence;
};

inline EfeEpistemicTerms efe_epistemic_terms(const VariationalBelief& q, const GenerativeModel& model,
                                             const DesireDistribution& desire, std::size_t action) {
  const ActionView m(model, action);
  const auto qx = to_vector(q.q_x);
  std::vector<double> qo(m.no, 0.0);
  for (std::size_t x = 0; x < m.nx; ++x)
    for (std::size_t o = 0; o < m.no; ++o) qo[o] += qx[x] * m.lik[x * m.no + o];

  EfeEpistemicTerms t{efe(q, model, desire, action), 0.0, 0.0, 0.0};
  for (std::size_t o = 0; o < m.no; ++o) {
    if (qo[o] <= 0.0) continue;
    t.extrinsic += qo[o] * std::log(desire[o]);
    std::vector<double> qpost(m.nx);
    for (std::size_t x = 0; x < m.nx; ++x) qpost[x] = qx[x] * m.lik[x * m.no + o] / qo[o];
    t.info_gain += qo[o] * kl(qpost, qx);
    t.posterior_divergence +=
        qo[o] * kl(qpost, std::span<const double>(m.post).subspan(o * m.nx, m.nx));
  }
  return t;
}

}  // namespace detail

/// G = -Extrinsic Value - Information Gain + Posterior Divergence.
inline RelationReport efe_epistemic_decomposition(const VariationalBelief& q, const GenerativeModel& model,
                                                  const DesireDistribution& desire, std::size_t action,
                                                  double tolerance = kDefaultIdentityTolerance) {
  const auto t = detail::efe_epistemic_terms(q, model, desire, action);
  return ReportBuilder("relations.efe_epistemic_decomposition", RelationKind::identity)
      .lhs("EFE", t.efe)
      .minus("Extrinsic Value", t.extrinsic)
      .minus("Information Gain", t.info_gain)
      .plus("Posterior Divergence", t.posterior_divergence)
      .finish(tolerance);
}

/// G = Ambiguity + Risk + Likelihood Divergence, with desire(x) and
/// desire(o|x) the marginal and conditional of desire(o) p(x|o).
inline RelationReport efe_risk_ambiguity(const VariationalBelief& q, const GenerativeModel& model,
                                         const DesireDistribution& desire, std::size_t action,
                                         double tolerance = kDefaultIdentityTolerance) {
  const detail::ActionView m(model, action);
  const auto qx = detail::to_vector(q.q_x);
  // desire(o, x) laid out [x * no + o]
  std::vector<double> dox(m.nx * m.no, 0.0), dx(m.nx, 0.0);
  for (std::size_t o = 0; o < m.no; ++o) {
    if (!m.post_defined[o]) continue;
    for (std::size_t x = 0; x < m.nx; ++x) {
      dox[x * m.no + o] = desire[o] * m.post[o * m.nx + x];
      dx[x] += dox[x * m.no + o];
    }
  }
  double ambiguity = 0.0, likelihood_div = 0.0;
  for (std::size_t x = 0; x < m.nx; ++x) {
    if (qx[x] <= 0.0) continue;
    detail::require(dx[x] > 0.0, "efe_risk_ambiguity: q(x) > 0 where desire(x) = 0");
    const auto lik = std::span<const double>(m.lik).subspan(x * m.no, m.no);
    std::vector<double> dcond(m.no);
    for (std::size_t o = 0; o < m.no; ++o) dcond[o] = dox[x * m.no + o] / dx[x];
    ambiguity += qx[x] * entropy(lik);
    likelihood_div += qx[x] * kl(lik, dcond);
  }
  return ReportBuilder("relations.efe_risk_ambiguity", RelationKind::identity)
      .lhs("EFE", efe(q, model, desire, action))
      .plus("Ambiguity", ambiguity)
      .plus("Risk", kl(qx, dx))
      .plus("Likelihood Divergence", likelihood_div)
      .finish(tolerance);
}

/// Evidence_q = -G - Information Gain + Posterior Divergence, hence
/// -G >= Evidence_q exactly when Information Gain >= Posterior Divergence.
inline RelationReport efe_evidence_relation(const VariationalBelief& q, const GenerativeModel& model,
                                            const DesireDistribution& desire, std::size_t action,
                                            double tolerance = kDefaultIdentityTolerance) {
  const auto t = detail::efe_epistemic_terms(q, model, desire, action);
  const bool ig_ge_pd = t.info_gain >= t.posterior_divergence - kBoundSlack;
  const bool bound_holds = -t.efe >= t.extrinsic - kBoundSlack;
  RelationReport r = ReportBuilder("relations.efe_evidence_relation", RelationKind::identity)
                         .lhs("Evidence Objective", t.extrinsic)
                         .minus("EFE", t.efe)
                         .minus("Information Gain", t.info_gain)
                         .plus("Posterior Divergence", t.posterior_divergence)
                         .flag("ig_ge_postdiv", ig_ge_pd)
                         .flag("bound_holds", bound_holds)
                         .finish(tolerance);
  r.pass = r.pass && ig_ge_pd == bound_holds;
  return r;
}

namespace detail {

struct MarginalEfeTerms {
  double divergence, efe_hat, info_gain, marginal_entropy, vfe;
};

/// Terms evaluated under the data marginal p(o|a) and the belief posterior.
inline MarginalEfeTerms marginal_efe_terms(const VariationalBelief& q, const GenerativeModel& model,
                                           const DesireDistribution& desire, std::size_t action) {
  const ActionView m(model, action);
  const BeliefView b(q, model);
  const JointTable po = model.observation_marginal(action);
  MarginalEfeTerms t{divergence_objective(po, desire), 0.0, 0.0, entropy(po), 0.0};
  for (std::size_t o = 0; o < m.no; ++o) {
    if (m.po[o] <= 0.0) continue;
    require(b.defined[o], "q(x|o) undefined for an observation with p(o) > 0");
    const auto qpost = std::span<const double>(b.qpost).subspan(o * m.nx, m.nx);
    for (std::size_t x = 0; x < m.nx; ++x) {
      const double w = m.po[o] * qpost[x];
      if (w <= 0.0) continue;
      require(b.qx[x] > 0.0, "q(x|o) > 0 where q(x) = 0");
      require(m.joint(x, o) > 0.0, "q(x|o) > 0 where the model joint is 0");
      t.efe_hat += w * (std::log(b.qx[x]) - std::log(desire[o]) - std::log(qpost[x]));
      t.vfe += w * (std::log(qpost[x]) - std::log(m.joint(x, o)));
    }
    t.info_gain += m.po[o] * kl(qpost, b.qx);
  }
  return t;
}

}  // namespace detail

/// KL[p(o) || desire] = EFE + Information Gain - Marginal Entropy, all
/// expectations under p(o|a) q(x|o). The EFE term upper-bounds the
/// divergence exactly when Information Gain <= Marginal Entropy.
inline RelationReport efe_divergence_identity(const VariationalBelief& q, const GenerativeModel& model,
                                              const DesireDistribution& desire, std::size_t action,
                                              double tolerance = kDefaultIdentityTolerance) {
  const auto t = detail::marginal_efe_terms(q, model, desire, action);
  const bool upper = t.efe_hat >= t.divergence - kBoundSlack;
  const bool ig_le_h = t.info_gain <= t.marginal_entropy + kBoundSlack;
  RelationReport r = ReportBuilder("relations.efe_divergence_identity", RelationKind::identity)
                         .lhs("Divergence Objective", t.divergence)
                         .plus("EFE", t.efe_hat)
                         .plus("Information Gain", t.info_gain)
                         .minus("Marginal Entropy", t.marginal_entropy)
                         .flag("efe_upper_bounds_divergence", upper)
                         .flag("info_gain_le_marginal_entropy", ig_le_h)
                         .flag("info_gain_ge_marginal_entropy", t.info_gain >= t.marginal_entropy - kBoundSlack)
                         .finish(tolerance);
  r.pass = r.pass && upper == ig_le_h;
  return r;
}

/// Report-only: Divergence vs EFE - VFE + Information Gain. Never fails.
inline RelationReport efe_divergence_bound_probe(const VariationalBelief& q, const GenerativeModel& model,
                                                 const DesireDistribution& desire, std::size_t action) {
  const auto t = detail::marginal_efe_terms(q, model, desire, action);
  const double rhs = t.efe_hat - t.vfe + t.info_gain;
  const double slack = t.divergence - rhs;
  return ReportBuilder("relations.efe_divergence_bound_probe", RelationKind::probe)
      .lhs("Divergence Objective", t.divergence)
      .plus("EFE", t.efe_hat)
      .minus("VFE", t.vfe)
      .plus("Information Gain", t.info_gain)
      .slack(slack)
      .flag("vfe_le_information_gain", t.vfe <= t.info_gain + kBoundSlack)
      .flag("bound_holds", slack >= -kBoundSlack)
      .finish();
}

// ---------------------------------------------------------------------------
// Action and perception as divergence minimization

namespace detail {

/// A(x, o) = q(x|o) p_data(o) as a joint over state ⊕ observation.
inline JointTable actual_joint(const BeliefView& b, const JointTable& data, std::size_t nx, std::size_t no,
                               const VariableSpace& space) {
  std::vector<double> a(nx * no, 0.0);
  for (std::size_t o = 0; o < no; ++o) {
    if (data[o] <= 0.0) continue;
    require(b.defined[o], "q(x|o) undefined for an observation with data mass");
    for (std::size_t x = 0; x < nx; ++x) a[x * no + o] = b.qpost[o * nx + x] * data[o];
  }
  return JointTable::normalized(Table(space, std::move(a)));
}

inline void require_data_marginal(const JointTable& data, const GenerativeModel& model) {
  if (!(data.space() == model.observation_space())) throw SpaceError("data marginal must live on the observation space");
}

}  // namespace detail

/// KL[q(x|o) p_data(o) || p(o,x) desire(o)] with an unnormalized target.
inline double apdm_objective(const VariationalBelief& q, const GenerativeModel& model, const DesireDistribution& desire,
                             const JointTable& data_marginal, std::size_t action) {
  detail::require_data_marginal(data_marginal, model);
  detail::require_same_space(data_marginal, desire);
  const detail::ActionView m(model, action);
  const detail::BeliefView b(q, model);
  const VariableSpace xo = model.state_space().concat(model.observation_space());
  const JointTable actual = detail::actual_joint(b, data_marginal, m.nx, m.no, xo);
  std::vector<double> target(m.nx * m.no);
  for (std::size_t x = 0; x < m.nx; ++x)
    for (std::size_t o = 0; o < m.no; ++o) target[x * m.no + o] = m.joint(x, o) * desire[o];
  return kl(actual, Table(xo, std::move(target)), KlOptions{.allow_unnormalized = true});
}

/// J_APDM = E_{p_data(o)} F(o) + KL[p_data(o) || desire(o)], with
/// F(o) = E_{q(x|o)}[ln q(x|o) - ln p(o,x)] >= -ln p(o).
inline RelationReport apdm_split(const VariationalBelief& q, const GenerativeModel& model, const DesireDistribution& desire,
                                 const JointTable& data_marginal, std::size_t action,
                                 double tolerance = kDefaultIdentityTolerance) {
  const double j = apdm_objective(q, model, desire, data_marginal, action);
  const detail::ActionView m(model, action);
  const detail::BeliefView b(q, model);
  double expected_f = 0.0;
  bool f_ge_surprise = true;
  for (std::size_t o = 0; o < m.no; ++o) {
    if (data_marginal[o] <= 0.0) continue;
    double f = 0.0;
    for (std::size_t x = 0; x < m.nx; ++x) {
      const double qv = b.qpost[o * m.nx + x];
      if (qv <= 0.0) continue;
      f += qv * (std::log(qv) - std::log(m.joint(x, o)));
    }
    expected_f += data_marginal[o] * f;
    f_ge_surprise = f_ge_surprise && f >= -std::log(m.po[o]) - kBoundSlack;
  }
  const double div = divergence_objective(data_marginal, desire);
  return ReportBuilder("relations.apdm_split", RelationKind::identity)
      .lhs("APDM Objective", j)
      .plus("Variational Free Energy", expected_f)
      .plus("Divergence Objective", div)
      .flag("vfe_ge_neg_log_evidence", f_ge_surprise)
      .flag("upper_bounds_divergence", j >= div - kBoundSlack)
      .finish(tolerance);
}

/// InfoBound = E_A[ln T(x|o) - ln A(x)] = Information Gain - Posterior Divergence,
/// so InfoBound <= Information Gain (slack = IG - InfoBound).
inline RelationReport apdm_info_bound(const VariationalBelief& q, const GenerativeModel& model,
                                      const CondTable& target_posterior, const JointTable& data_marginal,
                                      double tolerance = kDefaultIdentityTolerance) {
  detail::require_data_marginal(data_marginal, model);
  if (!(target_posterior.given() == model.observation_space()) || !(target_posterior.target() == model.state_space()))
    throw SpaceError("target posterior must be a table over x given o");
  const detail::BeliefView b(q, model);
  const std::size_t nx = model.state_space().size(), no = model.observation_space().size();
  const JointTable actual = detail::actual_joint(b, data_marginal, nx, no, model.state_space().concat(model.observation_space()));
  std::vector<double> ax(nx, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t o = 0; o < no; ++o) ax[x] += actual[x * no + o];

  double bound = 0.0, ig = 0.0, pd = 0.0;
  for (std::size_t o = 0; o < no; ++o) {
    if (data_marginal[o] <= 0.0) continue;
    detail::require(target_posterior.defined(o), "target posterior undefined for an observation with data mass");
    const auto qpost = std::span<const double>(b.qpost).subspan(o * nx, nx);
    for (std::size_t x = 0; x < nx; ++x) {
      const double w = actual[x * no + o];
      if (w <= 0.0) continue;
      detail::require(target_posterior(o, x) > 0.0, "A(x|o) > 0 where T(x|o) = 0");
      bound += w * (std::log(target_posterior(o, x)) - std::log(ax[x]));
    }
    ig += data_marginal[o] * kl(qpost, ax);
    pd += data_marginal[o] * kl(qpost, target_posterior.row(o));
  }
  return ReportBuilder("relations.apdm_info_bound", RelationKind::bound)
      .lhs("Information Bound", bound)
      .plus("Information Gain", ig)
      .minus("Posterior Divergence", pd)
      .slack(ig - bound)
      .flag("lower_bounds_information_gain", bound <= ig + kBoundSlack)
      .finish(tolerance);
}

/// KL[p(o,x) || t(o,x)] = KL[p(o) || t(o)] + E_{p(o)} KL[p(x|o) || t(x|o)].
/// `obs` names the observation variables; all others are latent.
inline RelationReport joint_vs_marginal_divergence(const JointTable& p_joint, const JointTable& target_joint,
                                                   std::span<const std::string> obs,
                                                   double tolerance = kDefaultIdentityTolerance) {
  if (!(p_joint.space() == target_joint.space())) throw SpaceError("joint_vs_marginal_divergence: space mismatch");
  Names latent;
  for (const auto& v : p_joint.space().variables())
    if (std::find(obs.begin(), obs.end(), v.name) == obs.end()) latent.push_back(v.name);
  const JointTable po = marginalize(p_joint, obs);
  const JointTable to = marginalize(target_joint, obs);
  const double joint_div = kl(p_joint, target_joint);
  const double marg_div = kl(po, to);
  const double post_div = expected_kl(po.probs(), condition(p_joint, latent, obs), condition(target_joint, latent, obs));
  return ReportBuilder("relations.joint_vs_marginal_divergence", RelationKind::bound)
      .lhs("Joint Divergence", joint_div)
      .plus("Divergence Objective", marg_div)
      .plus("Posterior Divergence", post_div)
      .slack(joint_div - marg_div)
      .finish(tolerance);
}

inline RelationReport joint_vs_marginal_divergence(const JointTable& p_joint, const JointTable& target_joint,
                                                   std::initializer_list<std::string> obs,
                                                   double tolerance = kDefaultIdentityTolerance) {
  Names o(obs);
  return joint_vs_marginal_divergence(p_joint, target_joint, std::span<const std::string>(o), tolerance);
}

/// E_{p_data(o)} ln sum_x desire(o) T(x|o) >= -J_APDM + D with
/// D = E_{p_data q}[ln T(x|o) - ln p(x|o)]. The slack equals
/// E KL[q(x|o) || T(x|o)] + KL[p_data || p(o|a)], both reported as terms.
inline RelationReport apdm_evidence_bound(const VariationalBelief& q, const GenerativeModel& model,
                                          const DesireDistribution& desire, const CondTable& target_posterior,
                                          const JointTable& data_marginal, std::size_t action,
                                          double tolerance = kDefaultIdentityTolerance) {
  const double j = apdm_objective(q, model, desire, data_marginal, action);
  const detail::ActionView m(model, action);
  const detail::BeliefView b(q, model);
  double evidence = 0.0, d = 0.0, q_to_target = 0.0, max_gap = 0.0;
  for (std::size_t o = 0; o < m.no; ++o) {
    if (data_marginal[o] <= 0.0) continue;
    detail::require(target_posterior.defined(o), "target posterior undefined for an observation with data mass");
    double marg = 0.0;
    for (std::size_t x = 0; x < m.nx; ++x) marg += desire[o] * target_posterior(o, x);
    detail::require(marg > 0.0, "apdm_evidence_bound: zero desire mass on an observed outcome");
    evidence += data_marginal[o] * std::log(marg);
    const auto qpost = std::span<const double>(b.qpost).subspan(o * m.nx, m.nx);
    for (std::size_t x = 0; x < m.nx; ++x) {
      max_gap = std::max(max_gap, std::abs(qpost[x] - target_posterior(o, x)));
      if (qpost[x] <= 0.0) continue;
      detail::require(target_posterior(o, x) > 0.0 && m.post[o * m.nx + x] > 0.0,
                      "apdm_evidence_bound: q(x|o) > 0 outside the posterior supports");
      d += data_marginal[o] * qpost[x] * (std::log(target_posterior(o, x)) - std::log(m.post[o * m.nx + x]));
    }
    q_to_target += data_marginal[o] * kl(qpost, target_posterior.row(o));
  }
  const double data_to_model = kl(data_marginal.probs(), std::span<const double>(m.po));
  const double slack = evidence + j - d;
  return ReportBuilder("relations.apdm_evidence_bound", RelationKind::bound)
      .lhs("Evidence Objective", evidence)
      .minus("APDM Objective", j)
      .plus("Posterior Divergence Bound", d)
      .plus("Desire Posterior Divergence", q_to_target)
      .plus("Data Model Divergence", data_to_model)
      .info("Gap To APDM Bound", evidence + j)
      .slack(slack)
      .flag("equality", std::abs(slack) <= kBoundSlack)
      .flag("q_matches_desire_posterior", max_gap <= kBoundSlack)
      .finish(tolerance);
}

/// KL[A || T] = E_{A(x)} KL[A(o|x) || T(o)] - E_A[ln T(x|o) - ln A(x)] for
/// a target factored as T(o) T(x|o). Observation variables are those of
/// `target_obs`.
inline RelationReport apdm_realize_preferences_split(const JointTable& actual, const Table& target_obs,
                                                     const CondTable& target_posterior,
                                                     double tolerance = kDefaultIdentityTolerance) {
  const Names obs = target_obs.space().names();
  const Names latent = target_posterior.target().names();
  if (!(target_posterior.given() == target_obs.space())) throw SpaceError("T(x|o) must be conditioned on T(o)'s space");
  Names xo = latent;
  xo.insert(xo.end(), obs.begin(), obs.end());
  const Table a_table = actual.table().reordered(xo);
  const JointTable a(a_table);
  const std::size_t nx = target_posterior.target().size(), no = target_obs.size();

  std::vector<double> t(nx * no, 0.0), ax(nx, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t o = 0; o < no; ++o) {
      t[x * no + o] = target_obs[o] * (target_posterior.defined(o) ? target_posterior(o, x) : 0.0);
      ax[x] += a[x * no + o];
    }
  const double joint_div = kl(a, Table(a.space(), t), KlOptions{.allow_unnormalized = true});

  double realize = 0.0, bound = 0.0;
  for (std::size_t x = 0; x < nx; ++x) {
    if (ax[x] <= 0.0) continue;
    std::vector<double> a_o_given_x(no);
    for (std::size_t o = 0; o < no; ++o) a_o_given_x[o] = a[x * no + o] / ax[x];
    realize += ax[x] * kl(a_o_given_x, target_obs.values());
    for (std::size_t o = 0; o < no; ++o) {
      const double w = a[x * no + o];
      if (w <= 0.0) continue;
      detail::require(target_posterior.defined(o) && target_posterior(o, x) > 0.0, "A(x,o) > 0 where T(x|o) = 0");
      bound += w * (std::log(target_posterior(o, x)) - std::log(ax[x]));
    }
  }
  return ReportBuilder("relations.apdm_realize_preferences_split", RelationKind::identity)
      .lhs("APDM Divergence", joint_div)
      .plus("Realizing Latent Preferences", realize)
      .minus("Information Bound", bound)
      .finish(tolerance);
}

/// Canonical form: A = q(x|o) p_data(o), T(o) = desire(o), T(x|o) = the
/// model's exact posterior p(x|o, a).
inline RelationReport apdm_realize_preferences_split(const VariationalBelief& q, const GenerativeModel& model,
                                                     const DesireDistribution& desire, const JointTable& data_marginal,
                                                     std::size_t action, double tolerance = kDefaultIdentityTolerance) {
  detail::require_data_marginal(data_marginal, model);
  detail::require_same_space(data_marginal, desire);
  const detail::BeliefView b(q, model);
  const std::size_t nx = model.state_space().size(), no = model.observation_space().size();
  const JointTable actual =
      detail::actual_joint(b, data_marginal, nx, no, model.state_space().concat(model.observation_space()));
  RelationReport r = apdm_realize_preferences_split(actual, desire.probs().table(), model.posterior(action), tolerance);
  r.condition_flags.emplace_back("target_obs_is_desire", true);
  r.condition_flags.emplace_back("target_posterior_is_model_posterior", true);
  return r;
}

}  // namespace objlab
