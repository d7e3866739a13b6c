#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "objlab/objectives.hpp"
#include "objlab/sampling.hpp"

using namespace objlab;

namespace {

const VariableSpace kA{{"a", 2}};
const VariableSpace kX{{"x", 2}};
const VariableSpace kO{{"o", 2}};

// Deterministic bandit: action a yields observation a with certainty.
GenerativeModel identity_bandit(std::size_t k) {
  const VariableSpace a{{"a", k}}, x{{"x", k}}, o{{"o", k}};
  std::vector<double> eye(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = 1.0;
  return GenerativeModel(CondTable(a, x, eye), CondTable(x, o, eye));
}

double oracle_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

}  // namespace

TEST(DesireFromReward, EqualRewardsGiveUniform) {
  const std::vector<double> r{0.0, 0.0};
  const auto d = desire_from_reward(kO, r, 1.0);
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], 0.5);
}

TEST(DesireFromReward, Softmax) {
  const std::vector<double> r{std::log(9.0), 0.0};
  const auto d = desire_from_reward(kO, r, 1.0);
  EXPECT_NEAR(d[0], 0.9, 1e-15);
  EXPECT_NEAR(d[1], 0.1, 1e-15);
  EXPECT_NEAR(d.log_normalizer(), std::log(10.0), 1e-15);
}

TEST(DesireFromReward, ZeroTemperatureLimit) {
  const std::vector<double> r{1.0, 0.0};
  double prev = 0.0;
  for (double beta : {1.0, 5.0, 10.0, 20.0}) {
    const auto d = desire_from_reward(kO, r, beta);
    EXPECT_GT(d[0], prev);
    prev = d[0];
  }
  EXPECT_NEAR(prev, 1.0, 1e-8);
}

TEST(DesireFromReward, NegatedSignAndErrors) {
  const std::vector<double> r{1.0, 0.0};
  EXPECT_LT(desire_from_reward(kO, r, 1.0, BoltzmannSign::negated)[0], 0.5);
  EXPECT_GT(desire_from_reward(kO, r, 1.0)[0], 0.5);
  const std::vector<double> bad{NAN, 0.0};
  EXPECT_THROW(desire_from_reward(kO, bad, 1.0), Error);
  EXPECT_THROW(desire_from_reward(kO, r, 0.0), Error);
  EXPECT_THROW(desire_from_reward(kO, r, -1.0), Error);
}

TEST(PolicySimplex, Validation) {
  EXPECT_THROW(PolicySimplex({0.5, 0.6}), DistributionError);
  EXPECT_THROW(PolicySimplex(std::vector<double>{}), DistributionError);
  EXPECT_DOUBLE_EQ(total_variation(PolicySimplex::delta(2, 0), PolicySimplex::delta(2, 1)), 1.0);
}

TEST(EvidenceObjective, Examples) {
  const GenerativeModel uni(CondTable::from_rows(kA, kX, {{0.5, 0.5}, {0.5, 0.5}}),
                            CondTable::from_rows(kX, kO, {{1, 0}, {0, 1}}));
  const DesireDistribution flat(JointTable::uniform(kO));
  EXPECT_NEAR(evidence_objective(uni, flat, 0), -std::log(2.0), 1e-15);

  const GenerativeModel bandit = identity_bandit(2);
  const DesireDistribution d(JointTable(kO, {0.9, 0.1}));
  EXPECT_NEAR(evidence_objective(bandit, d, 1), std::log(0.1), 1e-15);
  EXPECT_NEAR(evidence_objective(bandit, d, PolicySimplex::delta(2, 0)), std::log(0.9), 1e-15);
  EXPECT_NEAR(evidence_objective(bandit, d, 0), -0.1054, 1e-4);
}

TEST(EvidenceObjective, ZeroDesireGivesNegativeInfinity) {
  const DesireDistribution d(JointTable::delta(kO, 0));
  const double e = evidence_objective(identity_bandit(2), d, 1);
  EXPECT_TRUE(std::isinf(e) && e < 0);
  EXPECT_EQ(best_evidence_action(identity_bandit(2), d), 0u);
}

TEST(EvidenceObjective, SpaceMismatchThrows) {
  const DesireDistribution d(JointTable::uniform(VariableSpace{{"o", 3}}));
  EXPECT_THROW(evidence_objective(identity_bandit(2), d, 0), SpaceError);
}

TEST(DivergenceObjective, Examples) {
  const GenerativeModel bandit = identity_bandit(3);
  const VariableSpace o3{{"o", 3}};
  const DesireDistribution flat(JointTable::uniform(o3));
  EXPECT_NEAR(divergence_objective(bandit, flat, 2), std::log(3.0), 1e-15);
  EXPECT_NEAR(divergence_objective(bandit, flat, PolicySimplex::uniform(3)), 0.0, 1e-15);

  const DesireDistribution d(JointTable(kO, {0.9, 0.1}));
  EXPECT_NEAR(divergence_objective(identity_bandit(2), d, PolicySimplex({0.9, 0.1})), 0.0, 1e-15);
  EXPECT_THROW(divergence_objective(identity_bandit(2), DesireDistribution(JointTable::delta(kO, 0)), 1), SupportError);
}

TEST(DivergenceObjective, PolicyUsesMixtureOfPredictions) {
  Rng rng = trial_rng(3, stream_id("mixture"), 0);
  const GenerativeModel m = random_model(rng);
  const DesireDistribution d = random_desire(rng, m.observation_space());
  const PolicySimplex pi = random_policy(rng, m.num_actions());
  std::vector<double> mix(m.observation_space().size(), 0.0);
  for (std::size_t a = 0; a < m.num_actions(); ++a) {
    const JointTable pa = m.observation_marginal(a);
    for (std::size_t o = 0; o < mix.size(); ++o) mix[o] += pi[a] * pa[o];
  }
  std::vector<double> dv(d.probs().probs().begin(), d.probs().probs().end());
  EXPECT_NEAR(divergence_objective(m, d, pi), oracle_kl(mix, dv), 1e-13);
}

TEST(DivergenceObjective, DesireMatchingPolicyIsUniqueGridMinimum) {
  const DesireDistribution d(JointTable(kO, {0.7, 0.3}));
  const GenerativeModel bandit = identity_bandit(2);
  double best = 1e300;
  double best_w = -1;
  for (int i = 0; i <= 1000; ++i) {
    const double w = i / 1000.0;
    const double v = divergence_objective(bandit, d, PolicySimplex({w, 1 - w}));
    if (v < best) {
      best = v;
      best_w = w;
    }
  }
  EXPECT_NEAR(best_w, 0.7, 1e-12);
  EXPECT_NEAR(best, 0.0, 1e-15);
}

TEST(EvidenceAsDivergence, Examples) {
  const DesireDistribution d(JointTable(kO, {0.4, 0.6}));
  auto r = evidence_as_divergence(d.probs(), d);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.term("Divergence"), 0.0, 1e-15);
  EXPECT_NEAR(r.lhs, -entropy(d.probs()), 1e-15);

  r = evidence_as_divergence(JointTable::delta(kO, 1), d);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.lhs, std::log(0.6), 1e-15);
  EXPECT_DOUBLE_EQ(r.term("Expected Future Entropy"), 0.0);
}

TEST(DivergenceAsEvidence, Examples) {
  const DesireDistribution d(JointTable(kO, {0.4, 0.6}));
  auto r = divergence_as_evidence(d.probs(), d);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.lhs, 0.0, 1e-15);
  r = divergence_as_evidence(JointTable::delta(kO, 0), d);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.lhs, -std::log(0.4), 1e-15);
}

TEST(DivergenceLatentDecomposition, DeterministicLikelihood) {
  const GenerativeModel m(CondTable::from_rows(kA, kX, {{0.5, 0.5}, {1, 0}}), CondTable::from_rows(kX, kO, {{1, 0}, {0, 1}}));
  const DesireDistribution flat(JointTable::uniform(kO));
  const auto r = divergence_latent_decomposition(m, flat, 0);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.lhs, 0.0, 1e-15);
  EXPECT_NEAR(r.term("Information Gain"), std::log(2.0), 1e-15);
  EXPECT_NEAR(r.term("Desire Divergence"), std::log(2.0), 1e-15);
}

TEST(DivergenceLatentDecomposition, IndependentLatentHasNoInformationGain) {
  const GenerativeModel m(CondTable::from_rows(kA, kX, {{0.3, 0.7}, {0.6, 0.4}}),
                          CondTable::from_rows(kX, kO, {{0.2, 0.8}, {0.2, 0.8}}));
  const DesireDistribution d(JointTable(kO, {0.5, 0.5}));
  const auto r = divergence_latent_decomposition(m, d, 1);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.term("Information Gain"), 0.0, 1e-15);
  EXPECT_NEAR(r.lhs, oracle_kl({0.2, 0.8}, {0.5, 0.5}), 1e-15);
}

TEST(EntropyLatentIdentity, Examples) {
  const GenerativeModel det(CondTable::from_rows(kA, kX, {{0.3, 0.7}, {0.5, 0.5}}),
                            CondTable::from_rows(kX, kO, {{1, 0}, {0, 1}}));
  auto r = entropy_latent_identity(det, 0);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.lhs, r.term("Expected Information Gain"), 1e-15);

  const GenerativeModel ind(CondTable::from_rows(kA, kX, {{0.3, 0.7}, {0.5, 0.5}}),
                            CondTable::from_rows(kX, kO, {{0.2, 0.8}, {0.2, 0.8}}));
  r = entropy_latent_identity(ind, 0);
  EXPECT_TRUE(r.pass);
  EXPECT_NEAR(r.lhs, r.term("Likelihood Entropy"), 1e-15);
}

TEST(KlControl, Examples) {
  const CondTable sm = CondTable::from_rows(kA, kX, {{0.25, 0.75}, {1, 0}});
  const DesireDistribution d(JointTable(kX, {0.25, 0.75}));
  EXPECT_NEAR(kl_control_objective(sm, d, 0), 0.0, 1e-15);
  EXPECT_NEAR(kl_control_objective(sm, DesireDistribution(JointTable::uniform(kX)), 1), std::log(2.0), 1e-15);
  EXPECT_TRUE(kl_control(sm, d, 1).pass);
}

TEST(ObjectiveProperties, RandomModelsSatisfyDecompositions) {
  for (std::uint64_t t = 0; t < 1000; ++t) {
    Rng rng = trial_rng(5, stream_id("objectives-props"), t);
    const GenerativeModel m = random_model(rng, {2, 4});
    const DesireDistribution d = random_desire(rng, m.observation_space());
    const DesireDistribution dx = random_desire(rng, m.state_space());
    const std::size_t a = uniform_size(rng, 0, m.num_actions() - 1);
    SCOPED_TRACE(t);
    for (const auto& r : {evidence_as_divergence(m, d, a), divergence_as_evidence(m, d, a),
                          divergence_latent_decomposition(m, d, a), entropy_latent_identity(m, a), kl_control(m.prior(), dx, a)}) {
      EXPECT_TRUE(r.pass) << r.relation_id;
      EXPECT_LT(r.residual, 1e-10) << r.relation_id;
    }
    // Independent evaluation of the Evidence / Divergence pair.
    const JointTable po = m.observation_marginal(a);
    std::vector<double> p(po.probs().begin(), po.probs().end()), q(d.probs().probs().begin(), d.probs().probs().end());
    double ev = 0.0;
    for (std::size_t o = 0; o < p.size(); ++o) ev += p[o] * std::log(q[o]);
    EXPECT_NEAR(evidence_objective(m, d, a), ev, 1e-13);
    EXPECT_NEAR(divergence_objective(m, d, a), oracle_kl(p, q), 1e-13);
  }
}

TEST(ObjectiveProperties, PeakedDesireMakesRankingsAgree) {
  // With desire proportional to exp(beta r), Divergence(a) = -H[p_a] - beta E_a[r] + const,
  // so beta > ln|O| / gap forces the expected-reward maximizer, which is also Evidence's pick.
  std::size_t tested = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    Rng rng = trial_rng(9, stream_id("peaked"), t);
    const GenerativeModel m = random_model(rng, {2, 5});
    const std::size_t no = m.observation_space().size();
    std::vector<double> r(no);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : r) v = u(rng);
    std::vector<double> er(m.num_actions(), 0.0);
    for (std::size_t a = 0; a < er.size(); ++a) {
      const JointTable pa = m.observation_marginal(a);
      for (std::size_t o = 0; o < no; ++o) er[a] += pa[o] * r[o];
    }
    const std::size_t star = static_cast<std::size_t>(std::max_element(er.begin(), er.end()) - er.begin());
    double gap = 1e300;
    for (std::size_t a = 0; a < er.size(); ++a)
      if (a != star) gap = std::min(gap, er[star] - er[a]);
    const double threshold = std::log(static_cast<double>(no)) / gap;
    const double range = *std::max_element(r.begin(), r.end()) - *std::min_element(r.begin(), r.end());
    if (4 * threshold * range > 600) continue;  // desire would underflow
    ++tested;
    for (double beta : {1.01 * threshold, 2 * threshold, 4 * threshold}) {
      const auto d = desire_from_reward(m.observation_space(), r, beta);
      EXPECT_EQ(best_evidence_action(m, d), star) << t;
      EXPECT_EQ(best_divergence_action(m, d), star) << t << " beta " << beta;
    }
  }
  EXPECT_GE(tested, 150u);
}
