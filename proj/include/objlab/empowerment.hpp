#pragma once

// Past/future split of a trajectory divergence into future divergence,
// generalized empowerment, latent filtering information, and past
// divergence, plus classic empowerment I(X_f; A_f | X_p, A_p).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "objlab/probcore.hpp"
#include "objlab/report.hpp"

namespace objlab {

namespace seqvar {
inline const std::string o_past = "o_past";
inline const std::string x_past = "x_past";
inline const std::string a_past = "a_past";
inline const std::string x_future = "x_future";
inline const std::string a_future = "a_future";
inline const std::string o_future = "o_future";
}  // namespace seqvar

/// p(o_f | x_f) p(x_f, a_f | x_p, a_p) p(x_p, a_p | o_p) p(o_p) over six
/// single variables with the fixed names in `seqvar`.
class SequenceModel {
 public:
  SequenceModel(JointTable p_o_past, CondTable p_past_given_o, CondTable p_future_given_past, CondTable p_o_given_future)
      : o_past_(std::move(p_o_past)),
        past_(std::move(p_past_given_o)),
        future_(std::move(p_future_given_past)),
        obs_(std::move(p_o_given_future)) {
    using namespace seqvar;
    expect(o_past_.space(), {o_past}, "p(o_past)");
    expect(past_.given(), {o_past}, "p(x_past, a_past | o_past) given");
    expect(past_.target(), {x_past, a_past}, "p(x_past, a_past | o_past) target");
    expect(future_.given(), {x_past, a_past}, "p(x_future, a_future | x_past, a_past) given");
    expect(future_.target(), {x_future, a_future}, "p(x_future, a_future | x_past, a_past) target");
    expect(obs_.given(), {x_future}, "p(o_future | x_future) given");
    expect(obs_.target(), {o_future}, "p(o_future | x_future) target");
    for (const CondTable* c : {&past_, &future_, &obs_})
      for (std::size_t g = 0; g < c->rows(); ++g)
        if (!c->defined(g)) throw DistributionError("sequence factors must have every row defined");
    const JointTable j = build_joint({o_past_, past_, future_, obs_});
    const Names order{o_past, x_past, a_past, x_future, a_future, o_future};
    joint_ = JointTable(j.table().reordered(order));
  }

  /// Joint over (o_past, x_past, a_past, x_future, a_future, o_future).
  const JointTable& joint() const noexcept { return joint_; }
  const JointTable& past_observation() const noexcept { return o_past_; }
  const CondTable& past_factor() const noexcept { return past_; }
  const CondTable& future_factor() const noexcept { return future_; }
  const CondTable& observation_factor() const noexcept { return obs_; }

  bool delta_past() const {
    for (double v : o_past_.probs())
      if (v > 0.0 && v < 1.0) return false;
    return true;
  }

 private:
  static void expect(const VariableSpace& s, std::initializer_list<std::string> names, const char* what) {
    if (s.names() != Names(names)) throw SpaceError(std::string(what) + " has unexpected variables");
  }

  JointTable o_past_;
  CondTable past_, future_, obs_;
  JointTable joint_;
};

/// Factored desire p̃(o_past) p̃(o_future).
struct SequenceDesire {
  JointTable desire_past;
  JointTable desire_future;
};

/// I(X_future; A_future | X_past, A_past).
inline double empowerment_mi(const SequenceModel& seq) {
  using namespace seqvar;
  return mutual_information(seq.joint(), {x_future}, {a_future}, {x_past, a_past});
}

namespace detail {

inline void check_sequence_desire(const SequenceModel& seq, const SequenceDesire& d) {
  if (!(d.desire_past.space() == seq.past_observation().space()))
    throw SpaceError("desire_past must live on o_past");
  if (!(d.desire_future.space() == seq.observation_factor().target()))
    throw SpaceError("desire_future must live on o_future");
}

/// E_joint[ln p(t | g1) - ln p(t | g2)].
inline double expected_log_ratio(const JointTable& joint, std::initializer_list<std::string> target,
                                 std::initializer_list<std::string> g1, std::initializer_list<std::string> g2) {
  const auto c1 = cellwise_conditional(joint, target, g1);
  const auto c2 = cellwise_conditional(joint, target, g2);
  double s = 0.0;
  for (std::size_t k = 0; k < joint.size(); ++k)
    if (joint[k] > 0.0) s += joint[k] * std::log(c1[k] / c2[k]);
  return s;
}

}  // namespace detail

/// Four-term split of KL[p(o_p, o_f) || p̃(o_p) p̃(o_f)], every expectation
/// taken under the full joint. The signed sum exceeds the true divergence by
/// exactly I(x_f, a_f; o_p | o_f), which vanishes when p(o_past) is a delta.
inline RelationReport sequence_divergence_decomposition(const SequenceModel& seq, const SequenceDesire& desire,
                                                        double tolerance = kDefaultIdentityTolerance) {
  using namespace seqvar;
  detail::check_sequence_desire(seq, desire);
  const JointTable& p = seq.joint();

  const JointTable px_f = marginalize(p, {x_future});
  const CondTable desire_rows = CondTable::from_rows(
      seq.observation_factor().given(), seq.observation_factor().target(),
      std::vector<std::vector<double>>(px_f.size(),
                                       std::vector<double>(desire.desire_future.probs().begin(),
                                                           desire.desire_future.probs().end())));
  const double future = expected_kl(px_f.probs(), seq.observation_factor(), desire_rows);
  const double emp = detail::expected_log_ratio(p, {x_future, a_future}, {o_future}, {x_past, a_past});
  const double filter =
      detail::expected_log_ratio(p, {x_past, a_past}, {o_past, x_future, a_future}, {o_past});
  const double past = kl(seq.past_observation(), desire.desire_past);

  const JointTable po = marginalize(p, {o_past, o_future});
  std::vector<double> target(po.size());
  const std::size_t nf = desire.desire_future.size();
  for (std::size_t k = 0; k < po.size(); ++k) target[k] = desire.desire_past[k / nf] * desire.desire_future[k % nf];
  const double truth = kl(po.probs(), target);
  const double cmi = mutual_information(p, {x_future, a_future}, {o_past}, {o_future});

  const double sum = future - emp - filter + past;
  const double excess = sum - truth;
  const bool delta = seq.delta_past();
  const bool pass = std::abs(excess - cmi) < tolerance && excess >= -kBoundSlack &&
                    (!delta || std::abs(excess) < tolerance);
  return ReportBuilder("empowerment.sequence_divergence_decomposition", RelationKind::bound)
      .lhs("Sequence Divergence", truth)
      .plus("Future Divergence", future)
      .minus("Generalized Empowerment", emp)
      .minus("Latent Filtering Information", filter)
      .plus("Past Divergence", past)
      .info("Past Future Information", cmi)
      .slack(excess)
      .flag("delta_past", delta)
      .finish_with(pass);
}

/// With p(o_past) = δ(ô), the past divergence is -ln p̃(ô): a constant no
/// choice of future actions can change.
inline RelationReport past_divergence_delta_check(const SequenceModel& seq, const SequenceDesire& desire,
                                                  double tolerance = kDefaultIdentityTolerance) {
  detail::check_sequence_desire(seq, desire);
  if (!seq.delta_past()) throw DistributionError("past_divergence_delta_check requires a delta past observation");
  const auto& po = seq.past_observation().probs();
  const std::size_t ohat = static_cast<std::size_t>(std::find(po.begin(), po.end(), 1.0) - po.begin());
  if (desire.desire_past[ohat] <= 0.0) throw SupportError("desire assigns zero mass to the observed past");
  const double past = kl(seq.past_observation(), desire.desire_past);
  bool uniform = true;
  for (double v : desire.desire_past.probs()) uniform = uniform && std::abs(v - desire.desire_past[0]) <= kNormTolerance;
  return ReportBuilder("empowerment.past_divergence_delta_check", RelationKind::identity)
      .lhs("Past Divergence", past)
      .plus("Negative Log Desire", -std::log(desire.desire_past[ohat]))
      .flag("uniform_desire", uniform)
      .flag("action_independent", true)
      .finish(tolerance);
}

}  // namespace objlab
