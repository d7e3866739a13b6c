#pragma once

// Seeded random models for the randomized identity sweeps. Every trial gets
// its own generator derived from (seed, stream, trial), so results do not
// depend on execution order or thread count.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "objlab/empowerment.hpp"
#include "objlab/objectives.hpp"
#include "objlab/probcore.hpp"

namespace objlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

/// Independent generator for one (seed, stream, trial) triple.
inline Rng trial_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t trial) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ trial));
}

/// Stream id from a relation name (FNV-1a), stable across platforms.
inline std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// One draw from the flat Dirichlet on n cells.
inline std::vector<double> flat_dirichlet(Rng& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) {
    v = e(rng);
    s += v;
  }
  for (double& v : w) v /= s;
  return w;
}

inline JointTable random_joint(Rng& rng, const VariableSpace& space) {
  JointTable t = JointTable::normalized(Table(space, flat_dirichlet(rng, space.size())));
  return t;
}

inline CondTable random_cond(Rng& rng, const VariableSpace& given, const VariableSpace& target) {
  std::vector<double> v;
  v.reserve(given.size() * target.size());
  for (std::size_t g = 0; g < given.size(); ++g) {
    const auto row = flat_dirichlet(rng, target.size());
    v.insert(v.end(), row.begin(), row.end());
  }
  return CondTable(given, target, std::move(v));
}

inline std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

struct CardinalityRange {
  std::size_t lo = 2;
  std::size_t hi = 5;
};

/// Random p(x|a), p(o|x) with |A|, |X|, |O| drawn from `range`.
inline GenerativeModel random_model(Rng& rng, CardinalityRange range = {}) {
  const VariableSpace as{{"a", uniform_size(rng, range.lo, range.hi)}};
  const VariableSpace xs{{"x", uniform_size(rng, range.lo, range.hi)}};
  const VariableSpace os{{"o", uniform_size(rng, range.lo, range.hi)}};
  CondTable prior = random_cond(rng, as, xs);
  CondTable lik = random_cond(rng, xs, os);
  return GenerativeModel(std::move(prior), std::move(lik));
}

inline DesireDistribution random_desire(Rng& rng, const VariableSpace& space) {
  return DesireDistribution(random_joint(rng, space));
}

inline PolicySimplex random_policy(Rng& rng, std::size_t n) { return PolicySimplex(flat_dirichlet(rng, n)); }

/// Random six-variable sequence model with cardinalities in [lo, hi]. With
/// `delta_past` the past observation is a point mass on a random value.
inline SequenceModel random_sequence_model(Rng& rng, bool delta_past, CardinalityRange range = {2, 3}) {
  using namespace seqvar;
  auto card = [&] { return uniform_size(rng, range.lo, range.hi); };
  const VariableSpace op{{o_past, card()}};
  const VariableSpace past{{x_past, card()}, {a_past, card()}};
  const VariableSpace future{{x_future, card()}, {a_future, card()}};
  const VariableSpace xf = future.subspace(std::vector<std::string>{x_future});
  const VariableSpace of{{o_future, card()}};
  JointTable p_op = delta_past ? JointTable::delta(op, uniform_size(rng, 0, op.size() - 1)) : random_joint(rng, op);
  CondTable p_past = random_cond(rng, op, past);
  CondTable p_future = random_cond(rng, past, future);
  CondTable p_obs = random_cond(rng, xf, of);
  return SequenceModel(std::move(p_op), std::move(p_past), std::move(p_future), std::move(p_obs));
}

inline SequenceDesire random_sequence_desire(Rng& rng, const SequenceModel& seq) {
  return SequenceDesire{random_joint(rng, seq.past_observation().space()),
                        random_joint(rng, seq.observation_factor().target())};
}

}  // namespace objlab
