#pragma once

// Exact discrete probability engine: dense tables over named finite
// variables, joint assembly from factors, marginals, conditionals and the
// information-theoretic functionals (entropy, KL, mutual information).
//
// All logarithms are natural (nats). 0 ln 0 is taken as 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace objlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown, duplicated or mismatched variable names / spaces.
class SpaceError : public Error {
 public:
  using Error::Error;
};

/// Table would exceed VariableSpace::kMaxCells.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Negative, non-finite or unnormalized probabilities.
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// Factor list is not a valid (acyclic, single-target) factorization.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// Absolute-continuity violation: p > 0 where the reference measure is 0.
class SupportError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kNormTolerance = 1e-12;

using Names = std::vector<std::string>;

struct Variable {
  std::string name;
  std::size_t cardinality = 1;

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// Ordered list of named finite variables. Flat indices are row-major:
/// the last variable varies fastest.
class VariableSpace {
 public:
  static constexpr std::size_t kMaxCells = 10'000'000;

  VariableSpace() = default;
  VariableSpace(std::initializer_list<Variable> vars) : VariableSpace(std::vector<Variable>(vars)) {}
  explicit VariableSpace(std::vector<Variable> vars) : vars_(std::move(vars)) {
    size_ = 1;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i].name.empty()) throw SpaceError("variable name must not be empty");
      if (vars_[i].cardinality == 0)
        throw SpaceError("variable '" + vars_[i].name + "' has zero cardinality");
      for (std::size_t j = 0; j < i; ++j)
        if (vars_[j].name == vars_[i].name) throw SpaceError("duplicate variable '" + vars_[i].name + "'");
      if (size_ > kMaxCells / vars_[i].cardinality)
        throw SizeError("variable space exceeds " + std::to_string(kMaxCells) + " cells");
      size_ *= vars_[i].cardinality;
    }
  }

  const std::vector<Variable>& variables() const noexcept { return vars_; }
  std::size_t rank() const noexcept { return vars_.size(); }
  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return vars_.empty(); }

  bool contains(std::string_view name) const noexcept {
    return std::any_of(vars_.begin(), vars_.end(), [&](const Variable& v) { return v.name == name; });
  }

  std::size_t position(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (vars_[i].name == name) return i;
    throw SpaceError("unknown variable '" + std::string(name) + "'");
  }

  std::size_t cardinality(std::string_view name) const { return vars_[position(name)].cardinality; }

  Names names() const {
    Names out;
    out.reserve(vars_.size());
    for (const auto& v : vars_) out.push_back(v.name);
    return out;
  }

  /// The listed variables, in the listed order.
  VariableSpace subspace(std::span<const std::string> names) const {
    std::vector<Variable> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(vars_[position(n)]);
    return VariableSpace(std::move(out));
  }

  /// This space followed by `other`; names must be disjoint.
  VariableSpace concat(const VariableSpace& other) const {
    std::vector<Variable> out = vars_;
    out.insert(out.end(), other.vars_.begin(), other.vars_.end());
    return VariableSpace(std::move(out));
  }

  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(vars_.size(), 1);
    for (std::size_t i = vars_.size(); i-- > 1;) s[i - 1] = s[i] * vars_[i].cardinality;
    return s;
  }

  friend bool operator==(const VariableSpace& a, const VariableSpace& b) { return a.vars_ == b.vars_; }

 private:
  std::vector<Variable> vars_;
  std::size_t size_ = 1;
};

/// For every flat index of `from`, the flat index of the same assignment
/// restricted to `to`. Every variable of `to` must exist in `from`.
inline std::vector<std::size_t> project_indices(const VariableSpace& from, const VariableSpace& to) {
  // stride in `to` for each axis of `from` (0 when the axis is dropped)
  std::vector<std::size_t> to_stride_of(from.rank(), 0);
  const auto to_strides = to.strides();
  for (std::size_t j = 0; j < to.rank(); ++j) {
    const std::size_t p = from.position(to.variables()[j].name);
    if (from.variables()[p].cardinality != to.variables()[j].cardinality)
      throw SpaceError("cardinality mismatch for variable '" + to.variables()[j].name + "'");
    to_stride_of[p] = to_strides[j];
  }
  std::vector<std::size_t> out(from.size());
  std::vector<std::size_t> digit(from.rank(), 0);
  std::size_t target = 0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    out[i] = target;
    // odometer increment
    for (std::size_t ax = from.rank(); ax-- > 0;) {
      const std::size_t card = from.variables()[ax].cardinality;
      if (++digit[ax] < card) {
        target += to_stride_of[ax];
        break;
      }
      target -= to_stride_of[ax] * (card - 1);
      digit[ax] = 0;
    }
  }
  return out;
}

/// Nonnegative dense tensor over a VariableSpace; not necessarily normalized.
class Table {
 public:
  Table() : values_(1, 0.0) {}
  Table(VariableSpace space, std::vector<double> values) : space_(std::move(space)), values_(std::move(values)) {
    if (values_.size() != space_.size())
      throw SpaceError("table has " + std::to_string(values_.size()) + " values but space has " +
                       std::to_string(space_.size()) + " cells");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DistributionError("table entries must be finite and nonnegative");
  }

  const VariableSpace& space() const noexcept { return space_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

  /// Sum over every variable not in `keep`; result ordered as `keep`.
  Table sum_to(std::span<const std::string> keep) const {
    VariableSpace sub = space_.subspace(keep);
    std::vector<double> out(sub.size(), 0.0);
    const auto idx = project_indices(space_, sub);
    for (std::size_t i = 0; i < values_.size(); ++i) out[idx[i]] += values_[i];
    return Table(std::move(sub), std::move(out));
  }

  /// Same variables, reordered as `order`.
  Table reordered(std::span<const std::string> order) const {
    if (order.size() != space_.rank()) throw SpaceError("reorder must list every variable exactly once");
    return sum_to(order);
  }

 private:
  VariableSpace space_;
  std::vector<double> values_;
};

/// A normalized probability table. Construction validates nonnegativity and
/// sum-to-one within kNormTolerance.
class JointTable {
 public:
  JointTable() : table_(VariableSpace{}, {1.0}) {}
  JointTable(VariableSpace space, std::vector<double> probs) : table_(std::move(space), std::move(probs)) {
    const double s = table_.sum();
    if (std::abs(s - 1.0) > kNormTolerance)
      throw DistributionError("joint table sums to " + std::to_string(s) + ", expected 1");
  }
  explicit JointTable(Table t) : JointTable(t.space(), std::vector<double>(t.values().begin(), t.values().end())) {}

  /// Rescale a nonnegative table with positive mass to sum to one.
  static JointTable normalized(const Table& t) {
    const double s = t.sum();
    if (!(s > 0.0)) throw DistributionError("cannot normalize a table with zero mass");
    std::vector<double> v(t.values().begin(), t.values().end());
    for (double& x : v) x /= s;
    return JointTable(t.space(), std::move(v));
  }

  static JointTable uniform(VariableSpace space) {
    const std::size_t n = space.size();
    return JointTable(std::move(space), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static JointTable delta(VariableSpace space, std::size_t cell) {
    std::vector<double> v(space.size(), 0.0);
    v.at(cell) = 1.0;
    return JointTable(std::move(space), std::move(v));
  }

  const VariableSpace& space() const noexcept { return table_.space(); }
  std::span<const double> probs() const noexcept { return table_.values(); }
  std::size_t size() const noexcept { return table_.size(); }
  double operator[](std::size_t i) const { return table_[i]; }
  const Table& table() const noexcept { return table_; }

 private:
  Table table_;
};

/// Conditional distribution p(target | given) stored as one row per
/// configuration of `given`. Rows whose conditioning event has zero
/// probability are flagged undefined and hold zeros.
class CondTable {
 public:
  CondTable() = default;

  CondTable(VariableSpace given, VariableSpace target, std::vector<double> values, std::vector<bool> defined = {})
      : given_(std::move(given)), target_(std::move(target)), values_(std::move(values)), defined_(std::move(defined)) {
    for (const auto& v : target_.variables())
      if (given_.contains(v.name)) throw SpaceError("variable '" + v.name + "' is both target and given");
    (void)given_.concat(target_);  // size guard
    if (values_.size() != given_.size() * target_.size()) throw SpaceError("conditional table has wrong size");
    if (defined_.empty()) defined_.assign(given_.size(), true);
    if (defined_.size() != given_.size()) throw SpaceError("defined-row mask has wrong size");
    const std::size_t w = target_.size();
    for (std::size_t g = 0; g < given_.size(); ++g) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) {
        const double v = values_[g * w + t];
        if (!(v >= 0.0) || !std::isfinite(v)) throw DistributionError("conditional entries must be finite and nonnegative");
        s += v;
      }
      if (defined_[g] && std::abs(s - 1.0) > kNormTolerance)
        throw DistributionError("conditional row " + std::to_string(g) + " sums to " + std::to_string(s));
      if (!defined_[g] && s != 0.0) throw DistributionError("undefined conditional row must hold zeros");
    }
  }

  /// A marginal viewed as a conditional with an empty `given` set.
  static CondTable from_marginal(const JointTable& p) {
    return CondTable(VariableSpace{}, p.space(), std::vector<double>(p.probs().begin(), p.probs().end()));
  }

  /// Build from one distribution per `given` configuration.
  static CondTable from_rows(VariableSpace given, VariableSpace target, const std::vector<std::vector<double>>& rows) {
    if (rows.size() != given.size()) throw SpaceError("expected one row per given configuration");
    std::vector<double> v;
    v.reserve(given.size() * target.size());
    for (const auto& r : rows) {
      if (r.size() != target.size()) throw SpaceError("row length does not match target space");
      v.insert(v.end(), r.begin(), r.end());
    }
    return CondTable(std::move(given), std::move(target), std::move(v));
  }

  const VariableSpace& given() const noexcept { return given_; }
  const VariableSpace& target() const noexcept { return target_; }
  std::size_t rows() const noexcept { return given_.size(); }
  std::size_t width() const noexcept { return target_.size(); }
  bool defined(std::size_t g) const { return defined_.at(g); }
  std::span<const double> row(std::size_t g) const { return std::span<const double>(values_).subspan(g * width(), width()); }
  double operator()(std::size_t g, std::size_t t) const { return values_[g * width() + t]; }
  std::span<const double> values() const noexcept { return values_; }

  JointTable row_distribution(std::size_t g) const {
    if (!defined(g)) throw DistributionError("conditional row " + std::to_string(g) + " is undefined");
    auto r = row(g);
    return JointTable(target_, std::vector<double>(r.begin(), r.end()));
  }

  /// Values laid out over given ⊕ target.
  Table as_table() const { return Table(given_.concat(target_), values_); }

 private:
  VariableSpace given_;
  VariableSpace target_;
  std::vector<double> values_;
  std::vector<bool> defined_;
};

using Factor = std::variant<JointTable, CondTable>;

/// Product of factors. Every variable must be the target of exactly one
/// factor and the `given` sets must admit a topological order. The
/// resulting variable order follows that topological order.
inline JointTable build_joint(std::span<const Factor> factors) {
  std::vector<CondTable> conds;
  conds.reserve(factors.size());
  for (const auto& f : factors)
    conds.push_back(std::holds_alternative<JointTable>(f) ? CondTable::from_marginal(std::get<JointTable>(f))
                                                          : std::get<CondTable>(f));

  Names targeted;
  for (const auto& c : conds)
    for (const auto& v : c.target().variables()) {
      if (std::find(targeted.begin(), targeted.end(), v.name) != targeted.end())
        throw FactorizationError("variable '" + v.name + "' is the target of more than one factor");
      targeted.push_back(v.name);
    }
  for (const auto& c : conds)
    for (const auto& v : c.given().variables())
      if (std::find(targeted.begin(), targeted.end(), v.name) == targeted.end())
        throw FactorizationError("variable '" + v.name + "' is conditioned on but never targeted");

  // Kahn-style ordering: a factor is ready once all its given variables exist.
  std::vector<std::size_t> order;
  std::vector<bool> placed(conds.size(), false);
  std::vector<Variable> vars;
  auto find_var = [&](const std::string& n) {
    return std::find_if(vars.begin(), vars.end(), [&](const Variable& v) { return v.name == n; });
  };
  while (order.size() < conds.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < conds.size(); ++i) {
      if (placed[i]) continue;
      const auto& gv = conds[i].given().variables();
      if (!std::all_of(gv.begin(), gv.end(), [&](const Variable& v) { return find_var(v.name) != vars.end(); }))
        continue;
      for (const auto& v : gv)
        if (find_var(v.name)->cardinality != v.cardinality)
          throw FactorizationError("cardinality mismatch for variable '" + v.name + "'");
      for (const auto& v : conds[i].target().variables()) vars.push_back(v);
      placed[i] = true;
      order.push_back(i);
      progressed = true;
    }
    if (!progressed) throw FactorizationError("factorization is cyclic");
  }

  VariableSpace space(vars);
  std::vector<double> probs(space.size(), 1.0);
  for (std::size_t i : order) {
    const auto& c = conds[i];
    const auto gi = project_indices(space, c.given());
    const auto ti = project_indices(space, c.target());
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] *= c(gi[k], ti[k]);
  }
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (std::abs(total - 1.0) > kNormTolerance)
    throw DistributionError("factor product sums to " + std::to_string(total) +
                            " (an undefined conditional row is reached with positive probability)");
  return JointTable(std::move(space), std::move(probs));
}

inline JointTable build_joint(std::initializer_list<Factor> factors) {
  std::vector<Factor> v(factors);
  return build_joint(std::span<const Factor>(v));
}

/// Marginal over `keep`, in the order given.
inline JointTable marginalize(const JointTable& joint, std::span<const std::string> keep) {
  Table t = joint.table().sum_to(keep);
  return JointTable(t.space(), std::vector<double>(t.values().begin(), t.values().end()));
}

inline JointTable marginalize(const JointTable& joint, std::initializer_list<std::string> keep) {
  Names k(keep);
  return marginalize(joint, std::span<const std::string>(k));
}

/// p(target | given). Rows with zero conditioning mass are flagged undefined.
inline CondTable condition(const JointTable& joint, std::span<const std::string> target, std::span<const std::string> given) {
  for (const auto& t : target)
    if (std::find(given.begin(), given.end(), t) != given.end())
      throw SpaceError("variable '" + t + "' is both target and given");
  Names both(given.begin(), given.end());
  both.insert(both.end(), target.begin(), target.end());
  const Table gt = joint.table().sum_to(both);
  VariableSpace gs = joint.space().subspace(given);
  VariableSpace ts = joint.space().subspace(target);
  const std::size_t w = ts.size();
  std::vector<double> v(gt.values().begin(), gt.values().end());
  std::vector<bool> defined(gs.size(), true);
  for (std::size_t g = 0; g < gs.size(); ++g) {
    double s = 0.0;
    for (std::size_t t = 0; t < w; ++t) s += v[g * w + t];
    if (s > 0.0) {
      for (std::size_t t = 0; t < w; ++t) v[g * w + t] /= s;
    } else {
      defined[g] = false;
      for (std::size_t t = 0; t < w; ++t) v[g * w + t] = 0.0;
    }
  }
  return CondTable(std::move(gs), std::move(ts), std::move(v), std::move(defined));
}

inline CondTable condition(const JointTable& joint, std::initializer_list<std::string> target,
                           std::initializer_list<std::string> given) {
  Names t(target), g(given);
  return condition(joint, std::span<const std::string>(t), std::span<const std::string>(g));
}

/// p(target | given) evaluated at every cell of `joint` (flat order of the
/// joint). Cells of zero probability may hold 0.
inline std::vector<double> cellwise_conditional(const JointTable& joint, std::span<const std::string> target,
                                                std::span<const std::string> given) {
  const CondTable c = condition(joint, target, given);
  const auto gi = project_indices(joint.space(), c.given());
  const auto ti = project_indices(joint.space(), c.target());
  std::vector<double> out(joint.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = c(gi[k], ti[k]);
  return out;
}

inline std::vector<double> cellwise_conditional(const JointTable& joint, std::initializer_list<std::string> target,
                                                std::initializer_list<std::string> given) {
  Names t(target), g(given);
  return cellwise_conditional(joint, std::span<const std::string>(t), std::span<const std::string>(g));
}

/// Shannon entropy −Σ p ln p of a probability vector.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline double entropy(const JointTable& dist) { return entropy(dist.probs()); }

/// Σ p ln(p/q) over aligned vectors; p = 0 terms contribute 0.
inline double kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw SpaceError("kl: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw SupportError("kl: p > 0 where q = 0 at cell " + std::to_string(i));
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

struct KlOptions {
  /// Permit a reference table that does not sum to one.
  bool allow_unnormalized = false;
};

inline double kl(const JointTable& p, const JointTable& q) {
  if (!(p.space() == q.space())) throw SpaceError("kl: distributions live on different spaces");
  return kl(p.probs(), q.probs());
}

inline double kl(const JointTable& p, const Table& q, KlOptions opts) {
  if (!(p.space() == q.space())) throw SpaceError("kl: tables live on different spaces");
  if (!opts.allow_unnormalized && std::abs(q.sum() - 1.0) > kNormTolerance)
    throw DistributionError("kl: reference table is not normalized (set allow_unnormalized)");
  return kl(p.probs(), q.values());
}

/// I(A; B | given) by enumeration of Σ p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))].
inline double mutual_information(const JointTable& joint, std::span<const std::string> a, std::span<const std::string> b,
                                 std::span<const std::string> given = {}) {
  auto overlaps = [](std::span<const std::string> x, std::span<const std::string> y) {
    return std::any_of(x.begin(), x.end(), [&](const std::string& n) { return std::find(y.begin(), y.end(), n) != y.end(); });
  };
  if (overlaps(a, b) || overlaps(a, given) || overlaps(b, given))
    throw SpaceError("mutual_information: variable sets must be pairwise disjoint");
  Names abc(a.begin(), a.end());
  abc.insert(abc.end(), b.begin(), b.end());
  abc.insert(abc.end(), given.begin(), given.end());
  Names ac(a.begin(), a.end());
  ac.insert(ac.end(), given.begin(), given.end());
  Names bc(b.begin(), b.end());
  bc.insert(bc.end(), given.begin(), given.end());
  Names c(given.begin(), given.end());

  const Table pabc = joint.table().sum_to(abc);
  const Table pac = pabc.sum_to(ac);
  const Table pbc = pabc.sum_to(bc);
  const Table pc = pabc.sum_to(c);
  const auto iac = project_indices(pabc.space(), pac.space());
  const auto ibc = project_indices(pabc.space(), pbc.space());
  const auto ic = project_indices(pabc.space(), pc.space());
  double mi = 0.0;
  for (std::size_t k = 0; k < pabc.size(); ++k) {
    const double p = pabc[k];
    if (p <= 0.0) continue;
    mi += p * std::log(p * pc[ic[k]] / (pac[iac[k]] * pbc[ibc[k]]));
  }
  return mi;
}

inline double mutual_information(const JointTable& joint, std::initializer_list<std::string> a,
                                 std::initializer_list<std::string> b, std::initializer_list<std::string> given = {}) {
  Names va(a), vb(b), vc(given);
  return mutual_information(joint, std::span<const std::string>(va), std::span<const std::string>(vb),
                            std::span<const std::string>(vc));
}

/// E_{p(obs)} KL[p(latent | obs) || p(latent)], via explicit posteriors.
inline double expected_info_gain(const JointTable& joint, std::span<const std::string> latent,
                                 std::span<const std::string> obs) {
  const JointTable prior = marginalize(joint, latent);
  const JointTable evidence = marginalize(joint, obs);
  const CondTable post = condition(joint, latent, obs);
  double ig = 0.0;
  for (std::size_t o = 0; o < post.rows(); ++o) {
    if (!post.defined(o)) continue;
    ig += evidence[o] * kl(post.row(o), prior.probs());
  }
  return ig;
}

inline double expected_info_gain(const JointTable& joint, std::initializer_list<std::string> latent,
                                 std::initializer_list<std::string> obs) {
  Names l(latent), o(obs);
  return expected_info_gain(joint, std::span<const std::string>(l), std::span<const std::string>(o));
}

/// H(target | given) = E_{p(given)} H[p(target | given)].
inline double conditional_entropy(const JointTable& joint, std::span<const std::string> target,
                                  std::span<const std::string> given) {
  const JointTable pg = marginalize(joint, given);
  const CondTable c = condition(joint, target, given);
  double h = 0.0;
  for (std::size_t g = 0; g < c.rows(); ++g)
    if (c.defined(g)) h += pg[g] * entropy(c.row(g));
  return h;
}

inline double conditional_entropy(const JointTable& joint, std::initializer_list<std::string> target,
                                  std::initializer_list<std::string> given) {
  Names t(target), g(given);
  return conditional_entropy(joint, std::span<const std::string>(t), std::span<const std::string>(g));
}

/// E_{w(g)} KL[p(.|g) || q(.|g)] for conditionals sharing given/target spaces.
/// Rows with zero weight are skipped.
inline double expected_kl(std::span<const double> weights, const CondTable& p, const CondTable& q) {
  if (!(p.given() == q.given()) || !(p.target() == q.target()))
    throw SpaceError("expected_kl: conditionals live on different spaces");
  if (weights.size() != p.rows()) throw SpaceError("expected_kl: weight vector has wrong size");
  double d = 0.0;
  for (std::size_t g = 0; g < p.rows(); ++g) {
    if (weights[g] <= 0.0) continue;
    if (!p.defined(g) || !q.defined(g)) throw SupportError("expected_kl: undefined row with positive weight");
    d += weights[g] * kl(p.row(g), q.row(g));
  }
  return d;
}

}  // namespace objlab
