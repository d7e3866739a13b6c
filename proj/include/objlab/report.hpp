#pragma once

// RelationReport: one verified identity, bound, or report-only probe, with
// every named term kept so the result can be read term by term.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "objlab/probcore.hpp"

namespace objlab {

enum class RelationKind {
  identity,  // lhs == signed_sum
  bound,     // identity plus a one-sided slack that must stay >= -kBoundSlack
  probe,     // measured only; never fails
};

inline constexpr double kDefaultIdentityTolerance = 1e-10;
inline constexpr double kBoundSlack = 1e-12;

inline std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::identity: return "identity";
    case RelationKind::bound: return "bound";
    case RelationKind::probe: return "probe";
  }
  return "identity";
}

struct Term {
  std::string label;
  double value = 0.0;
  /// Coefficient in signed_sum: +1, -1, or 0 for informational terms.
  int sign = 0;
};

struct RelationReport {
  std::string relation_id;
  RelationKind kind = RelationKind::identity;
  std::size_t trial = 0;
  std::string lhs_label;
  double lhs = 0.0;
  std::vector<Term> terms;
  double signed_sum = 0.0;
  double residual = 0.0;
  std::optional<double> slack;
  std::vector<std::pair<std::string, bool>> condition_flags;
  bool pass = false;
  /// Set when evaluation threw instead of producing terms.
  std::optional<std::string> error;

  double recomputed_signed_sum() const {
    double s = 0.0;
    for (const auto& t : terms) s += t.sign * t.value;
    return s;
  }

  double term(std::string_view label) const {
    for (const auto& t : terms)
      if (t.label == label) return t.value;
    throw Error("report '" + relation_id + "' has no term '" + std::string(label) + "'");
  }

  bool flag(std::string_view label) const {
    for (const auto& [k, v] : condition_flags)
      if (k == label) return v;
    throw Error("report '" + relation_id + "' has no flag '" + std::string(label) + "'");
  }

  bool has_flag(std::string_view label) const {
    for (const auto& f : condition_flags)
      if (f.first == label) return true;
    return false;
  }
};

/// Incrementally assembles a RelationReport and finalizes residual/pass.
class ReportBuilder {
 public:
  ReportBuilder(std::string relation_id, RelationKind kind) {
    r_.relation_id = std::move(relation_id);
    r_.kind = kind;
  }

  ReportBuilder& lhs(std::string label, double value) {
    r_.lhs_label = std::move(label);
    r_.lhs = value;
    return *this;
  }
  ReportBuilder& plus(std::string label, double value) { return add(std::move(label), value, +1); }
  ReportBuilder& minus(std::string label, double value) { return add(std::move(label), value, -1); }
  ReportBuilder& info(std::string label, double value) { return add(std::move(label), value, 0); }
  ReportBuilder& flag(std::string label, bool value) {
    r_.condition_flags.emplace_back(std::move(label), value);
    return *this;
  }
  ReportBuilder& slack(double value) {
    r_.slack = value;
    return *this;
  }

  /// Identity: pass iff residual < tolerance. Bound: additionally slack >=
  /// -kBoundSlack. Probe: always passes.
  RelationReport finish(double tolerance = kDefaultIdentityTolerance) {
    r_.signed_sum = r_.recomputed_signed_sum();
    r_.residual = std::abs(r_.lhs - r_.signed_sum);
    const bool finite_ok = std::isfinite(r_.residual);
    switch (r_.kind) {
      case RelationKind::identity: r_.pass = finite_ok && r_.residual < tolerance; break;
      case RelationKind::bound:
        r_.pass = finite_ok && r_.residual < tolerance && r_.slack.has_value() && *r_.slack >= -kBoundSlack;
        break;
      case RelationKind::probe: r_.pass = true; break;
    }
    return std::move(r_);
  }

  /// Finalize with an externally decided pass value (used where the
  /// residual is expected to equal a separately computed quantity).
  RelationReport finish_with(bool pass) {
    r_.signed_sum = r_.recomputed_signed_sum();
    r_.residual = std::abs(r_.lhs - r_.signed_sum);
    r_.pass = pass;
    return std::move(r_);
  }

 private:
  ReportBuilder& add(std::string label, double value, int sign) {
    r_.terms.push_back(Term{std::move(label), value, sign});
    return *this;
  }

  RelationReport r_;
};

}  // namespace objlab
