#pragma once

// One-dimensional Gaussian-mixture fit of a predicted observation density
// p(o) to a fixed desire density under the Evidence loss
// -∫ p ln desire and the Divergence loss ∫ p ln(p / desire).
//
// Integrals are evaluated per mixture component with reparameterized nodes
// o = mu_k + sigma_k t on a fixed standard-normal trapezoid rule, so the
// rule follows each component down to the std floor. The discretized loss
// is differentiated exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "objlab/probcore.hpp"

namespace objlab {

class OptimizationError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kStdFloor = 1e-3;

struct GaussianMixtureParams {
  std::vector<double> logits, means, log_stds;

  static GaussianMixtureParams from_moments(std::vector<double> weights, std::vector<double> means,
                                            std::vector<double> variances) {
    if (weights.size() != means.size() || means.size() != variances.size() || weights.empty())
      throw SizeError("mixture needs matching, nonempty weight/mean/variance lists");
    GaussianMixtureParams p;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (!(weights[k] > 0.0) || !(variances[k] > 0.0)) throw DistributionError("weights and variances must be > 0");
      p.logits.push_back(std::log(weights[k]));
      p.log_stds.push_back(0.5 * std::log(variances[k]));
    }
    p.means = std::move(means);
    return p;
  }

  std::size_t size() const noexcept { return means.size(); }

  void validate() const {
    if (means.empty() || logits.size() != means.size() || log_stds.size() != means.size())
      throw SizeError("mixture parameter vectors must share a nonzero length");
    for (std::size_t k = 0; k < size(); ++k)
      if (!std::isfinite(logits[k]) || !std::isfinite(means[k]) || !std::isfinite(log_stds[k]))
        throw DistributionError("mixture parameters must be finite");
  }

  std::vector<double> weights() const {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(size());
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k) s += (w[k] = std::exp(logits[k] - top));
    for (double& v : w) v /= s;
    return w;
  }

  std::vector<double> log_weights() const {
    const double top = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double l : logits) s += std::exp(l - top);
    std::vector<double> lw(size());
    for (std::size_t k = 0; k < size(); ++k) lw[k] = logits[k] - top - std::log(s);
    return lw;
  }

  double std_dev(std::size_t k) const { return std::exp(log_stds[k]); }

  /// Flattened as logits, means, log_stds.
  std::vector<double> flat() const {
    std::vector<double> v(logits);
    v.insert(v.end(), means.begin(), means.end());
    v.insert(v.end(), log_stds.begin(), log_stds.end());
    return v;
  }

  static GaussianMixtureParams unflat(std::span<const double> v) {
    if (v.size() % 3 != 0 || v.empty()) throw SizeError("flat mixture vector length must be a positive multiple of 3");
    const std::size_t k = v.size() / 3;
    return {{v.begin(), v.begin() + k}, {v.begin() + k, v.begin() + 2 * k}, {v.begin() + 2 * k, v.end()}};
  }

  GaussianMixtureParams shifted(double c) const {
    GaussianMixtureParams p = *this;
    for (double& m : p.means) m += c;
    return p;
  }
};

namespace detail {

inline double log_normal_pdf(double o, double mu, double log_sd) {
  const double z = (o - mu) * std::exp(-log_sd);
  return -0.5 * std::log(2.0 * std::numbers::pi) - log_sd - 0.5 * z * z;
}

/// ln p(o), d ln p / do, and responsibilities r_k(o).
struct MixturePoint {
  double log_p = 0.0;
  double dlog_do = 0.0;
  std::vector<double> resp;
};

inline MixturePoint eval_mixture(const GaussianMixtureParams& p, const std::vector<double>& log_w, double o) {
  const std::size_t k = p.size();
  MixturePoint m;
  m.resp.resize(k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    m.resp[i] = log_w[i] + log_normal_pdf(o, p.means[i], p.log_stds[i]);
    top = std::max(top, m.resp[i]);
  }
  double s = 0.0;
  for (double& r : m.resp) s += (r = std::exp(r - top));
  m.log_p = top + std::log(s);
  for (std::size_t i = 0; i < k; ++i) {
    m.resp[i] /= s;
    const double var = std::exp(2.0 * p.log_stds[i]);
    m.dlog_do -= m.resp[i] * (o - p.means[i]) / var;
  }
  return m;
}

}  // namespace detail

/// Desire density: `mass` times a normalized Gaussian mixture.
struct TargetDensity {
  GaussianMixtureParams mixture;
  double mass = 1.0;

  double log_density(double o) const {
    return std::log(mass) + detail::eval_mixture(mixture, mixture.log_weights(), o).log_p;
  }
  double density(double o) const { return std::exp(log_density(o)); }
  bool normalized() const { return mass == 1.0; }

  TargetDensity shifted(double c) const { return {mixture.shifted(c), mass}; }
};

/// Equal-weight components with means (1, 4) and variances (1, 0.4). The
/// unnormalized variant gives each component unit weight (total mass 2).
inline TargetDensity desire_fig1(bool normalized = true) {
  return {GaussianMixtureParams::from_moments({0.5, 0.5}, {1.0, 4.0}, {1.0, 0.4}), normalized ? 1.0 : 2.0};
}

/// Uniform trapezoid grid on [lo, hi].
struct QuadratureGrid {
  double lo = -6.0;
  double hi = 11.0;
  std::size_t n_points = 4000;

  void validate() const {
    if (n_points < 2) throw SizeError("quadrature grid needs at least 2 points");
    if (!(hi > lo)) throw SizeError("quadrature grid needs hi > lo");
  }
  double step() const { return (hi - lo) / static_cast<double>(n_points - 1); }
  double node(std::size_t i) const { return lo + step() * static_cast<double>(i); }
  double weight(std::size_t i) const { return (i == 0 || i + 1 == n_points) ? 0.5 * step() : step(); }

  template <class F>
  double integrate(F&& f) const {
    validate();
    double s = 0.0;
    for (std::size_t i = 0; i < n_points; ++i) s += weight(i) * f(node(i));
    return s;
  }
};

/// Standard-normal trapezoid rule on [-half_width, half_width].
struct StandardNormalRule {
  std::vector<double> t, w;

  explicit StandardNormalRule(std::size_t n = 801, double half_width = 10.0) {
    if (n < 3) throw SizeError("standard-normal rule needs at least 3 nodes");
    const double h = 2.0 * half_width / static_cast<double>(n - 1);
    t.resize(n);
    w.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      t[j] = -half_width + h * static_cast<double>(j);
      const double c = (j == 0 || j + 1 == n) ? 0.5 * h : h;
      w[j] = c * std::exp(-0.5 * t[j] * t[j]) / std::sqrt(2.0 * std::numbers::pi);
    }
  }
};

inline const StandardNormalRule& default_rule() {
  static const StandardNormalRule rule;
  return rule;
}

/// Probability mass of p inside [a, b].
inline double mass_between(const GaussianMixtureParams& p, double a, double b) {
  const auto w = p.weights();
  double m = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double s = p.std_dev(k) * std::numbers::sqrt2;
    m += w[k] * 0.5 * (std::erfc((a - p.means[k]) / s) - std::erfc((b - p.means[k]) / s));
  }
  return m;
}

inline double mass_near(const GaussianMixtureParams& p, double center, double half_width) {
  return mass_between(p, center - half_width, center + half_width);
}

/// Grid adequacy: p must put all but 1e-6 of its mass inside the grid.
inline void check_grid_adequacy(const GaussianMixtureParams& p, const QuadratureGrid& grid) {
  grid.validate();
  const double m = mass_between(p, grid.lo, grid.hi);
  if (std::abs(m - 1.0) > 1e-6)
    throw SupportError("quadrature grid [" + std::to_string(grid.lo) + ", " + std::to_string(grid.hi) +
                       "] holds only " + std::to_string(m) + " of the mixture mass");
}

enum class LossKind { evidence, divergence };

inline std::string_view to_string(LossKind k) { return k == LossKind::evidence ? "evidence" : "divergence"; }

namespace detail {

/// Loss and (optionally) its exact gradient in flat (logits, means, log_stds) order.
inline double loss_and_gradient(LossKind kind, const GaussianMixtureParams& p, const TargetDensity& desire,
                                const StandardNormalRule& rule, std::vector<double>* grad) {
  p.validate();
  const std::size_t k = p.size();
  const auto w = p.weights();
  const auto lw = p.log_weights();
  const auto dlw = desire.mixture.log_weights();
  const double log_mass = std::log(desire.mass);
  std::vector<double> s(k, 0.0), g_mu(k, 0.0), g_ls(k, 0.0), g_lg(k, 0.0);

  for (std::size_t c = 0; c < k; ++c) {
    const double sd = p.std_dev(c);
    for (std::size_t j = 0; j < rule.t.size(); ++j) {
      const double o = p.means[c] + sd * rule.t[j];
      const MixturePoint d = eval_mixture(desire.mixture, dlw, o);
      double g = -(d.log_p + log_mass);
      double dg_do = -d.dlog_do;
      MixturePoint m;
      if (kind == LossKind::divergence) {
        m = eval_mixture(p, lw, o);
        g += m.log_p;
        dg_do += m.dlog_do;
      }
      s[c] += rule.w[j] * g;
      if (!grad) continue;
      // node motion
      g_mu[c] += w[c] * rule.w[j] * dg_do;
      g_ls[c] += w[c] * rule.w[j] * dg_do * sd * rule.t[j];
      // explicit dependence of ln p on the parameters at fixed o
      if (kind == LossKind::divergence) {
        const double cw = w[c] * rule.w[j];
        for (std::size_t i = 0; i < k; ++i) {
          const double z = (o - p.means[i]) / p.std_dev(i);
          g_mu[i] += cw * m.resp[i] * z / p.std_dev(i);
          g_ls[i] += cw * m.resp[i] * (z * z - 1.0);
          g_lg[i] += cw * (m.resp[i] - w[i]);
        }
      }
    }
  }
  double loss = 0.0;
  for (std::size_t c = 0; c < k; ++c) loss += w[c] * s[c];
  if (grad) {
    for (std::size_t i = 0; i < k; ++i) g_lg[i] += w[i] * (s[i] - loss);
    grad->clear();
    grad->insert(grad->end(), g_lg.begin(), g_lg.end());
    grad->insert(grad->end(), g_mu.begin(), g_mu.end());
    grad->insert(grad->end(), g_ls.begin(), g_ls.end());
  }
  return loss;
}

}  // namespace detail

inline double evidence_loss(const GaussianMixtureParams& p, const TargetDensity& desire, const QuadratureGrid& grid = {},
                            const StandardNormalRule& rule = default_rule()) {
  check_grid_adequacy(p, grid);
  return detail::loss_and_gradient(LossKind::evidence, p, desire, rule, nullptr);
}

inline double divergence_loss(const GaussianMixtureParams& p, const TargetDensity& desire,
                              const QuadratureGrid& grid = {}, const StandardNormalRule& rule = default_rule()) {
  check_grid_adequacy(p, grid);
  return detail::loss_and_gradient(LossKind::divergence, p, desire, rule, nullptr);
}

inline double loss(LossKind kind, const GaussianMixtureParams& p, const TargetDensity& desire,
                   const QuadratureGrid& grid = {}, const StandardNormalRule& rule = default_rule()) {
  return kind == LossKind::evidence ? evidence_loss(p, desire, grid, rule) : divergence_loss(p, desire, grid, rule);
}

/// Exact gradient of the discretized loss, shaped like the parameters.
inline GaussianMixtureParams gradient(LossKind kind, const GaussianMixtureParams& p, const TargetDensity& desire,
                                      const StandardNormalRule& rule = default_rule()) {
  std::vector<double> g;
  detail::loss_and_gradient(kind, p, desire, rule, &g);
  return GaussianMixtureParams::unflat(g);
}

/// KL[p || desire] by trapezoid on `grid` (desire assumed normalized).
inline double kl_on_grid(const GaussianMixtureParams& p, const TargetDensity& desire, const QuadratureGrid& grid) {
  const auto lw = p.log_weights();
  const auto dlw = desire.mixture.log_weights();
  const double log_mass = std::log(desire.mass);
  return grid.integrate([&](double o) {
    const double lp = detail::eval_mixture(p, lw, o).log_p;
    const double pv = std::exp(lp);
    if (pv == 0.0) return 0.0;
    return pv * (lp - detail::eval_mixture(desire.mixture, dlw, o).log_p - log_mass);
  });
}

inline double mixture_density(const GaussianMixtureParams& p, double o) {
  return std::exp(detail::eval_mixture(p, p.log_weights(), o).log_p);
}

/// Location of the largest desire density among the grid nodes.
inline double grid_argmax(const TargetDensity& desire, const QuadratureGrid& grid) {
  grid.validate();
  double best_o = grid.node(0), best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double v = desire.log_density(grid.node(i));
    if (v > best) {
      best = v;
      best_o = grid.node(i);
    }
  }
  return best_o;
}

enum class OptimizerKind { adam, gradient_descent };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  std::size_t steps = 5000;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  double std_floor = kStdFloor;
  /// Scale of the N(0, 1) perturbation added to the start point.
  double jitter = 0.01;
  std::uint64_t seed = 0;
};

struct Trajectory {
  std::vector<GaussianMixtureParams> params;  // params[0] is the start point
  std::vector<double> losses;

  const GaussianMixtureParams& final_params() const { return params.back(); }
  double final_loss() const { return losses.back(); }
};

/// Minimizes the chosen loss, projecting every std onto [std_floor, ∞)
/// after each step. Zero steps returns the start point untouched.
inline Trajectory optimize(LossKind kind, const GaussianMixtureParams& init, const TargetDensity& desire,
                           const OptimizerConfig& cfg = {}, const QuadratureGrid& grid = {},
                           const StandardNormalRule& rule = default_rule()) {
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw Error("optimize: learning rate must be finite and > 0");
  init.validate();
  Trajectory tr;
  auto record = [&](const GaussianMixtureParams& p) {
    tr.params.push_back(p);
    tr.losses.push_back(loss(kind, p, desire, grid, rule));
  };
  if (cfg.steps == 0) {
    record(init);
    return tr;
  }
  std::vector<double> x = init.flat();
  const std::size_t k = init.size();
  const double log_floor = std::log(cfg.std_floor);
  if (cfg.jitter > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : x) v += cfg.jitter * n(rng);
  }
  for (std::size_t i = 2 * k; i < 3 * k; ++i) x[i] = std::max(x[i], log_floor);
  record(GaussianMixtureParams::unflat(x));

  std::vector<double> m(x.size(), 0.0), v(x.size(), 0.0), g;
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    detail::loss_and_gradient(kind, GaussianMixtureParams::unflat(x), desire, rule, &g);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (cfg.kind == OptimizerKind::gradient_descent) {
        x[i] -= cfg.learning_rate * g[i];
      } else {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        x[i] -= cfg.learning_rate * (m[i] / (1.0 - b1t)) / (std::sqrt(v[i] / (1.0 - b2t)) + cfg.epsilon);
      }
    }
    for (std::size_t i = 2 * k; i < 3 * k; ++i) x[i] = std::max(x[i], log_floor);
    const auto p = GaussianMixtureParams::unflat(x);
    const double l = detail::loss_and_gradient(kind, p, desire, rule, nullptr);
    if (!std::isfinite(l)) {
      std::ostringstream msg;
      msg << "optimize(" << to_string(kind) << "): loss became " << l << " at step " << step + 1 << ", means";
      for (double mu : p.means) msg << ' ' << mu;
      throw OptimizationError(msg.str());
    }
    tr.params.push_back(p);
    tr.losses.push_back(l);
  }
  check_grid_adequacy(tr.final_params(), grid);
  return tr;
}

/// Means (0, 2), unit stds, equal weights.
inline GaussianMixtureParams fig1_default_init() { return {{0.0, 0.0}, {0.0, 2.0}, {0.0, 0.0}}; }

struct Fig1Config {
  OptimizerConfig optimizer;
  QuadratureGrid grid;
  std::size_t kl_grid_points = 1'000'000;
  double mode_half_width = 0.05;
  /// Use the unnormalized desire (unit component weights) on the evidence
  /// path. Shifts the evidence loss by -ln 2 and leaves its gradient alone.
  bool unnormalized_evidence_desire = false;
};

struct ComponentSummary {
  double weight, mean, std_dev;
};

struct Fig1Result {
  Trajectory evidence, divergence;
  double desire_mode = 0.0;
  double desire_integral = 0.0;
  double evidence_kl = 0.0, divergence_kl = 0.0;
  double evidence_mass_near_mode = 0.0;
  std::vector<ComponentSummary> evidence_components, divergence_components;
  bool divergence_matches = false;   // KL <= 0.01
  bool evidence_collapses = false;   // mass >= 0.99 near mode, KL >= 1
  bool evidence_at_floor = false;    // some component at the std floor, mean within 0.1 of the mode
  bool pass() const { return divergence_matches && evidence_collapses && evidence_at_floor; }
};

inline std::vector<ComponentSummary> summarize(const GaussianMixtureParams& p) {
  std::vector<ComponentSummary> out;
  const auto w = p.weights();
  for (std::size_t k = 0; k < p.size(); ++k) out.push_back({w[k], p.means[k], p.std_dev(k)});
  return out;
}

/// Runs both fits from the default start point.
inline Fig1Result run_fig1(const Fig1Config& cfg = {}) {
  const TargetDensity desire = desire_fig1(true);
  const TargetDensity evidence_desire = desire_fig1(!cfg.unnormalized_evidence_desire);
  Fig1Result r;
  r.desire_mode = grid_argmax(desire, cfg.grid);
  r.desire_integral = cfg.grid.integrate([&](double o) { return desire.density(o); });
  r.evidence = optimize(LossKind::evidence, fig1_default_init(), evidence_desire, cfg.optimizer, cfg.grid);
  r.divergence = optimize(LossKind::divergence, fig1_default_init(), desire, cfg.optimizer, cfg.grid);
  const QuadratureGrid fine{cfg.grid.lo, cfg.grid.hi, cfg.kl_grid_points};
  const auto& pe = r.evidence.final_params();
  const auto& pd = r.divergence.final_params();
  r.evidence_kl = kl_on_grid(pe, desire, fine);
  r.divergence_kl = kl_on_grid(pd, desire, fine);
  r.evidence_mass_near_mode = mass_near(pe, r.desire_mode, cfg.mode_half_width);
  r.evidence_components = summarize(pe);
  r.divergence_components = summarize(pd);
  r.divergence_matches = r.divergence_kl <= 0.01;
  r.evidence_collapses = r.evidence_mass_near_mode >= 0.99 && r.evidence_kl >= 1.0;
  for (const auto& c : r.evidence_components)
    r.evidence_at_floor = r.evidence_at_floor ||
                          (c.std_dev <= cfg.optimizer.std_floor * (1.0 + 1e-9) && std::abs(c.mean - r.desire_mode) <= 0.1);
  return r;
}

/// Writes o, desired, fitted_evidence, fitted_divergence on the grid nodes.
inline void write_fig1_csv(const Fig1Result& r, const QuadratureGrid& grid, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file.string() + " for writing");
  const TargetDensity desire = desire_fig1(true);
  out << "o,desired,fitted_evidence,fitted_divergence\n" << std::setprecision(9);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double o = grid.node(i);
    out << o << ',' << desire.density(o) << ',' << mixture_density(r.evidence.final_params(), o) << ','
        << mixture_density(r.divergence.final_params(), o) << '\n';
  }
  if (!out) throw Error("failed writing " + file.string());
}

/// run_fig1 plus fig1_densities.csv in `out_dir`.
inline Fig1Result fig1_experiment(const std::filesystem::path& out_dir, const Fig1Config& cfg = {}) {
  Fig1Result r = run_fig1(cfg);
  std::filesystem::create_directories(out_dir);
  write_fig1_csv(r, cfg.grid, out_dir / "fig1_densities.csv");
  return r;
}

}  // namespace objlab
