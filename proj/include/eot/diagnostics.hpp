#pragma once

// Optimality structure and hypothesis checks: arctan normalization of the
// potentials, Schroedinger-equation residuals, primal/dual values and the
// integrability quantities driving the stability experiments.

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "eot/measures.hpp"
#include "eot/metrics.hpp"
#include "eot/sinkhorn.hpp"

namespace eot {

struct NormalizedPotentials {
  Potentials potentials;
  double alpha = 0.0;  // integral of arctan(f) against mu after shifting

  json to_json() const {
    return json{{"potentials", potentials.to_json()}, {"alpha", alpha}};
  }
};

// Select the additive-shift representative with
//   sum_i mu_i * arctan(f_i + a) = alpha
// by monotone bracketing plus bisection; returns (f+a, g-a). The map
// a -> integral is strictly increasing with range (-pi/2, pi/2), so the
// shift exists and is unique for any alpha in that open interval.
inline NormalizedPotentials normalize(const Potentials& p,
                                      const DiscreteMeasure& mu,
                                      double alpha = 0.0) {
  constexpr double half_pi = 1.57079632679489661923;
  if (!(alpha > -half_pi && alpha < half_pi))
    throw std::invalid_argument("normalize: alpha outside (-pi/2, pi/2)");
  if (p.f.size() != mu.size())
    throw std::invalid_argument("normalize: f not aligned with mu");

  auto mean_arctan = [&](double a) {
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
      s += mu.weight(i) * std::atan(p.f[i] + a);
    return s;
  };

  const double fmax = *std::max_element(p.f.begin(), p.f.end());
  const double fmin = *std::min_element(p.f.begin(), p.f.end());
  const double pad = std::tan(std::abs(alpha) + 0.1);
  double lo = -(fmax + pad), hi = -(fmin - pad);
  while (mean_arctan(lo) > alpha) lo = lo * 2.0 - 1.0;
  while (mean_arctan(hi) < alpha) hi = hi * 2.0 + 1.0;

  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_arctan(mid) < alpha ? lo : hi) = mid;
  }
  const double a = 0.5 * (lo + hi);

  NormalizedPotentials out{p, alpha};
  for (double& v : out.potentials.f) v += a;
  for (double& v : out.potentials.g) v -= a;
  return out;
}

// Max-norm residuals of the two Schroedinger equations, in cost units:
//   r_f = max_i |f_i + eps log sum_j nu_j exp((g_j - c_ij)/eps)|
// and symmetrically for r_g.
inline std::pair<double, double> schroedinger_residual(
    const Potentials& p, const CostMatrix& C, const DiscreteMeasure& mu,
    const DiscreteMeasure& nu) {
  const auto f_fix = half_step_phi(p.g, C, nu, p.eps);
  const auto g_fix = half_step_psi(p.f, C, mu, p.eps);
  double r_f = 0.0, r_g = 0.0;
  for (std::size_t i = 0; i < p.f.size(); ++i)
    r_f = std::max(r_f, std::abs(p.f[i] - f_fix[i]));
  for (std::size_t j = 0; j < p.g.size(); ++j)
    r_g = std::max(r_g, std::abs(p.g[j] - g_fix[j]));
  return {r_f, r_g};
}

// <c, pi> + eps * H(pi | mu x nu), with 0 log 0 := 0.
inline double primal_value(const Coupling& pi, const CostMatrix& C,
                           const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           double eps) {
  if (pi.rows() != C.rows() || pi.cols() != C.cols())
    throw std::invalid_argument("primal_value: shape mismatch");
  double cost = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < pi.rows(); ++i) {
    for (std::size_t j = 0; j < pi.cols(); ++j) {
      const double m = pi(i, j);
      if (m == 0.0) continue;
      cost += C(i, j) * m;
      entropy += m * std::log(m / (mu.weight(i) * nu.weight(j)));
    }
  }
  return cost + eps * entropy;
}

// Duality value in cost units: sum mu_i f_i + sum nu_j g_j. Invariant under
// the shift (f+a, g-a).
inline double dual_value(const Potentials& p, const DiscreteMeasure& mu,
                         const DiscreteMeasure& nu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += mu.weight(i) * p.f[i];
  for (std::size_t j = 0; j < nu.size(); ++j) s += nu.weight(j) * p.g[j];
  return s;
}

inline double dual_value(const NormalizedPotentials& p,
                         const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return dual_value(p.potentials, mu, nu);
}

// exp_moment(beta) = sum_ij mu_i nu_j exp(beta c_ij), through log space;
// +inf sentinel when it exceeds double range.
inline double exp_moment(const CostMatrix& C, const DiscreteMeasure& mu,
                         const DiscreteMeasure& nu, double beta) {
  std::vector<double> terms;
  terms.reserve(C.rows() * C.cols());
  for (std::size_t i = 0; i < C.rows(); ++i)
    for (std::size_t j = 0; j < C.cols(); ++j)
      terms.push_back(std::log(mu.weight(i)) + std::log(nu.weight(j)) +
                      beta * C(i, j));
  const double lse = detail::log_sum_exp(terms);
  if (lse > 700.0) return std::numeric_limits<double>::infinity();
  return std::exp(lse);
}

// Numerical values of the hypotheses appearing in the stability statements,
// evaluated at the current perturbation step. Entries that require a shared
// support carry the +inf sentinel when it is absent.
struct ConditionReport {
  double f_plus_mean = 0.0;  // integral of f^+ against mu
  double g_plus_mean = 0.0;
  double f_abs_mean = 0.0;  // L1 norms
  double g_abs_mean = 0.0;
  std::map<double, double> f_tail;  // C -> integral of f 1_{f > C} d mu
  std::map<double, double> g_tail;
  std::map<double, double> exp_moments;  // beta -> exp moment of the cost
  double entropy_to_limit = 0.0;  // H(mu_n|mu) + H(nu_n|nu), or +inf
  std::map<double, double> rn_tail_mu;  // C -> mu(d mu/d mu_n >= C), or +inf
  std::map<double, double> rn_tail_nu;

  json to_json() const {
    auto emit_map = [](const std::map<double, double>& m) {
      json a = json::array();
      for (const auto& [k, v] : m) a.push_back(json{{"level", k}, {"value", v}});
      return a;
    };
    return json{{"f_plus_mean", f_plus_mean},
                {"g_plus_mean", g_plus_mean},
                {"f_abs_mean", f_abs_mean},
                {"g_abs_mean", g_abs_mean},
                {"f_tail", emit_map(f_tail)},
                {"g_tail", emit_map(g_tail)},
                {"exp_moments", emit_map(exp_moments)},
                {"entropy_to_limit", entropy_to_limit},
                {"rn_tail_mu", emit_map(rn_tail_mu)},
                {"rn_tail_nu", emit_map(rn_tail_nu)}};
  }
};

inline ConditionReport condition_report(
    const Potentials& p, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
    const DiscreteMeasure& mu_limit, const DiscreteMeasure& nu_limit,
    const CostMatrix& C, const std::vector<double>& betas,
    const std::vector<double>& tail_levels) {
  const double inf = std::numeric_limits<double>::infinity();
  ConditionReport r;

  auto moments = [](const std::vector<double>& v, const DiscreteMeasure& m,
                    double& plus, double& abs) {
    plus = abs = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      plus += m.weight(i) * std::max(v[i], 0.0);
      abs += m.weight(i) * std::abs(v[i]);
    }
  };
  moments(p.f, mu, r.f_plus_mean, r.f_abs_mean);
  moments(p.g, nu, r.g_plus_mean, r.g_abs_mean);

  for (double level : tail_levels) {
    double tf = 0.0, tg = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (p.f[i] > level) tf += mu.weight(i) * p.f[i];
    for (std::size_t j = 0; j < nu.size(); ++j)
      if (p.g[j] > level) tg += nu.weight(j) * p.g[j];
    r.f_tail[level] = tf;
    r.g_tail[level] = tg;
  }
  for (double beta : betas) r.exp_moments[beta] = exp_moment(C, mu, nu, beta);

  const bool mu_shared = mu.same_support(mu_limit);
  const bool nu_shared = nu.same_support(nu_limit);
  if (mu_shared && nu_shared) {
    r.entropy_to_limit =
        relative_entropy(mu, mu_limit) + relative_entropy(nu, nu_limit);
  } else {
    r.entropy_to_limit = inf;
  }
  for (double level : tail_levels) {
    if (mu_shared) {
      double t = 0.0;
      for (std::size_t i = 0; i < mu.size(); ++i)
        if (mu_limit.weight(i) / mu.weight(i) >= level)
          t += mu_limit.weight(i);
      r.rn_tail_mu[level] = t;
    } else {
      r.rn_tail_mu[level] = inf;
    }
    if (nu_shared) {
      double t = 0.0;
      for (std::size_t j = 0; j < nu.size(); ++j)
        if (nu_limit.weight(j) / nu.weight(j) >= level)
          t += nu_limit.weight(j);
      r.rn_tail_nu[level] = t;
    } else {
      r.rn_tail_nu[level] = inf;
    }
  }
  return r;
}

}  // namespace eot
