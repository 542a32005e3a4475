#pragma once

// Log-domain Sinkhorn solver: dual half-steps, couplings, iterate marginals.
//
// Potentials are stored in cost units, i.e. the coupling density is
// exp((f(x)+g(y)-c(x,y))/eps) against mu (x) nu. All reductions go through
// max-shifted log-sum-exp so small eps does not underflow the kernel.

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "eot/measures.hpp"

namespace eot {

struct Potentials {
  std::vector<double> f;  // over X-atoms, cost units
  std::vector<double> g;  // over Y-atoms, cost units
  double eps = 1.0;

  json to_json() const {
    return json{{"f", f}, {"g", g}, {"eps", eps}, {"units", "cost"}};
  }
  static Potentials from_json(const json& j) {
    return Potentials{j.at("f").get<std::vector<double>>(),
                      j.at("g").get<std::vector<double>>(),
                      j.at("eps").get<double>()};
  }
};

// Dense coupling with the two marginals it ties together.
class Coupling {
 public:
  Coupling(std::vector<double> matrix, DiscreteMeasure source,
           DiscreteMeasure target)
      : matrix_(std::move(matrix)),
        source_(std::move(source)),
        target_(std::move(target)) {
    if (matrix_.size() != source_.size() * target_.size())
      throw std::invalid_argument("coupling: matrix shape mismatch");
    double mass = 0.0;
    for (double v : matrix_) {
      if (v < 0.0 || !std::isfinite(v))
        throw std::invalid_argument("coupling: negative or non-finite entry");
      mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-10)
      throw std::invalid_argument("coupling: total mass not 1");
  }

  std::size_t rows() const { return source_.size(); }
  std::size_t cols() const { return target_.size(); }
  double operator()(std::size_t i, std::size_t j) const {
    return matrix_[i * cols() + j];
  }
  const std::vector<double>& matrix() const { return matrix_; }
  const DiscreteMeasure& source() const { return source_; }
  const DiscreteMeasure& target() const { return target_; }

  std::vector<double> row_marginals() const {
    std::vector<double> r(rows(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t j = 0; j < cols(); ++j) r[i] += (*this)(i, j);
    return r;
  }
  std::vector<double> col_marginals() const {
    std::vector<double> c(cols(), 0.0);
    for (std::size_t i = 0; i < rows(); ++i)
      for (std::size_t j = 0; j < cols(); ++j) c[j] += (*this)(i, j);
    return c;
  }

  json to_json() const {
    std::vector<std::vector<double>> m(rows());
    for (std::size_t i = 0; i < rows(); ++i)
      m[i].assign(matrix_.begin() + i * cols(),
                  matrix_.begin() + (i + 1) * cols());
    return json{{"matrix", m},
                {"source", source_.to_json()},
                {"target", target_.to_json()}};
  }
  static Coupling from_json(const json& j) {
    auto m = j.at("matrix").get<std::vector<std::vector<double>>>();
    std::vector<double> flat;
    for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
    return Coupling(std::move(flat), DiscreteMeasure::from_json(j.at("source")),
                    DiscreteMeasure::from_json(j.at("target")));
  }

 private:
  std::vector<double> matrix_;
  DiscreteMeasure source_, target_;
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double t : terms) mx = std::max(mx, t);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s);
}

}  // namespace detail

// psi(y_j) = -eps * log sum_i mu_i exp((phi_i - c_ij)/eps)
inline std::vector<double> half_step_psi(const std::vector<double>& phi,
                                         const CostMatrix& C,
                                         const DiscreteMeasure& mu,
                                         double eps) {
  if (eps <= 0.0) throw std::invalid_argument("half_step_psi: eps <= 0");
  if (phi.size() != C.rows() || mu.size() != C.rows())
    throw std::invalid_argument("half_step_psi: shape mismatch");
  std::vector<double> psi(C.cols());
  std::vector<double> terms(C.rows());
  for (std::size_t j = 0; j < C.cols(); ++j) {
    for (std::size_t i = 0; i < C.rows(); ++i)
      terms[i] = std::log(mu.weight(i)) + (phi[i] - C(i, j)) / eps;
    psi[j] = -eps * detail::log_sum_exp(terms);
  }
  return psi;
}

// phi(x_i) = -eps * log sum_j nu_j exp((psi_j - c_ij)/eps)
inline std::vector<double> half_step_phi(const std::vector<double>& psi,
                                         const CostMatrix& C,
                                         const DiscreteMeasure& nu,
                                         double eps) {
  if (eps <= 0.0) throw std::invalid_argument("half_step_phi: eps <= 0");
  if (psi.size() != C.cols() || nu.size() != C.cols())
    throw std::invalid_argument("half_step_phi: shape mismatch");
  std::vector<double> phi(C.rows());
  std::vector<double> terms(C.cols());
  for (std::size_t i = 0; i < C.rows(); ++i) {
    for (std::size_t j = 0; j < C.cols(); ++j)
      terms[j] = std::log(nu.weight(j)) + (psi[j] - C(i, j)) / eps;
    phi[i] = -eps * detail::log_sum_exp(terms);
  }
  return phi;
}

// pi_ij = mu_i nu_j exp((f_i + g_j - c_ij)/eps), assembled in log space.
inline Coupling coupling_from_potentials(const Potentials& p,
                                         const CostMatrix& C,
                                         const DiscreteMeasure& mu,
                                         const DiscreteMeasure& nu) {
  if (p.f.size() != C.rows() || p.g.size() != C.cols())
    throw std::invalid_argument("coupling_from_potentials: shape mismatch");
  std::vector<double> m(C.rows() * C.cols());
  for (std::size_t i = 0; i < C.rows(); ++i) {
    for (std::size_t j = 0; j < C.cols(); ++j) {
      const double expo = (p.f[i] + p.g[j] - C(i, j)) / p.eps;
      if (expo > 700.0) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "coupling_from_potentials: exponent overflow at cell "
                      "(%zu,%zu): %g",
                      i, j, expo);
        throw std::overflow_error(buf);
      }
      m[i * C.cols() + j] = std::exp(std::log(mu.weight(i)) +
                                     std::log(nu.weight(j)) + expo);
    }
  }
  return Coupling(std::move(m), mu, nu);
}

// Snapshot of the dual iteration at step t (phi_t known, phi_{t+1} computed).
struct SinkhornState {
  std::size_t t = 0;
  std::vector<double> phi;       // phi_t
  std::vector<double> phi_next;  // phi_{t+1}
  std::vector<double> psi_prev;  // psi_{t-1}, empty at t = 0
  std::vector<double> psi;       // psi_t
  double eps = 1.0;
};

// Marginals of the primal iterates at step t:
//   mu_{2t}       with density exp((phi_t - phi_{t+1})/eps) against mu,
//   nu_{2t-1}     with density exp((psi_{t-1} - psi_t)/eps) against nu.
// Only available for t >= 1 for the second component.
inline DiscreteMeasure iterate_marginal_mu_even(const SinkhornState& s,
                                                const DiscreteMeasure& mu) {
  std::vector<double> w(mu.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    w[i] = mu.weight(i) * std::exp((s.phi[i] - s.phi_next[i]) / s.eps);
    sum += w[i];
  }
  // density integrates to 1 analytically; absorb float drift only
  for (double& v : w) v /= sum;
  return DiscreteMeasure(mu.atoms(), std::move(w));
}

inline DiscreteMeasure iterate_marginal_nu_odd(const SinkhornState& s,
                                               const DiscreteMeasure& nu) {
  if (s.psi_prev.empty())
    throw std::invalid_argument("iterate_marginal_nu_odd: needs t >= 1");
  std::vector<double> w(nu.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) {
    w[j] = nu.weight(j) * std::exp((s.psi_prev[j] - s.psi[j]) / s.eps);
    sum += w[j];
  }
  for (double& v : w) v /= sum;
  return DiscreteMeasure(nu.atoms(), std::move(w));
}

struct SolveReport {
  Potentials potentials;
  Coupling coupling;
  std::size_t iterations = 0;
  std::vector<double> marginal_error_trace;  // max marginal TV per iteration
  std::vector<double> entropy_trace;  // H(mu_n|mu)+H(nu_n|nu) per iteration
  std::vector<double> dual_trace;
  bool converged = false;

  json to_json() const {
    return json{{"potentials", potentials.to_json()},
                {"coupling", coupling.to_json()},
                {"iterations", iterations},
                {"marginal_error_trace", marginal_error_trace},
                {"entropy_trace", entropy_trace},
                {"dual_trace", dual_trace},
                {"converged", converged}};
  }

  // CSV rows: iter, marginal_tv, entropy_sum, dual_value
  std::string trace_csv() const {
    std::string out = "iter,marginal_tv,entropy_sum,dual_value\n";
    char buf[128];
    for (std::size_t t = 0; t < marginal_error_trace.size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", t + 1,
                    marginal_error_trace[t], entropy_trace[t], dual_trace[t]);
      out += buf;
    }
    return out;
  }
};

using SinkhornObserver = std::function<void(const SinkhornState&)>;

// Alternating dual half-steps from phi_0 = 0, stopping when both marginal
// TV errors are <= tol and the remaining dual residual (in eps units) is
// <= 10*tol, so the returned potentials meet the documented residual bound.
// Non-convergence within max_iter is a reported status, not an error.
inline SolveReport solve(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         const CostMatrix& C, double eps, double tol = 1e-9,
                         std::size_t max_iter = 100000,
                         const SinkhornObserver& observer = nullptr) {
  if (mu.size() != C.rows() || nu.size() != C.cols())
    throw std::invalid_argument("solve: marginal/cost shape mismatch");
  if (tol <= 0.0) throw std::invalid_argument("solve: tol <= 0");

  const std::size_t m = mu.size(), n = nu.size();
  std::vector<double> phi(m, 0.0);                      // phi_0 := 0
  std::vector<double> psi_prev;                         // psi_{t-1}
  std::vector<double> psi = half_step_psi(phi, C, mu, eps);  // psi_0

  SolveReport report{Potentials{phi, psi, eps},
                     coupling_from_potentials(Potentials{phi, psi, eps}, C, mu, nu),
                     0, {}, {}, {}, false};

  for (std::size_t t = 0; t < max_iter; ++t) {
    std::vector<double> phi_next = half_step_phi(psi, C, nu, eps);
    std::vector<double> psi_next = half_step_psi(phi_next, C, mu, eps);

    // TV(mu_{2t}, mu) and TV(nu_{2t+1}, nu) via the iterate-marginal densities
    double row_tv = 0.0, ent_mu = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = (phi[i] - phi_next[i]) / eps;
      const double d = std::exp(r);
      row_tv += mu.weight(i) * std::abs(d - 1.0);
      ent_mu += mu.weight(i) * d * r;
    }
    row_tv *= 0.5;
    double col_tv = 0.0, ent_nu = 0.0, res_g = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double r = (psi[j] - psi_next[j]) / eps;
      const double d = std::exp(r);
      col_tv += nu.weight(j) * std::abs(d - 1.0);
      ent_nu += nu.weight(j) * d * r;
      res_g = std::max(res_g, std::abs(psi[j] - psi_next[j]));
    }
    col_tv *= 0.5;

    const double marginal_tv = std::max(row_tv, col_tv);
    report.marginal_error_trace.push_back(marginal_tv);
    report.entropy_trace.push_back(ent_mu + ent_nu);
    double dual = 0.0;
    for (std::size_t i = 0; i < m; ++i) dual += mu.weight(i) * phi_next[i];
    for (std::size_t j = 0; j < n; ++j) dual += nu.weight(j) * psi[j];
    report.dual_trace.push_back(dual);
    report.iterations = t + 1;

    if (observer) observer(SinkhornState{t, phi, phi_next, psi_prev, psi, eps});

    if (marginal_tv <= tol && res_g / eps <= 10.0 * tol) {
      report.converged = true;
      report.potentials = Potentials{phi_next, psi, eps};
      report.coupling =
          coupling_from_potentials(report.potentials, C, mu, nu);
      return report;
    }
    phi = std::move(phi_next);
    psi_prev = std::move(psi);
    psi = std::move(psi_next);
  }

  report.potentials = Potentials{half_step_phi(psi, C, nu, eps), psi, eps};
  report.coupling = coupling_from_potentials(report.potentials, C, mu, nu);
  return report;
}

}  // namespace eot
