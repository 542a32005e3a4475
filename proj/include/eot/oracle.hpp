#pragma once

// Brute-force reference solver for tiny entropic OT instances. Cyclic
// coordinate descent over the (m-1)(n-1) free cells of the transport
// polytope, each line minimized by golden-section search. Algorithmically
// disjoint from the Sinkhorn fixed point, so agreement between the two is
// meaningful evidence.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eot/diagnostics.hpp"
#include "eot/measures.hpp"
#include "eot/sinkhorn.hpp"

namespace eot {

namespace detail {

// Objective contribution of a single cell: c*x + eps * x log(x / ref).
inline double cell_obj(double x, double c, double ref, double eps) {
  if (x <= 0.0) return 0.0;
  return c * x + eps * x * std::log(x / ref);
}

}  // namespace detail

// Minimizes <c, pi> + eps H(pi | mu x nu) over the transport polytope.
// Capped at m*n <= 25 cells; the interior start pi = mu x nu keeps all
// iterates strictly positive.
inline Coupling brute_force_solve(const DiscreteMeasure& mu,
                                  const DiscreteMeasure& nu,
                                  const CostMatrix& C, double eps,
                                  double tol = 1e-10) {
  const std::size_t m = mu.size(), n = nu.size();
  if (m != C.rows() || n != C.cols())
    throw std::invalid_argument("brute_force_solve: shape mismatch");
  if (m * n > 25)
    throw std::invalid_argument("brute_force_solve: size cap m*n <= 25");

  std::vector<double> pi(m * n);
  std::vector<double> ref(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      pi[i * n + j] = ref[i * n + j] = mu.weight(i) * nu.weight(j);

  if (m == 1 || n == 1) return Coupling(std::move(pi), mu, nu);

  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return pi[i * n + j];
  };
  const std::size_t li = m - 1, lj = n - 1;  // slack row/column

  // Change along the rectangle move of free cell (i,j):
  //   +t at (i,j) and (li,lj), -t at (i,lj) and (li,j).
  auto line_obj = [&](std::size_t i, std::size_t j, double t) {
    double s = 0.0;
    s += detail::cell_obj(at(i, j) + t, C(i, j), ref[i * n + j], eps);
    s += detail::cell_obj(at(li, lj) + t, C(li, lj), ref[li * n + lj], eps);
    s += detail::cell_obj(at(i, lj) - t, C(i, lj), ref[i * n + lj], eps);
    s += detail::cell_obj(at(li, j) - t, C(li, j), ref[li * n + j], eps);
    return s;
  };

  const double golden = 0.61803398874989484820;
  const std::size_t max_sweeps = 200000;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_grad = 0.0;
    for (std::size_t i = 0; i < li; ++i) {
      for (std::size_t j = 0; j < lj; ++j) {
        double lo = std::max(-at(i, j), -at(li, lj));
        double hi = std::min(at(i, lj), at(li, j));
        if (hi - lo <= 0.0) continue;

        double a = lo, b = hi;
        double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
        double f1 = line_obj(i, j, x1), f2 = line_obj(i, j, x2);
        while (b - a > 1e-16) {
          if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = line_obj(i, j, x1);
          } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = line_obj(i, j, x2);
          }
        }
        const double t = 0.5 * (a + b);
        at(i, j) += t;
        at(li, lj) += t;
        at(i, lj) -= t;
        at(li, j) -= t;
      }
    }
    // Optimality: projected directional derivatives vanish on all free cells.
    for (std::size_t i = 0; i < li; ++i) {
      for (std::size_t j = 0; j < lj; ++j) {
        const double g =
            C(i, j) - C(i, lj) - C(li, j) + C(li, lj) +
            eps * (std::log(at(i, j) / ref[i * n + j]) -
                   std::log(at(i, lj) / ref[i * n + lj]) -
                   std::log(at(li, j) / ref[li * n + j]) +
                   std::log(at(li, lj) / ref[li * n + lj]));
        max_grad = std::max(max_grad, std::abs(g));
      }
    }
    if (max_grad <= tol) break;
  }
  return Coupling(std::move(pi), mu, nu);
}

// Recover (f, g) from eps*log(pi_ij/(mu_i nu_j)) + c_ij by the additive
// two-way decomposition (exact when the log-density is separable), then
// normalize at alpha = 0. A large separability residual signals that pi is
// not an entropic optimizer.
inline Potentials potentials_from_coupling(const Coupling& pi,
                                           const CostMatrix& C,
                                           const DiscreteMeasure& mu,
                                           const DiscreteMeasure& nu,
                                           double eps,
                                           double residual_threshold = 1e-6) {
  const std::size_t m = pi.rows(), n = pi.cols();
  std::vector<double> L(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double mass = pi(i, j);
      if (mass <= 0.0)
        throw std::invalid_argument(
            "potentials_from_coupling: coupling must be strictly positive");
      L[i * n + j] =
          eps * std::log(mass / (mu.weight(i) * nu.weight(j))) + C(i, j);
    }
  }
  std::vector<double> f(m, 0.0), g(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      f[i] += L[i * n + j] / double(n);
      g[j] += L[i * n + j] / double(m);
      grand += L[i * n + j] / double(m * n);
    }
  for (double& v : g) v -= grand;

  double residual = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      residual = std::max(residual, std::abs(f[i] + g[j] - L[i * n + j]));
  if (residual > residual_threshold)
    throw std::runtime_error(
        "potentials_from_coupling: log-density not separable (residual " +
        std::to_string(residual) + ")");

  // damp extraction noise: a few contraction steps of the dual fixed point
  for (int it = 0; it < 4; ++it) {
    g = half_step_psi(f, C, mu, eps);
    f = half_step_phi(g, C, nu, eps);
  }

  return normalize(Potentials{std::move(f), std::move(g), eps}, mu, 0.0)
      .potentials;
}

}  // namespace eot
