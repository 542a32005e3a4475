#pragma once

// Distances used to state convergence: total variation, relative entropy,
// the Ky Fan metric (convergence in probability), Kolmogorov distance of
// pushforwards (convergence in distribution) and a fixed bounded-Lipschitz
// dictionary as a weak-convergence surrogate for couplings.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "eot/measures.hpp"
#include "eot/sinkhorn.hpp"

namespace eot {

inline constexpr const char* kBlDictionaryVersion = "bl-dict-v1";

inline double tv_distance(const DiscreteMeasure& p, const DiscreteMeasure& q) {
  std::map<std::string, double> diff;
  for (std::size_t i = 0; i < p.size(); ++i) diff[p.atom_key(i)] += p.weight(i);
  for (std::size_t j = 0; j < q.size(); ++j) diff[q.atom_key(j)] -= q.weight(j);
  double s = 0.0;
  for (const auto& [key, d] : diff) s += std::abs(d);
  return 0.5 * s;
}

inline double tv_distance_couplings(const Coupling& a, const Coupling& b) {
  std::map<std::string, double> diff;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      diff[a.source().atom_key(i) + "|" + a.target().atom_key(j)] += a(i, j);
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      diff[b.source().atom_key(i) + "|" + b.target().atom_key(j)] -= b(i, j);
  double s = 0.0;
  for (const auto& [key, d] : diff) s += std::abs(d);
  return 0.5 * s;
}

namespace detail {

// KL over aligned weight vectors; +inf when p charges an atom q does not.
inline double kl(const std::map<std::string, double>& p,
                 const std::map<std::string, double>& q) {
  double s = 0.0;
  for (const auto& [key, pw] : p) {
    if (pw == 0.0) continue;
    auto it = q.find(key);
    if (it == q.end() || it->second <= 0.0)
      return std::numeric_limits<double>::infinity();
    s += pw * std::log(pw / it->second);
  }
  return std::max(s, 0.0);
}

}  // namespace detail

inline double relative_entropy(const DiscreteMeasure& p,
                               const DiscreteMeasure& q) {
  std::map<std::string, double> pm, qm;
  for (std::size_t i = 0; i < p.size(); ++i) pm[p.atom_key(i)] = p.weight(i);
  for (std::size_t j = 0; j < q.size(); ++j) qm[q.atom_key(j)] = q.weight(j);
  return detail::kl(pm, qm);
}

inline double relative_entropy(const Coupling& p, const Coupling& q) {
  std::map<std::string, double> pm, qm;
  for (std::size_t i = 0; i < p.rows(); ++i)
    for (std::size_t j = 0; j < p.cols(); ++j)
      pm[p.source().atom_key(i) + "|" + p.target().atom_key(j)] = p(i, j);
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < q.cols(); ++j)
      qm[q.source().atom_key(i) + "|" + q.target().atom_key(j)] = q(i, j);
  return detail::kl(pm, qm);
}

// Ky Fan metric inf{t > 0 : mu(|f_n - f| > t) <= t}, computed exactly from
// the sorted jump points of t -> mu(|delta| > t). Vectors must be aligned
// with mu's atoms.
inline double ky_fan(const std::vector<double>& f_n,
                     const std::vector<double>& f,
                     const DiscreteMeasure& mu) {
  if (f_n.size() != mu.size() || f.size() != mu.size())
    throw std::invalid_argument("ky_fan: vectors not aligned with measure");
  std::vector<std::pair<double, double>> dm(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    dm[i] = {std::abs(f_n[i] - f[i]), mu.weight(i)};
  std::sort(dm.begin(), dm.end());

  // distinct values with masses
  std::vector<double> vals, mass;
  for (const auto& [v, w] : dm) {
    if (!vals.empty() && v == vals.back())
      mass.back() += w;
    else {
      vals.push_back(v);
      mass.push_back(w);
    }
  }
  const std::size_t K = vals.size();
  if (vals.back() == 0.0) return 0.0;

  double best = vals.back();  // tail mass above max value is 0
  // On [v_j, v_{j+1}) the tail is the mass of values >= v_{j+1}.
  double tail = 0.0;
  for (std::size_t j = K; j-- > 1;) {
    tail += mass[j];
    const double lo = vals[j - 1];
    if (tail < vals[j]) best = std::min(best, std::max(lo, tail));
  }
  // interval (0, v_0) when v_0 > 0: tail is the full mass above 0
  if (vals.front() > 0.0) {
    tail += mass[0];
    if (tail < vals.front()) best = std::min(best, tail);
  }
  return best;
}

// Kolmogorov (sup-CDF) distance between the pushforward laws (f_n)_# mu_n
// and f_# mu on the real line.
inline double pushforward_kolmogorov(const std::vector<double>& f_n,
                                     const DiscreteMeasure& mu_n,
                                     const std::vector<double>& f,
                                     const DiscreteMeasure& mu) {
  if (f_n.size() != mu_n.size() || f.size() != mu.size())
    throw std::invalid_argument("pushforward_kolmogorov: size mismatch");
  auto law = [](const std::vector<double>& vals, const DiscreteMeasure& m) {
    std::vector<std::pair<double, double>> v(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) v[i] = {vals[i], m.weight(i)};
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto a = law(f_n, mu_n), b = law(f, mu);

  // Levy distance between the two step CDFs: the plain sup-CDF gap is
  // degenerate for atomic laws (a vanishing shift of an atom keeps the gap at
  // that atom's weight), while inf{h : F(x) <= G(x+h)+h and vice versa} still
  // contracts under small value perturbations.
  auto cdf = [](const std::vector<std::pair<double, double>>& v, double t) {
    double c = 0.0;
    for (const auto& [x, w] : v) {
      if (x > t) break;
      c += w;
    }
    return c;
  };
  auto feasible = [&](double h) {
    for (double acc = 0.0; const auto& [x, w] : a) {
      acc += w;
      if (acc - cdf(b, x + h) > h) return false;
    }
    for (double acc = 0.0; const auto& [x, w] : b) {
      acc += w;
      if (acc - cdf(a, x + h) > h) return false;
    }
    return true;
  };

  if (feasible(0.0)) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

namespace detail {

// Fixed dictionary of 1-Lipschitz, sup-norm <= 1 test functions on the
// product space: per-coordinate clip and sine, a Gaussian bump, and
// half-scaled pairwise clip products. Versioned as kBlDictionaryVersion.
inline double bl_eval(std::size_t index, const std::vector<double>& z) {
  const std::size_t d = z.size();
  auto clip = [](double x) { return std::max(-1.0, std::min(1.0, x)); };
  if (index < d) return clip(z[index]);
  index -= d;
  if (index < d) return std::sin(z[index]);
  index -= d;
  if (index == 0) {
    double s = 0.0;
    for (double x : z) s += x * x;
    return std::exp(-s);
  }
  index -= 1;
  // pairwise products, k < l
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t count = d - k - 1;
    if (index < count) return 0.5 * clip(z[k]) * clip(z[k + 1 + index]);
    index -= count;
  }
  throw std::out_of_range("bl_eval: dictionary index");
}

inline std::size_t bl_size(std::size_t d) { return 2 * d + 1 + d * (d - 1) / 2; }

}  // namespace detail

// Weak-convergence surrogate: sup over the dictionary of the difference of
// integrals against the two couplings, seen as measures on R^{d_x + d_y}.
inline double bounded_lipschitz(const Coupling& a, const Coupling& b) {
  const std::size_t d = a.source().dim() + a.target().dim();
  if (d != b.source().dim() + b.target().dim())
    throw std::invalid_argument("bounded_lipschitz: dimension mismatch");
  auto integrate = [&](const Coupling& c, std::size_t idx) {
    double s = 0.0;
    std::vector<double> z(d);
    for (std::size_t i = 0; i < c.rows(); ++i) {
      for (std::size_t j = 0; j < c.cols(); ++j) {
        if (c(i, j) == 0.0) continue;
        const auto& x = c.source().atom(i);
        const auto& y = c.target().atom(j);
        std::copy(x.begin(), x.end(), z.begin());
        std::copy(y.begin(), y.end(), z.begin() + x.size());
        s += c(i, j) * detail::bl_eval(idx, z);
      }
    }
    return s;
  };
  double sup = 0.0;
  for (std::size_t idx = 0; idx < detail::bl_size(d); ++idx)
    sup = std::max(sup, std::abs(integrate(a, idx) - integrate(b, idx)));
  return sup;
}

}  // namespace eot
