#pragma once

// Discrete marginals, cost matrices and controlled perturbations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

namespace eot {

using json = nlohmann::json;

namespace detail {

// Round to 12 significant digits; used as the canonical identity of an atom
// coordinate so cross-support matching does not depend on float noise.
inline std::string canonical_coord(double v) {
  if (v == 0.0) v = 0.0;  // fold -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.11e", v);
  return std::string(buf);
}

inline std::string atom_key(const std::vector<double>& atom) {
  std::string key;
  for (double v : atom) {
    key += canonical_coord(v);
    key += ',';
  }
  return key;
}

// Uniform on (0,1), bit-reproducible: mt19937_64 output mapped explicitly.
inline double uniform01(std::mt19937_64& gen) {
  return (static_cast<double>(gen() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double standard_normal(std::mt19937_64& gen) {
  const double u1 = uniform01(gen);
  const double u2 = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index,
                                   std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

}  // namespace detail

// Probability measure on finitely many distinct points in R^d.
// Weights are strictly positive and sum to one; zero-weight atoms are
// stripped at construction.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<std::vector<double>> atoms,
                  std::vector<double> weights) {
    if (atoms.size() != weights.size())
      throw std::invalid_argument("measure: atoms/weights length mismatch");
    if (atoms.empty())
      throw std::invalid_argument("measure: needs at least one atom");

    const std::size_t dim = atoms.front().size();
    double sum = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (atoms[i].size() != dim)
        throw std::invalid_argument("measure: inconsistent atom dimension");
      if (weights[i] < 0.0 || !std::isfinite(weights[i]))
        throw std::invalid_argument("measure: negative or non-finite weight");
      if (weights[i] > 0.0) {
        atoms_.push_back(std::move(atoms[i]));
        weights_.push_back(weights[i]);
        sum += weights[i];
      }
    }
    if (atoms_.empty())
      throw std::invalid_argument("measure: all weights are zero");
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("measure: weights must sum to 1");
    for (double& w : weights_) w /= sum;

    std::unordered_set<std::string> seen;
    keys_.reserve(atoms_.size());
    for (const auto& a : atoms_) {
      keys_.push_back(detail::atom_key(a));
      if (!seen.insert(keys_.back()).second)
        throw std::invalid_argument("measure: duplicate atom " + keys_.back());
    }
  }

  std::size_t size() const { return atoms_.size(); }
  std::size_t dim() const { return atoms_.front().size(); }
  const std::vector<double>& atom(std::size_t i) const { return atoms_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<std::vector<double>>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::string& atom_key(std::size_t i) const { return keys_[i]; }

  // Exact support identity up to canonical rounding, in order.
  bool same_support(const DiscreteMeasure& other) const {
    return keys_ == other.keys_;
  }

  json to_json() const {
    return json{{"atoms", atoms_}, {"weights", weights_}};
  }

  static DiscreteMeasure from_json(const json& j) {
    return DiscreteMeasure(j.at("atoms").get<std::vector<std::vector<double>>>(),
                           j.at("weights").get<std::vector<double>>());
  }

 private:
  std::vector<std::vector<double>> atoms_;
  std::vector<double> weights_;
  std::vector<std::string> keys_;
};

// Dense m x n nonnegative cost matrix tied to the atoms of two measures.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_)
      throw std::invalid_argument("cost: shape/value count mismatch");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("cost: entries must be finite and >= 0");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * cols_ + j];
  }
  const std::vector<double>& values() const { return values_; }

  double max_entry() const {
    return *std::max_element(values_.begin(), values_.end());
  }

  json to_json() const {
    std::vector<std::vector<double>> m(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      m[i].assign(values_.begin() + i * cols_, values_.begin() + (i + 1) * cols_);
    return json{{"values", m}};
  }

  static CostMatrix from_json(const json& j) {
    auto m = j.at("values").get<std::vector<std::vector<double>>>();
    return from_rows(m);
  }

  static CostMatrix from_rows(const std::vector<std::vector<double>>& m) {
    if (m.empty()) throw std::invalid_argument("cost: empty matrix");
    std::size_t cols = m.front().size();
    std::vector<double> flat;
    flat.reserve(m.size() * cols);
    for (const auto& row : m) {
      if (row.size() != cols)
        throw std::invalid_argument("cost: ragged rows");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return CostMatrix(m.size(), cols, std::move(flat));
  }

  std::string to_csv() const {
    std::string out;
    char buf[40];
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", (*this)(i, j));
        out += buf;
        out += (j + 1 < cols_) ? ',' : '\n';
      }
    }
    return out;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> values_;
};

enum class CostKind { SquaredEuclidean, Euclidean };

inline CostMatrix build_cost(const DiscreteMeasure& X, const DiscreteMeasure& Y,
                             CostKind kind) {
  if (X.dim() != Y.dim())
    throw std::invalid_argument("build_cost: atom dimension mismatch");
  std::vector<double> values(X.size() * Y.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < Y.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < X.dim(); ++k) {
        const double d = X.atom(i)[k] - Y.atom(j)[k];
        s += d * d;
      }
      values[i * Y.size() + j] =
          (kind == CostKind::SquaredEuclidean) ? s : std::sqrt(s);
    }
  }
  return CostMatrix(X.size(), Y.size(), std::move(values));
}

inline CostMatrix build_cost(const DiscreteMeasure& X, const DiscreteMeasure& Y,
                             const std::vector<std::vector<double>>& user) {
  auto C = CostMatrix::from_rows(user);
  if (C.rows() != X.size() || C.cols() != Y.size())
    throw std::invalid_argument("build_cost: user matrix shape mismatch");
  return C;
}

enum class SampleFamily { Gaussian, GaussianMixture, UniformBox };

// Empirical measure of n_atoms i.i.d. draws with uniform weights.
inline DiscreteMeasure sample_subgaussian(std::size_t n_atoms, std::size_t d,
                                          SampleFamily family,
                                          std::uint64_t seed) {
  if (n_atoms < 1 || d < 1)
    throw std::invalid_argument("sample_subgaussian: invalid counts");
  auto gen = detail::make_stream(seed, 0, 0xA70u);
  std::vector<std::vector<double>> atoms(n_atoms, std::vector<double>(d));
  for (auto& a : atoms) {
    switch (family) {
      case SampleFamily::Gaussian:
        for (double& x : a) x = detail::standard_normal(gen);
        break;
      case SampleFamily::GaussianMixture: {
        const double center = detail::uniform01(gen) < 0.5 ? -1.5 : 1.5;
        for (double& x : a) x = center + 0.5 * detail::standard_normal(gen);
        break;
      }
      case SampleFamily::UniformBox:
        for (double& x : a) x = 2.0 * detail::uniform01(gen) - 1.0;
        break;
    }
  }
  return DiscreteMeasure(std::move(atoms),
                         std::vector<double>(n_atoms, 1.0 / double(n_atoms)));
}

enum class PerturbMode { WeightJitter, SupportJitter };

// Controlled marginal perturbation. Weight-jitter keeps the support fixed
// (so base and perturbed measures stay mutually absolutely continuous) and
// moves at most schedule[n-1] of mass in total variation; support-jitter
// keeps weights fixed and displaces each atom by at most schedule[n-1].
struct PerturbationSpec {
  PerturbMode mode = PerturbMode::WeightJitter;
  std::vector<double> schedule;  // strictly decreasing toward 0
  std::uint64_t seed = 0;
  double floor = 0.5;  // weight-jitter: keep weights >= floor * min weight

  void validate(std::size_t n_atoms) const {
    for (std::size_t i = 0; i + 1 < schedule.size(); ++i)
      if (schedule[i] <= schedule[i + 1] && schedule[i + 1] != 0.0)
        throw std::invalid_argument("perturbation: schedule not decreasing");
    for (double d : schedule)
      if (d < 0.0) throw std::invalid_argument("perturbation: negative delta");
    (void)n_atoms;
    if (mode == PerturbMode::WeightJitter && (floor <= 0.0 || floor > 1.0))
      throw std::invalid_argument("perturbation: floor out of range");
  }
};

inline DiscreteMeasure perturb(const DiscreteMeasure& base,
                               const PerturbationSpec& spec, std::size_t n) {
  if (n < 1 || n > spec.schedule.size())
    throw std::out_of_range("perturb: schedule exhausted at index " +
                            std::to_string(n));
  spec.validate(base.size());
  const double delta = spec.schedule[n - 1];
  if (delta == 0.0) return base;

  const std::size_t m = base.size();

  if (spec.mode == PerturbMode::WeightJitter) {
    auto gen = detail::make_stream(spec.seed, n, 0x317u);
    std::vector<double> xi(m);
    double mean = 0.0;
    for (double& x : xi) {
      x = 2.0 * detail::uniform01(gen) - 1.0;
      mean += x;
    }
    mean /= double(m);
    double tvnorm = 0.0;
    for (double& x : xi) {
      x -= mean;
      tvnorm += std::abs(x);
    }
    tvnorm *= 0.5;
    if (tvnorm == 0.0) return base;

    const double minw =
        *std::min_element(base.weights().begin(), base.weights().end());
    const double lo = spec.floor * minw;
    std::vector<double> w(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = std::max(base.weight(i) + delta * xi[i] / tvnorm, lo);
      sum += w[i];
    }
    for (double& v : w) v /= sum;

    // Clamping and renormalization can push total variation past delta;
    // contract toward the base until the bound holds exactly.
    double tv = 0.0;
    for (std::size_t i = 0; i < m; ++i) tv += std::abs(w[i] - base.weight(i));
    tv *= 0.5;
    if (tv > delta) {
      const double scale = delta / tv;
      for (std::size_t i = 0; i < m; ++i)
        w[i] = base.weight(i) + scale * (w[i] - base.weight(i));
    }
    return DiscreteMeasure(base.atoms(), std::move(w));
  }

  // Support-jitter: displace each atom by a deterministic vector of norm
  // exactly delta; weights unchanged.
  auto gen = detail::make_stream(spec.seed, n, 0x51Fu);
  const std::size_t d = base.dim();
  std::vector<std::vector<double>> atoms = base.atoms();
  for (auto& a : atoms) {
    std::vector<double> dir(d);
    double norm = 0.0;
    for (double& x : dir) {
      x = detail::standard_normal(gen);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) a[k] += delta * dir[k] / norm;
  }
  return DiscreteMeasure(std::move(atoms), base.weights());
}

}  // namespace eot
