#pragma once

// Experiment orchestration: marginal-perturbation stability sweeps and
// Sinkhorn-iterate convergence traces, emitted as deterministic CSV/JSON.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eot/diagnostics.hpp"
#include "eot/measures.hpp"
#include "eot/metrics.hpp"
#include "eot/oracle.hpp"
#include "eot/sinkhorn.hpp"

namespace eot {

struct SamplerSpec {
  SampleFamily family = SampleFamily::Gaussian;
  std::size_t n_atoms = 10;
  std::size_t dim = 2;
  std::uint64_t seed = 0;
};

struct MarginalSpec {
  std::optional<DiscreteMeasure> inline_measure;
  std::optional<SamplerSpec> sampler;

  DiscreteMeasure realize() const {
    if (inline_measure) return *inline_measure;
    if (sampler)
      return sample_subgaussian(sampler->n_atoms, sampler->dim,
                                sampler->family, sampler->seed);
    throw std::invalid_argument("marginal spec: neither inline nor sampler");
  }
};

struct CostSpec {
  std::string kind = "sqeuclidean";  // sqeuclidean | euclidean | matrix
  std::vector<std::vector<double>> values;  // for kind == matrix

  CostMatrix realize(const DiscreteMeasure& X, const DiscreteMeasure& Y) const {
    if (kind == "sqeuclidean") return build_cost(X, Y, CostKind::SquaredEuclidean);
    if (kind == "euclidean") return build_cost(X, Y, CostKind::Euclidean);
    if (kind == "matrix") return build_cost(X, Y, values);
    throw std::invalid_argument("cost spec: unknown kind " + kind);
  }
};

struct SolverSpec {
  double tol = 1e-9;
  std::size_t max_iter = 100000;
};

struct ExperimentConfig {
  MarginalSpec mu, nu;
  CostSpec cost;
  std::vector<double> epsilons{1.0};
  PerturbationSpec perturbation;
  SolverSpec solver;
  std::vector<std::string> metrics{
      "tv_couplings",    "ky_fan_f",   "ky_fan_g",      "pushforward_kolmogorov",
      "bounded_lipschitz", "dual_gap", "mean_f_gap",    "sup_f_gap"};
  std::string output_dir = "out";
  std::string output_format = "csv";
  std::uint64_t seed = 0;

  static ExperimentConfig from_json(const json& j);
  json to_json() const;
};

struct TraceRow {
  std::size_t index = 0;  // perturbation index n or iteration
  double eps = 1.0;
  std::string metric;
  double value = 0.0;
  bool converged = true;
  int condition_ref = -1;  // index into ConvergenceTrace::conditions
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  std::vector<json> conditions;  // ConditionReport snapshots
  json meta;

  void add(std::size_t index, double eps, const std::string& metric,
           double value, bool converged, int cond = -1) {
    rows.push_back(TraceRow{index, eps, metric, value, converged, cond});
  }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fmt_double(double v) {
  char buf[40];
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline json ExperimentConfig::to_json() const {
  json jm, jn;
  auto marg = [](const MarginalSpec& s) {
    if (s.inline_measure) return s.inline_measure->to_json();
    json j;
    const char* fam = s.sampler->family == SampleFamily::Gaussian ? "gaussian"
                      : s.sampler->family == SampleFamily::GaussianMixture
                          ? "gaussian-mixture"
                          : "uniform-box";
    j["sampler"] = json{{"family", fam},
                        {"n_atoms", s.sampler->n_atoms},
                        {"dim", s.sampler->dim},
                        {"seed", s.sampler->seed}};
    return j;
  };
  json jc{{"kind", cost.kind}};
  if (cost.kind == "matrix") jc["values"] = cost.values;
  return json{
      {"marginals", json{{"mu", marg(mu)}, {"nu", marg(nu)}}},
      {"cost", jc},
      {"epsilons", epsilons},
      {"perturbation",
       json{{"mode", perturbation.mode == PerturbMode::WeightJitter
                         ? "weight-jitter"
                         : "support-jitter"},
            {"schedule", perturbation.schedule},
            {"seed", perturbation.seed},
            {"floor", perturbation.floor}}},
      {"solver", json{{"tol", solver.tol}, {"max_iter", solver.max_iter}}},
      {"metrics", metrics},
      {"output", json{{"dir", output_dir}, {"format", output_format}}},
      {"seed", seed}};
}

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  auto marg = [](const json& jm) {
    MarginalSpec s;
    if (jm.contains("sampler")) {
      const auto& js = jm.at("sampler");
      SamplerSpec sp;
      const std::string fam = js.value("family", "gaussian");
      if (fam == "gaussian")
        sp.family = SampleFamily::Gaussian;
      else if (fam == "gaussian-mixture")
        sp.family = SampleFamily::GaussianMixture;
      else if (fam == "uniform-box")
        sp.family = SampleFamily::UniformBox;
      else
        throw std::invalid_argument("config: unknown sampler family " + fam);
      sp.n_atoms = js.value("n_atoms", std::size_t(10));
      sp.dim = js.value("dim", std::size_t(2));
      sp.seed = js.value("seed", std::uint64_t(0));
      s.sampler = sp;
    } else {
      s.inline_measure = DiscreteMeasure::from_json(jm);
    }
    return s;
  };
  const auto& jm = j.at("marginals");
  cfg.mu = marg(jm.at("mu"));
  cfg.nu = marg(jm.at("nu"));
  const auto& jc = j.at("cost");
  cfg.cost.kind = jc.value("kind", "sqeuclidean");
  if (cfg.cost.kind == "matrix")
    cfg.cost.values = jc.at("values").get<std::vector<std::vector<double>>>();
  cfg.epsilons = j.value("epsilons", std::vector<double>{1.0});
  for (double e : cfg.epsilons)
    if (e <= 0.0) throw std::invalid_argument("config: eps must be > 0");
  if (j.contains("perturbation")) {
    const auto& jp = j.at("perturbation");
    const std::string mode = jp.value("mode", "weight-jitter");
    cfg.perturbation.mode = mode == "support-jitter"
                                ? PerturbMode::SupportJitter
                                : PerturbMode::WeightJitter;
    cfg.perturbation.schedule =
        jp.value("schedule", std::vector<double>{});
    cfg.perturbation.seed = jp.value("seed", std::uint64_t(0));
    cfg.perturbation.floor = jp.value("floor", 0.5);
  }
  if (j.contains("solver")) {
    cfg.solver.tol = j.at("solver").value("tol", 1e-9);
    cfg.solver.max_iter = j.at("solver").value("max_iter", std::size_t(100000));
  }
  if (j.contains("metrics"))
    cfg.metrics = j.at("metrics").get<std::vector<std::string>>();
  if (cfg.metrics.empty())
    throw std::invalid_argument("config: at least one metric required");
  if (j.contains("output")) {
    cfg.output_dir = j.at("output").value("dir", "out");
    cfg.output_format = j.at("output").value("format", "csv");
  }
  cfg.seed = j.value("seed", std::uint64_t(0));
  return cfg;
}

namespace detail {

inline const double kInf = std::numeric_limits<double>::infinity();

inline double mean_against(const std::vector<double>& v,
                           const DiscreteMeasure& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * v[i];
  return s;
}

}  // namespace detail

// One solve per (eps, n): perturb both marginals, solve, normalize at
// alpha = 0 and record every configured metric against the unperturbed
// reference solved at tol/10. Solver non-convergence flags the row group
// instead of aborting the sweep.
inline ConvergenceTrace stability_sweep(const ExperimentConfig& cfg) {
  const DiscreteMeasure mu0 = cfg.mu.realize();
  const DiscreteMeasure nu0 = cfg.nu.realize();
  const std::vector<double> betas{1.0};
  const std::vector<double> tail_levels{1.0, 2.0, 4.0, 8.0};

  ConvergenceTrace trace;
  trace.meta = json{{"kind", "stability_sweep"},
                    {"bl_dictionary_version", kBlDictionaryVersion}};

  auto want = [&](const std::string& name) {
    return std::find(cfg.metrics.begin(), cfg.metrics.end(), name) !=
           cfg.metrics.end();
  };

  for (double eps : cfg.epsilons) {
    const CostMatrix C0 = cfg.cost.realize(mu0, nu0);
    const SolveReport ref = solve(mu0, nu0, C0, eps, cfg.solver.tol / 10.0,
                                  cfg.solver.max_iter);
    if (!ref.converged)
      throw std::runtime_error("stability_sweep: reference solve did not converge");
    const auto refp = normalize(ref.potentials, mu0, 0.0).potentials;
    const double ref_dual = dual_value(refp, mu0, nu0);
    const double ref_mean_f = detail::mean_against(refp.f, mu0);

    // Split each step's budget across the two marginals (independent jitter
    // streams), so the pair (mu_n, nu_n) moves by at most delta_n in total.
    PerturbationSpec mu_spec = cfg.perturbation;
    PerturbationSpec nu_spec = cfg.perturbation;
    mu_spec.seed = cfg.perturbation.seed * 2654435761u + 1u;
    nu_spec.seed = cfg.perturbation.seed * 2654435761u + 2u;
    for (double& d : mu_spec.schedule) d *= 0.5;
    for (double& d : nu_spec.schedule) d *= 0.5;

    for (std::size_t n = 1; n <= cfg.perturbation.schedule.size(); ++n) {
      const DiscreteMeasure mun = perturb(mu0, mu_spec, n);
      const DiscreteMeasure nun = perturb(nu0, nu_spec, n);
      const CostMatrix C = cfg.cost.kind == "matrix"
                               ? C0
                               : cfg.cost.realize(mun, nun);
      const SolveReport rep =
          solve(mun, nun, C, eps, cfg.solver.tol, cfg.solver.max_iter);
      const auto pn = normalize(rep.potentials, mun, 0.0).potentials;
      const bool ok = rep.converged;
      const bool shared = mun.same_support(mu0) && nun.same_support(nu0);

      const int cond_ref = static_cast<int>(trace.conditions.size());
      trace.conditions.push_back(
          condition_report(pn, mun, nun, mu0, nu0, C, betas, tail_levels)
              .to_json());

      if (want("tv_couplings"))
        trace.add(n, eps, "tv_couplings",
                  tv_distance_couplings(rep.coupling, ref.coupling), ok,
                  cond_ref);
      if (want("ky_fan_f"))
        trace.add(n, eps, "ky_fan_f",
                  shared ? ky_fan(pn.f, refp.f, mu0) : detail::kInf, ok,
                  cond_ref);
      if (want("ky_fan_g"))
        trace.add(n, eps, "ky_fan_g",
                  shared ? ky_fan(pn.g, refp.g, nu0) : detail::kInf, ok,
                  cond_ref);
      if (want("pushforward_kolmogorov"))
        trace.add(n, eps, "pushforward_kolmogorov",
                  pushforward_kolmogorov(pn.f, mun, refp.f, mu0), ok, cond_ref);
      if (want("bounded_lipschitz"))
        trace.add(n, eps, "bounded_lipschitz",
                  bounded_lipschitz(rep.coupling, ref.coupling), ok, cond_ref);
      if (want("dual_gap"))
        trace.add(n, eps, "dual_gap",
                  std::abs(dual_value(pn, mun, nun) - ref_dual), ok, cond_ref);
      if (want("mean_f_gap"))
        trace.add(n, eps, "mean_f_gap",
                  std::abs(detail::mean_against(pn.f, mun) - ref_mean_f), ok,
                  cond_ref);
      if (want("sup_f_gap")) {
        double sup = detail::kInf;
        if (shared) {
          sup = 0.0;
          for (std::size_t i = 0; i < pn.f.size(); ++i)
            sup = std::max(sup, std::abs(pn.f[i] - refp.f[i]));
        }
        trace.add(n, eps, "sup_f_gap", sup, ok, cond_ref);
      }
    }
  }
  std::stable_sort(trace.rows.begin(), trace.rows.end(),
                   [](const TraceRow& a, const TraceRow& b) {
                     if (a.eps != b.eps) return a.eps < b.eps;
                     if (a.index != b.index) return a.index < b.index;
                     return a.metric < b.metric;
                   });
  return trace;
}

// Per-iteration record of the Sinkhorn run: entropy of the iterate
// marginals, TV to a reference solved at tol/100, dual value and the
// exponential-moment hypothesis at the configured beta.
inline ConvergenceTrace sinkhorn_trace(const DiscreteMeasure& mu,
                                       const DiscreteMeasure& nu,
                                       const CostMatrix& C, double eps,
                                       double tol = 1e-9,
                                       std::size_t max_iter = 100000,
                                       double beta = 1.0) {
  const SolveReport ref = solve(mu, nu, C, eps, tol / 100.0, max_iter);
  if (!ref.converged)
    throw std::runtime_error("sinkhorn_trace: reference solve did not converge");

  ConvergenceTrace trace;
  trace.meta = json{{"kind", "sinkhorn_trace"},
                    {"beta", beta},
                    {"exp_moment", exp_moment(C, mu, nu, beta)}};

  std::vector<double> tv_rows;
  auto observer = [&](const SinkhornState& s) {
    // pi_{2t+1} = pi(phi_{t+1}, psi_t)
    const Coupling pi = coupling_from_potentials(
        Potentials{s.phi_next, s.psi, s.eps}, C, mu, nu);
    tv_rows.push_back(tv_distance_couplings(pi, ref.coupling));
  };
  const SolveReport rep = solve(mu, nu, C, eps, tol, max_iter, observer);

  for (std::size_t t = 0; t < rep.iterations; ++t) {
    trace.add(t + 1, eps, "entropy_sum", rep.entropy_trace[t], rep.converged);
    trace.add(t + 1, eps, "tv_to_ref", tv_rows[t], rep.converged);
    trace.add(t + 1, eps, "dual_value", rep.dual_trace[t], rep.converged);
  }
  trace.add(0, eps, "exp_moment", exp_moment(C, mu, nu, beta), rep.converged);
  std::stable_sort(trace.rows.begin(), trace.rows.end(),
                   [](const TraceRow& a, const TraceRow& b) {
                     if (a.index != b.index) return a.index < b.index;
                     return a.metric < b.metric;
                   });
  return trace;
}

// CSV columns exactly: index, metric, value, converged. Byte-identical
// across re-runs with identical config.
inline std::string trace_to_csv(const ConvergenceTrace& trace) {
  std::string out = "index,metric,value,converged\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.index);
    out += ',';
    out += r.metric;
    out += ',';
    out += detail::fmt_double(r.value);
    out += ',';
    out += r.converged ? '1' : '0';
    out += '\n';
  }
  return out;
}

inline json trace_to_json(const ConvergenceTrace& trace) {
  json rows = json::array();
  for (const auto& r : trace.rows) {
    json row{{"index", r.index},
             {"eps", r.eps},
             {"metric", r.metric},
             {"converged", r.converged},
             {"condition_ref", r.condition_ref}};
    if (std::isinf(r.value))
      row["value"] = r.value > 0 ? "inf" : "-inf";
    else
      row["value"] = r.value;
    rows.push_back(row);
  }
  return json{{"rows", rows}, {"conditions", trace.conditions},
              {"meta", trace.meta}};
}

inline void emit_report(const ConvergenceTrace& trace,
                        const std::string& format, const std::string& dir,
                        const json& config = json::object()) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("emit_report: cannot create " + dir + ": " +
                             ec.message());
  auto write = [&](const std::string& name, const std::string& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path);
    out << body;
    if (!out) throw std::runtime_error("emit_report: write failed for " + path);
  };
  if (format == "csv")
    write("report.csv", trace_to_csv(trace));
  else if (format == "json")
    write("report.json", trace_to_json(trace).dump(2) + "\n");
  else
    throw std::invalid_argument("emit_report: unknown format " + format);

  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(config.dump())));
  const json meta{{"config_hash", hash},
                  {"bl_dictionary_version", kBlDictionaryVersion},
                  {"format", format}};
  write("meta.json", meta.dump(2) + "\n");
}

}  // namespace eot
