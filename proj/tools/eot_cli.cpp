// Command-line front end: single-shot solves, Sinkhorn traces, stability
// sweeps, randomized oracle cross-checks and a fixture-free selftest.
//
// Exit codes: 0 success, 1 check failure, 2 argument errors.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "eot/diagnostics.hpp"
#include "eot/harness.hpp"
#include "eot/measures.hpp"
#include "eot/metrics.hpp"
#include "eot/oracle.hpp"
#include "eot/sinkhorn.hpp"

namespace {

using namespace eot;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;
  return j;
}

struct Overrides {
  std::optional<double> eps, tol;
  std::optional<std::size_t> max_iter;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, format;
};

// Precedence: CLI flag > config file > default.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const Overrides& o) {
  if (o.eps) cfg.epsilons = {*o.eps};
  if (o.tol) cfg.solver.tol = *o.tol;
  if (o.max_iter) cfg.solver.max_iter = *o.max_iter;
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.format) cfg.output_format = *o.format;
  return cfg;
}

int run_solve(const std::string& config_path, const Overrides& o) {
  auto cfg = apply_overrides(ExperimentConfig::from_json(load_config(config_path)), o);
  const auto mu = cfg.mu.realize();
  const auto nu = cfg.nu.realize();
  const auto C = cfg.cost.realize(mu, nu);
  const double eps = cfg.epsilons.front();
  const SolveReport rep =
      solve(mu, nu, C, eps, cfg.solver.tol, cfg.solver.max_iter);
  const double dual = dual_value(rep.potentials, mu, nu);
  const double primal = primal_value(rep.coupling, C, mu, nu, eps);
  std::printf("dual %.12g\nprimal %.12g\niterations %zu\nconverged %s\n", dual,
              primal, rep.iterations, rep.converged ? "true" : "false");

  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/solve_report.json");
  out << rep.to_json().dump(2) << "\n";
  if (cfg.output_format == "csv") {
    std::ofstream csv(cfg.output_dir + "/solve_trace.csv");
    csv << rep.trace_csv();
  }
  return 0;
}

int run_trace(const std::string& config_path, const Overrides& o) {
  auto cfg = apply_overrides(ExperimentConfig::from_json(load_config(config_path)), o);
  const auto mu = cfg.mu.realize();
  const auto nu = cfg.nu.realize();
  const auto C = cfg.cost.realize(mu, nu);
  const auto trace = sinkhorn_trace(mu, nu, C, cfg.epsilons.front(),
                                    cfg.solver.tol, cfg.solver.max_iter);
  emit_report(trace, cfg.output_format, cfg.output_dir, cfg.to_json());
  std::printf("trace rows %zu written to %s\n", trace.rows.size(),
              cfg.output_dir.c_str());
  return 0;
}

int run_sweep(const std::string& config_path, const Overrides& o) {
  auto cfg = apply_overrides(ExperimentConfig::from_json(load_config(config_path)), o);
  const auto trace = stability_sweep(cfg);
  emit_report(trace, cfg.output_format, cfg.output_dir, cfg.to_json());
  std::printf("sweep rows %zu written to %s\n", trace.rows.size(),
              cfg.output_dir.c_str());
  return 0;
}

// Random tiny instance; m, n in {2..5}, atoms in [0,1]^2, positive weights.
struct SmallInstance {
  DiscreteMeasure mu, nu;
  CostMatrix C;
};

SmallInstance random_instance(std::uint64_t seed, std::size_t index) {
  auto gen = eot::detail::make_stream(seed, index, 0x0C7u);
  auto draw_measure = [&](std::size_t lo, std::size_t hi) {
    const std::size_t m = lo + gen() % (hi - lo + 1);
    std::vector<std::vector<double>> atoms(m);
    std::vector<double> w(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      atoms[i] = {eot::detail::uniform01(gen), eot::detail::uniform01(gen)};
      w[i] = 0.1 + 0.9 * eot::detail::uniform01(gen);
      sum += w[i];
    }
    for (double& v : w) v /= sum;
    return DiscreteMeasure(std::move(atoms), std::move(w));
  };
  auto mu = draw_measure(2, 5);
  auto nu = draw_measure(2, 5);
  auto C = build_cost(mu, nu, CostKind::SquaredEuclidean);
  return SmallInstance{std::move(mu), std::move(nu), std::move(C)};
}

int run_oracle_check(std::uint64_t seed, std::size_t instances) {
  int failures = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    const auto inst = random_instance(seed, k);
    const double eps = (k % 2 == 0) ? 1.0 : 0.1;
    const auto sink = solve(inst.mu, inst.nu, inst.C, eps, 1e-10);
    const auto oracle = brute_force_solve(inst.mu, inst.nu, inst.C, eps, 1e-10);
    const double tv = tv_distance_couplings(sink.coupling, oracle);
    const bool ok = sink.converged && tv <= 1e-6;
    std::printf("%s instance %zu eps=%g tv=%.3g\n", ok ? "PASS" : "FAIL", k,
                eps, tv);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}

#define SELFTEST(name, cond)                                       \
  do {                                                             \
    const bool ok_ = (cond);                                       \
    std::printf("%s %s\n", ok_ ? "PASS" : "FAIL", name);           \
    if (!ok_) ++failures;                                          \
  } while (0)

int run_selftest() {
  int failures = 0;
  auto near = [](double a, double b, double tol) {
    return std::abs(a - b) <= tol;
  };

  // cost construction
  {
    DiscreteMeasure x({{0.0}}, {1.0}), y({{0.0}}, {1.0});
    SELFTEST("cost coincident points",
             build_cost(x, y, CostKind::SquaredEuclidean)(0, 0) == 0.0);
  }
  {
    DiscreteMeasure x({{1.0, 0.0}}, {1.0}), y({{0.0, 0.0}}, {1.0});
    SELFTEST("cost unit offset",
             build_cost(x, y, CostKind::SquaredEuclidean)(0, 0) == 1.0);
  }
  {
    DiscreteMeasure x({{1.0, 2.0}}, {1.0}), y({{3.0, 5.0}}, {1.0});
    SELFTEST("cost (1,2)-(3,5)",
             build_cost(x, y, CostKind::SquaredEuclidean)(0, 0) == 13.0);
  }

  // sampling
  {
    auto m = sample_subgaussian(1, 2, SampleFamily::Gaussian, 3);
    SELFTEST("sampler single atom", m.size() == 1 && m.weight(0) == 1.0);
    auto m4 = sample_subgaussian(4, 2, SampleFamily::Gaussian, 7);
    bool uniform = true;
    for (std::size_t i = 0; i < 4; ++i)
      uniform = uniform && near(m4.weight(i), 0.25, 1e-15);
    SELFTEST("sampler uniform weights", uniform);
  }

  // perturbation
  {
    DiscreteMeasure base({{0.0}, {1.0}}, {0.5, 0.5});
    PerturbationSpec spec;
    spec.schedule = {0.0};
    SELFTEST("perturb zero delta",
             tv_distance(perturb(base, spec, 1), base) == 0.0);
    spec.schedule = {0.1};
    SELFTEST("perturb tv bound",
             tv_distance(perturb(base, spec, 1), base) <= 0.1 + 1e-15);
  }

  // half steps
  {
    DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
    DiscreteMeasure nu({{0.5}}, {1.0});
    CostMatrix C0(2, 1, {0.0, 0.0});
    auto psi = half_step_psi({0.0, 0.0}, C0, mu, 1.0);
    SELFTEST("half step zero cost", near(psi[0], 0.0, 1e-15));
    CostMatrix C(2, 1, {0.0, 1.0});
    psi = half_step_psi({0.0, 0.0}, C, mu, 1.0);
    SELFTEST("half step two-atom",
             near(psi[0], -std::log(0.5 + 0.5 * std::exp(-1.0)), 1e-12));
  }

  // solve on degenerate instances
  {
    DiscreteMeasure mu({{0.0}, {1.0}}, {0.4, 0.6});
    DiscreteMeasure nu({{0.0}, {2.0}}, {0.7, 0.3});
    CostMatrix C0(2, 2, {0.0, 0.0, 0.0, 0.0});
    auto rep = solve(mu, nu, C0, 1.0);
    bool product = rep.converged && rep.iterations == 1;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        product = product && near(rep.coupling(i, j),
                                  mu.weight(i) * nu.weight(j), 1e-12);
    SELFTEST("solve zero cost gives product coupling", product);

    DiscreteMeasure dx({{0.0}}, {1.0}), dy({{3.0}}, {1.0});
    CostMatrix C1(1, 1, {9.0});
    auto rep1 = solve(dx, dy, C1, 1.0);
    SELFTEST("solve point masses",
             near(rep1.coupling(0, 0), 1.0, 1e-12) &&
                 near(rep1.potentials.f[0] + rep1.potentials.g[0], 9.0, 1e-9));
  }

  // metrics
  {
    DiscreteMeasure p({{0.0}, {1.0}}, {0.5, 0.5});
    DiscreteMeasure q({{0.0}, {1.0}}, {0.7, 0.3});
    SELFTEST("tv same measure", tv_distance(p, p) == 0.0);
    SELFTEST("tv weight shift", near(tv_distance(p, q), 0.2, 1e-15));
    DiscreteMeasure r({{2.0}, {3.0}}, {0.5, 0.5});
    SELFTEST("tv disjoint support", near(tv_distance(p, r), 1.0, 1e-15));
    SELFTEST("kl identical", relative_entropy(p, p) == 0.0);
    SELFTEST("kl missing mass", std::isinf(relative_entropy(p, r)));
    SELFTEST("ky fan identical", ky_fan({1.0, 2.0}, {1.0, 2.0}, p) == 0.0);
  }

  // normalization
  {
    DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
    auto n0 = normalize(Potentials{{0.0, 0.0}, {0.0}, 1.0}, mu, 0.0);
    SELFTEST("normalize identity shift",
             near(n0.potentials.f[0], 0.0, 1e-10));
    auto n1 = normalize(Potentials{{1.0, 1.0}, {0.0}, 1.0}, mu, 0.0);
    SELFTEST("normalize constant f", near(n1.potentials.f[0], 0.0, 1e-10));
    auto n2 = normalize(Potentials{{0.0, 2.0}, {0.0}, 1.0}, mu, 0.0);
    SELFTEST("normalize symmetric pair", near(n2.potentials.f[0], -1.0, 1e-10));
  }

  // oracle
  {
    DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
    DiscreteMeasure nu({{0.0}, {1.0}}, {0.5, 0.5});
    CostMatrix C(2, 2, {0.0, 1.0, 1.0, 0.0});
    auto pi = brute_force_solve(mu, nu, C, 1.0, 1e-12);
    const double t = std::exp(1.0) / (2.0 * (1.0 + std::exp(1.0)));
    SELFTEST("oracle symmetric 2x2", near(pi(0, 0), t, 1e-9));
  }

  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete entropic optimal transport toolkit"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;
  std::uint64_t check_seed = 7;
  std::size_t check_instances = 20;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--eps", o.eps, "regularization parameter");
    cmd->add_option("--tol", o.tol, "marginal TV tolerance");
    cmd->add_option("--max-iter", o.max_iter, "iteration cap");
    cmd->add_option("--seed", o.seed, "seed override");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--format", o.format, "csv or json");
  };

  auto* solve_cmd = app.add_subcommand("solve", "single entropic OT solve");
  add_common(solve_cmd, true);
  auto* trace_cmd = app.add_subcommand("trace", "Sinkhorn iteration trace");
  add_common(trace_cmd, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "marginal stability sweep");
  add_common(sweep_cmd, true);
  auto* oracle_cmd =
      app.add_subcommand("oracle-check", "randomized oracle equivalence");
  oracle_cmd->add_option("--seed", check_seed, "instance seed");
  oracle_cmd->add_option("--instances", check_instances, "instance count");
  app.add_subcommand("selftest", "built-in checks, no fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("solve")) return run_solve(config_path, o);
    if (app.got_subcommand("trace")) return run_trace(config_path, o);
    if (app.got_subcommand("sweep")) return run_sweep(config_path, o);
    if (app.got_subcommand("oracle-check"))
      return run_oracle_check(check_seed, check_instances);
    if (app.got_subcommand("selftest")) return run_selftest();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
