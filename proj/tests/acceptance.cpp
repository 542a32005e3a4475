// Acceptance suite: one pass/fail line per criterion, exit 0 iff all pass.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "eot/diagnostics.hpp"
#include "eot/harness.hpp"
#include "eot/measures.hpp"
#include "eot/metrics.hpp"
#include "eot/oracle.hpp"
#include "eot/sinkhorn.hpp"

using namespace eot;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok,
            const std::string& detail = "") {
  std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion,
              name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++g_failures;
}

struct Instance {
  DiscreteMeasure mu, nu;
  CostMatrix C;
};

Instance random_instance(std::mt19937_64& gen) {
  auto draw = [&](std::size_t lo, std::size_t hi) {
    const std::size_t m = lo + gen() % (hi - lo + 1);
    std::vector<std::vector<double>> atoms(m);
    std::vector<double> w(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      atoms[i] = {eot::detail::uniform01(gen), eot::detail::uniform01(gen)};
      sum += w[i] = 0.1 + 0.9 * eot::detail::uniform01(gen);
    }
    for (double& v : w) v /= sum;
    return DiscreteMeasure(std::move(atoms), std::move(w));
  };
  auto mu = draw(2, 5);
  auto nu = draw(2, 5);
  auto C = build_cost(mu, nu, CostKind::SquaredEuclidean);
  return Instance{std::move(mu), std::move(nu), std::move(C)};
}

double squared_diameter(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  double d2 = 0.0;
  auto all = a.atoms();
  all.insert(all.end(), b.atoms().begin(), b.atoms().end());
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < all[i].size(); ++k) {
        const double d = all[i][k] - all[j][k];
        s += d * d;
      }
      d2 = std::max(d2, s);
    }
  return d2;
}

ExperimentConfig sweep_config(PerturbMode mode) {
  ExperimentConfig cfg;
  cfg.mu.sampler = SamplerSpec{SampleFamily::UniformBox, 10, 2, 41};
  cfg.nu.sampler = SamplerSpec{SampleFamily::UniformBox, 10, 2, 42};
  cfg.cost.kind = "sqeuclidean";
  cfg.epsilons = {1.0};
  cfg.perturbation.mode = mode;
  for (int n = 1; n <= 10; ++n)
    cfg.perturbation.schedule.push_back(std::pow(2.0, -n));
  cfg.perturbation.seed = 13;
  cfg.solver.tol = 1e-9;
  return cfg;
}

std::vector<double> column(const ConvergenceTrace& t,
                           const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : t.rows)
    if (r.metric == metric) v.push_back(r.value);
  return v;
}

void criterion_1_2_3() {
  std::mt19937_64 gen(7);
  const double tol = 1e-10;
  bool equiv = true, duality = true, residuals = true;
  double worst_tv = 0.0, worst_gap = 0.0, worst_res = 0.0;

  for (int k = 0; k < 20; ++k) {
    auto inst = random_instance(gen);
    const double eps = (k % 2 == 0) ? 1.0 : 0.1;
    auto sink = solve(inst.mu, inst.nu, inst.C, eps, tol);
    auto oracle = brute_force_solve(inst.mu, inst.nu, inst.C, eps, tol);

    const double tv = tv_distance_couplings(sink.coupling, oracle);
    worst_tv = std::max(worst_tv, tv);
    equiv = equiv && sink.converged && tv <= 1e-6;

    const double dual = dual_value(sink.potentials, inst.mu, inst.nu);
    const double primal =
        primal_value(sink.coupling, inst.C, inst.mu, inst.nu, eps);
    const double gap = std::abs(primal - dual) / (1.0 + std::abs(dual));
    worst_gap = std::max(worst_gap, gap);
    duality = duality && gap <= 1e-8;

    auto [rf, rg] =
        schroedinger_residual(sink.potentials, inst.C, inst.mu, inst.nu);
    worst_res = std::max(worst_res, std::max(rf, rg) / eps);
    residuals = residuals && rf / eps <= 10.0 * tol && rg / eps <= 10.0 * tol;

    auto op = potentials_from_coupling(oracle, inst.C, inst.mu, inst.nu, eps,
                                       1e-4);
    auto [orf, org] = schroedinger_residual(op, inst.C, inst.mu, inst.nu);
    residuals = residuals && orf <= 1e-8 && org <= 1e-8;
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max tv %.3g", worst_tv);
  report(1, "oracle equivalence on 20 random instances", equiv, buf);
  std::snprintf(buf, sizeof(buf), "max relative gap %.3g", worst_gap);
  report(2, "primal-dual gap <= 1e-8*(1+|dual|)", duality, buf);
  std::snprintf(buf, sizeof(buf), "max solver residual/eps %.3g", worst_res);
  report(3, "fixed-point residuals within bounds", residuals, buf);
}

void criterion_4() {
  std::mt19937_64 gen(17);
  auto inst = random_instance(gen);
  const double eps = 0.5, tol = 1e-10;

  bool ok = true;
  double worst = 0.0;
  auto observer = [&](const SinkhornState& s) {
    auto odd = coupling_from_potentials(
        Potentials{s.phi_next, s.psi, s.eps}, inst.C, inst.mu, inst.nu);
    auto rows = odd.row_marginals();
    for (std::size_t i = 0; i < inst.mu.size(); ++i)
      worst = std::max(worst, std::abs(rows[i] - inst.mu.weight(i)));
    auto even = coupling_from_potentials(
        Potentials{s.phi, s.psi, s.eps}, inst.C, inst.mu, inst.nu);
    auto cols = even.col_marginals();
    for (std::size_t j = 0; j < inst.nu.size(); ++j)
      worst = std::max(worst, std::abs(cols[j] - inst.nu.weight(j)));
  };
  auto rep = solve(inst.mu, inst.nu, inst.C, eps, tol, 100000, observer);
  ok = rep.converged && worst <= 1e-10 &&
       rep.entropy_trace.back() <= 10.0 * tol;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max marginal error %.3g, final entropy %.3g",
                worst, rep.entropy_trace.back());
  report(4, "iterate-marginal identities along the dual iteration", ok, buf);
}

void criterion_5() {
  auto mu = sample_subgaussian(50, 2, SampleFamily::Gaussian, 101);
  auto nu = sample_subgaussian(50, 2, SampleFamily::Gaussian, 202);
  auto C = build_cost(mu, nu, CostKind::SquaredEuclidean);
  const double diam2 = squared_diameter(mu, nu);
  const double eps = 0.05 * diam2;
  const double tol = 1e-9;

  auto trace = sinkhorn_trace(mu, nu, C, eps, tol, 100000, 1.0 / diam2);
  auto tv = column(trace, "tv_to_ref");
  auto moment = column(trace, "exp_moment");
  const bool converged =
      !trace.rows.empty() && trace.rows.front().converged;
  const bool ok = converged && !tv.empty() && tv.back() <= 1e-6 &&
                  moment.size() == 1 && std::isfinite(moment.front());
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "final tv %.3g after %zu iterations, exp moment %.6g",
                tv.empty() ? -1.0 : tv.back(), tv.size(),
                moment.empty() ? -1.0 : moment.front());
  report(5, "50-atom Gaussian run converges in total variation", ok, buf);
}

void criterion_6_8() {
  auto cfg = sweep_config(PerturbMode::WeightJitter);
  auto trace = stability_sweep(cfg);
  auto tv = column(trace, "tv_couplings");
  auto kf = column(trace, "ky_fan_f");
  auto sup = column(trace, "sup_f_gap");

  const bool ok6 = tv.size() == 10 && tv.back() <= 0.1 * tv.front() &&
                   tv.back() <= 1e-3 && kf.back() <= 1e-3;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "tv %.3g -> %.3g, ky_fan final %.3g", tv.front(), tv.back(),
                kf.back());
  report(6, "weight-jitter stability of couplings and potentials", ok6, buf);

  const bool ok8 = sup.size() == 10 && std::isfinite(sup.back()) &&
                   sup.back() <= 1e-3;
  std::snprintf(buf, sizeof(buf), "sup-norm gap final %.3g", sup.back());
  report(8, "uniform stability of potentials on the shared support", ok8, buf);
}

void criterion_7() {
  auto cfg = sweep_config(PerturbMode::SupportJitter);
  auto trace = stability_sweep(cfg);
  auto bl = column(trace, "bounded_lipschitz");
  auto pk = column(trace, "pushforward_kolmogorov");
  auto mf = column(trace, "mean_f_gap");

  const bool ok = bl.size() == 10 && bl.back() <= 0.1 * bl.front() &&
                  pk.back() <= 0.1 * pk.front() && mf.back() <= 1e-3;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "bl %.3g -> %.3g, kolmogorov %.3g -> %.3g, mean gap %.3g",
                bl.front(), bl.back(), pk.front(), pk.back(), mf.back());
  report(7, "support-jitter weak stability", ok, buf);
}

void criterion_9() {
  std::mt19937_64 gen(77);
  int failures = 0;

  // eps-scaling identity
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = random_instance(gen);
    const double eps = 0.2 + eot::detail::uniform01(gen);
    auto a = solve(inst.mu, inst.nu, inst.C, eps, 1e-11);
    std::vector<double> scaled = inst.C.values();
    for (double& v : scaled) v /= eps;
    CostMatrix Cs(inst.C.rows(), inst.C.cols(), std::move(scaled));
    auto b = solve(inst.mu, inst.nu, Cs, 1.0, 1e-11);
    bool ok = a.converged && b.converged;
    for (std::size_t i = 0; ok && i < inst.mu.size(); ++i)
      for (std::size_t j = 0; j < inst.nu.size(); ++j)
        ok = ok && std::abs(a.coupling(i, j) - b.coupling(i, j)) <= 1e-10;
    const auto na = normalize(a.potentials, inst.mu, 0.0).potentials;
    Potentials b_cost_units{b.potentials.f, b.potentials.g, eps};
    for (double& v : b_cost_units.f) v *= eps;
    for (double& v : b_cost_units.g) v *= eps;
    const auto nb = normalize(b_cost_units, inst.mu, 0.0).potentials;
    for (std::size_t i = 0; ok && i < inst.mu.size(); ++i)
      ok = ok && std::abs(na.f[i] - nb.f[i]) <= 1e-7;
    if (!ok) ++failures;
  }

  // shift equivariance of couplings
  for (int rep = 0; rep < 100; ++rep) {
    auto inst = random_instance(gen);
    auto r = solve(inst.mu, inst.nu, inst.C, 0.7, 1e-10);
    const double a = 10.0 * (eot::detail::uniform01(gen) - 0.5);
    auto shifted = r.potentials;
    for (double& v : shifted.f) v += a;
    for (double& v : shifted.g) v -= a;
    auto pa = coupling_from_potentials(r.potentials, inst.C, inst.mu, inst.nu);
    auto pb = coupling_from_potentials(shifted, inst.C, inst.mu, inst.nu);
    bool ok = true;
    for (std::size_t i = 0; i < pa.rows(); ++i)
      for (std::size_t j = 0; j < pa.cols(); ++j)
        ok = ok && std::abs(pa(i, j) - pb(i, j)) <= 1e-10;
    if (!ok) ++failures;
  }

  // normalization idempotence
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 2 + gen() % 4;
    std::vector<std::vector<double>> atoms(m);
    std::vector<double> w(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      atoms[i] = {double(i)};
      sum += w[i] = 0.1 + eot::detail::uniform01(gen);
    }
    for (double& v : w) v /= sum;
    DiscreteMeasure mu(atoms, w);
    std::vector<double> f(m);
    for (double& v : f) v = 30.0 * (eot::detail::uniform01(gen) - 0.5);
    auto once = normalize(Potentials{f, {0.0}, 1.0}, mu, 0.0);
    auto twice = normalize(once.potentials, mu, 0.0);
    bool ok = true;
    for (std::size_t i = 0; i < m; ++i)
      ok = ok &&
           std::abs(once.potentials.f[i] - twice.potentials.f[i]) <= 1e-12;
    if (!ok) ++failures;
  }

  // Pinsker direction + metric symmetry/triangle
  auto random_measure = [&](std::size_t m) {
    std::vector<std::vector<double>> atoms(m);
    std::vector<double> w(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      atoms[i] = {double(i)};
      sum += w[i] = 0.05 + eot::detail::uniform01(gen);
    }
    for (double& v : w) v /= sum;
    return DiscreteMeasure(atoms, w);
  };
  for (int rep = 0; rep < 100; ++rep) {
    auto p = random_measure(4), q = random_measure(4), r = random_measure(4);
    const double tv = tv_distance(p, q);
    const double h = relative_entropy(p, q);
    bool ok = !(std::isfinite(h)) || tv * tv <= 0.5 * h + 1e-12;
    ok = ok && std::abs(tv - tv_distance(q, p)) <= 1e-15;
    ok = ok && tv_distance(p, r) <= tv + tv_distance(q, r) + 1e-12;
    std::vector<double> fp(4), fq(4), fr(4);
    for (auto* v : {&fp, &fq, &fr})
      for (double& x : *v) x = 2.0 * eot::detail::uniform01(gen);
    const double kpq = pushforward_kolmogorov(fp, p, fq, q);
    ok = ok && std::abs(kpq - pushforward_kolmogorov(fq, q, fp, p)) <= 1e-15;
    ok = ok && pushforward_kolmogorov(fp, p, fr, r) <=
                   kpq + pushforward_kolmogorov(fq, q, fr, r) + 1e-12;
    if (!ok) ++failures;
  }

  char buf[64];
  std::snprintf(buf, sizeof(buf), "%d failing cases", failures);
  report(9, "invariance suite, 100 randomized cases per property",
         failures == 0, buf);
}

void criterion_10() {
  auto cfg = sweep_config(PerturbMode::WeightJitter);
  cfg.perturbation.schedule.resize(4);
  auto t1 = stability_sweep(cfg);
  auto t2 = stability_sweep(cfg);
  const bool ok = trace_to_csv(t1) == trace_to_csv(t2);
  report(10, "byte-identical reports across repeated sweeps", ok);
}

}  // namespace

int main() {
  criterion_1_2_3();
  criterion_4();
  criterion_5();
  criterion_6_8();
  criterion_7();
  criterion_9();
  criterion_10();
  std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASSED"
                                      : "SOME CRITERIA FAILED");
  return g_failures == 0 ? 0 : 1;
}
