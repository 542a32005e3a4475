#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eot/harness.hpp"

using namespace eot;

namespace {

ExperimentConfig tiny_config(PerturbMode mode, std::vector<double> schedule) {
  ExperimentConfig cfg;
  cfg.mu.inline_measure =
      DiscreteMeasure({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}},
                      {0.25, 0.35, 0.4});
  cfg.nu.inline_measure =
      DiscreteMeasure({{0.5, 0.5}, {1.0, 1.0}}, {0.45, 0.55});
  cfg.cost.kind = "sqeuclidean";
  cfg.epsilons = {1.0};
  cfg.perturbation.mode = mode;
  cfg.perturbation.schedule = std::move(schedule);
  cfg.perturbation.seed = 5;
  cfg.solver.tol = 1e-10;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config json round trip") {
  auto cfg = tiny_config(PerturbMode::WeightJitter, {0.1, 0.05});
  auto back = ExperimentConfig::from_json(cfg.to_json());
  CHECK(back.to_json().dump() == cfg.to_json().dump());
}

TEST_CASE("config validation") {
  auto j = tiny_config(PerturbMode::WeightJitter, {0.1}).to_json();
  j["epsilons"] = {-1.0};
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
  j = tiny_config(PerturbMode::WeightJitter, {0.1}).to_json();
  j["metrics"] = json::array();
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), std::invalid_argument);
}

TEST_CASE("stability sweep with zero schedule has all-zero distances") {
  auto cfg = tiny_config(PerturbMode::WeightJitter, {0.0});
  auto trace = stability_sweep(cfg);
  REQUIRE(!trace.rows.empty());
  for (const auto& row : trace.rows) {
    CHECK(row.converged);
    if (row.metric == "tv_couplings" || row.metric == "bounded_lipschitz" ||
        row.metric == "pushforward_kolmogorov")
      CHECK(row.value <= 1e-9);
    if (row.metric == "ky_fan_f" || row.metric == "sup_f_gap")
      CHECK(row.value <= 1e-7);
  }
}

TEST_CASE("weight-jitter sweep distances shrink with the schedule") {
  std::vector<double> schedule;
  for (int n = 1; n <= 8; ++n) schedule.push_back(std::pow(2.0, -n));
  auto cfg = tiny_config(PerturbMode::WeightJitter, schedule);
  auto trace = stability_sweep(cfg);

  auto column = [&](const std::string& metric) {
    std::vector<double> v;
    for (const auto& r : trace.rows)
      if (r.metric == metric) v.push_back(r.value);
    return v;
  };
  auto tv = column("tv_couplings");
  REQUIRE(tv.size() == schedule.size());
  CHECK(tv.back() <= tv.front());
  // marginal tv is a lower bound, so the coupling tv tracks delta_8 = 2^-8
  CHECK(tv.back() <= 2.0 * std::pow(2.0, -8));
  auto kf = column("ky_fan_f");
  CHECK(kf.back() <= kf.front() + 1e-12);
  // shared support: ky_fan applicable
  for (double v : kf) CHECK(std::isfinite(v));
}

TEST_CASE("support-jitter sweep: weak metrics shrink, ky_fan inapplicable") {
  std::vector<double> schedule;
  for (int n = 1; n <= 8; ++n) schedule.push_back(std::pow(2.0, -n));
  auto cfg = tiny_config(PerturbMode::SupportJitter, schedule);
  auto trace = stability_sweep(cfg);

  std::vector<double> bl, kf;
  for (const auto& r : trace.rows) {
    if (r.metric == "bounded_lipschitz") bl.push_back(r.value);
    if (r.metric == "ky_fan_f") kf.push_back(r.value);
  }
  REQUIRE(bl.size() == schedule.size());
  CHECK(bl.back() <= bl.front());
  for (double v : kf) CHECK(std::isinf(v));
}

TEST_CASE("sinkhorn trace on zero cost is flat at zero") {
  DiscreteMeasure mu({{0.0}, {1.0}}, {0.3, 0.7});
  DiscreteMeasure nu({{0.0}, {1.0}}, {0.5, 0.5});
  CostMatrix C(2, 2, std::vector<double>(4, 0.0));
  auto trace = sinkhorn_trace(mu, nu, C, 1.0, 1e-10);
  for (const auto& r : trace.rows) {
    if (r.metric == "entropy_sum" || r.metric == "tv_to_ref")
      CHECK(r.value <= 1e-12);
  }
}

TEST_CASE("sinkhorn trace: symmetric 2x2 reaches the oracle coupling") {
  DiscreteMeasure mu({{0.0}, {1.0}}, {0.5, 0.5});
  DiscreteMeasure nu({{0.0}, {1.0}}, {0.5, 0.5});
  CostMatrix C(2, 2, {0.0, 1.0, 1.0, 0.0});
  auto trace = sinkhorn_trace(mu, nu, C, 1.0, 1e-10, 200);
  double final_tv = -1.0, final_entropy = -1.0;
  for (const auto& r : trace.rows) {
    if (r.metric == "tv_to_ref") final_tv = r.value;
    if (r.metric == "entropy_sum") final_entropy = r.value;
    CHECK(r.converged);
  }
  CHECK(final_tv >= 0.0);
  CHECK(final_tv <= 1e-8);
  CHECK(final_entropy <= 1e-8);
}

TEST_CASE("emit_report writes csv, json and meta") {
  const std::string dir = "test_out_emit";
  std::filesystem::remove_all(dir);

  ConvergenceTrace trace;
  SUBCASE("empty trace: header-only csv") {
    emit_report(trace, "csv", dir);
    CHECK(slurp(dir + "/report.csv") == "index,metric,value,converged\n");
  }

  SUBCASE("single row") {
    trace.add(3, 1.0, "tv_couplings", 0.25, true);
    emit_report(trace, "csv", dir);
    CHECK(slurp(dir + "/report.csv") ==
          "index,metric,value,converged\n3,tv_couplings,0.25,1\n");
    auto meta = json::parse(slurp(dir + "/meta.json"));
    CHECK(meta.at("bl_dictionary_version") == kBlDictionaryVersion);
  }

  SUBCASE("json round trips the rows") {
    trace.add(1, 0.5, "dual_gap", 0.125, false);
    trace.add(2, 0.5, "dual_gap",
              std::numeric_limits<double>::infinity(), true);
    emit_report(trace, "json", dir);
    auto j = json::parse(slurp(dir + "/report.json"));
    REQUIRE(j.at("rows").size() == 2);
    CHECK(j.at("rows")[0].at("value").get<double>() == 0.125);
    CHECK(j.at("rows")[0].at("converged") == false);
    CHECK(j.at("rows")[1].at("value") == "inf");
  }

  std::filesystem::remove_all(dir);
}

TEST_CASE("emit_report determinism: byte-identical across re-runs") {
  auto cfg = tiny_config(PerturbMode::WeightJitter, {0.25, 0.125, 0.0625});
  auto t1 = stability_sweep(cfg);
  auto t2 = stability_sweep(cfg);
  emit_report(t1, "csv", "test_out_a", cfg.to_json());
  emit_report(t2, "csv", "test_out_b", cfg.to_json());
  CHECK(slurp("test_out_a/report.csv") == slurp("test_out_b/report.csv"));
  CHECK(slurp("test_out_a/meta.json") == slurp("test_out_b/meta.json"));
  std::filesystem::remove_all("test_out_a");
  std::filesystem::remove_all("test_out_b");
}

TEST_CASE("trace rows parse back from csv") {
  auto cfg = tiny_config(PerturbMode::WeightJitter, {0.125});
  auto trace = stability_sweep(cfg);
  auto csv = trace_to_csv(trace);

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,metric,value,converged");
  std::size_t parsed = 0;
  while (std::getline(in, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1),
               c3 = line.rfind(',');
    REQUIRE(c1 != std::string::npos);
    const auto& row = trace.rows[parsed];
    CHECK(std::stoul(line.substr(0, c1)) == row.index);
    CHECK(line.substr(c1 + 1, c2 - c1 - 1) == row.metric);
    if (std::isfinite(row.value))
      CHECK(std::stod(line.substr(c2 + 1, c3 - c2 - 1)) ==
            doctest::Approx(row.value).epsilon(1e-15));
    CHECK(line.substr(c3 + 1) == (row.converged ? "1" : "0"));
    ++parsed;
  }
  CHECK(parsed == trace.rows.size());
}
