#include "lowrank/experiments.hpp"

#include <doctest.h>

#include <cmath>

using namespace lowrank;

namespace {

ExperimentConfig tiny_disjoint(const std::string& mode) {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::kDisjointSupport;
    cfg.grid.n = {6};
    cfg.grid.m = {2, 6};
    cfg.grid.K = {500};
    cfg.grid.H = {2};
    cfg.grid.d = {2};
    cfg.n_seeds = 4;
    cfg.mode = mode;
    cfg.seed = 42;
    cfg.stable_timing = true;
    cfg.calibration_seeds = 4;
    cfg.dis.max_iters = 800;
    cfg.dis.random_restarts = 2;
    return cfg;
}

const ResultRow* find_aggregate(const ExperimentResult& result, int m, const std::string& mode) {
    for (const auto& row : result.rows)
        if (row.m == m && row.mode == mode && row.seed == -1) return &row;
    return nullptr;
}

}  // namespace

TEST_CASE("disjoint-support experiment: full-support cells evaluate exactly") {
    const ExperimentConfig cfg = tiny_disjoint("infinite");
    const ExperimentResult result = run_experiment(cfg);
    // 2 cells x 4 seeds + 2 aggregates per cell.
    CHECK(result.rows.size() == 8 + 4);
    CHECK(result.check_violations == 0);
    for (const auto& row : result.rows) {
        if (row.seed < 0) continue;
        if (row.m == 6) {
            CHECK(row.measured_error <= 1e-6);
            CHECK(row.bound_inf <= 1e-6);
            CHECK(std::isfinite(row.conc_coeff));
        }
        CHECK(row.measured_error <= row.bound_inf + 10.0 * cfg.me.feas_tol * row.H);
    }
    const ResultRow* median_sparse = find_aggregate(result, 2, "infinite_median");
    const ResultRow* median_full = find_aggregate(result, 6, "infinite_median");
    REQUIRE(median_sparse != nullptr);
    REQUIRE(median_full != nullptr);
    CHECK(median_full->measured_error <= median_sparse->measured_error + 1e-9);
}

TEST_CASE("experiment CSV output is byte-identical across reruns") {
    const ExperimentConfig cfg = tiny_disjoint("infinite");
    const ExperimentResult a = run_experiment(cfg);
    const ExperimentResult b = run_experiment(cfg);
    CHECK(csv_string(cfg, a) == csv_string(cfg, b));
}

TEST_CASE("bandit experiment keeps the bound ordering") {
    ExperimentConfig cfg;
    cfg.kind = ExperimentKind::kBandit;
    cfg.grid.n = {6};
    cfg.grid.m = {2};
    cfg.grid.d = {2};
    cfg.grid.H = {1};
    cfg.grid.K = {1};
    cfg.n_seeds = 6;
    cfg.seed = 7;
    cfg.stable_timing = true;
    cfg.dis.max_iters = 800;
    const ExperimentResult result = run_experiment(cfg);
    CHECK(result.check_violations == 0);
    for (const auto& row : result.rows) {
        if (row.seed < 0) continue;
        CHECK(row.measured_error <= row.bound_inf + 10.0 * cfg.me.feas_tol + 1e-9);
        CHECK(row.bound_inf <= row.policy_bound + 1e-9);
        CHECK(row.dis <= row.emp_dis + 1e-9);
    }
}

TEST_CASE("experiment config survives a JSON round trip and hashes stably") {
    const ExperimentConfig cfg = tiny_disjoint("finite");
    const Json j = experiment_config_to_json(cfg);
    const ExperimentConfig back = experiment_config_from_json(j);
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(back.mode == "finite");
    CHECK(back.grid.m == std::vector<int>{2, 6});
    ExperimentConfig changed = cfg;
    changed.seed += 1;
    CHECK(config_hash(changed) != config_hash(cfg));
}

TEST_CASE("experiment kinds are listed and parsed") {
    for (const std::string& name : experiment_kind_names())
        CHECK(to_string(experiment_kind_from_string(name)) == name);
    CHECK_THROWS_AS(experiment_kind_from_string("nope"), std::invalid_argument);
}

TEST_CASE("grid validation") {
    ExperimentConfig cfg = tiny_disjoint("infinite");
    cfg.grid.m = {9};  // m > n
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    cfg = tiny_disjoint("infinite");
    cfg.grid.d = {1};
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}
