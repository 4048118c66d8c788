#pragma once

#include "lowrank/completion.hpp"
#include "lowrank/discrepancy.hpp"
#include "lowrank/io.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lowrank {

enum class ExperimentKind { kDisjointSupport, kBandit, kBoundCheck, kRateCheck, kPolicyOptDemo };

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);
std::vector<std::string> experiment_kind_names();

struct ExperimentGrid {
    std::vector<int> n{8};
    std::vector<int> m{2};
    std::vector<int> K{1000};
    std::vector<int> H{2};
    std::vector<int> d{2};
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::kDisjointSupport;
    ExperimentGrid grid;
    int n_seeds = 50;
    double delta = 0.05;
    std::uint64_t seed = 1;
    std::string mode = "infinite";  // "infinite" or "finite" where the kind supports both
    double bound_c = 0.0;           // 0 -> calibrate on a held-out seed block
    int calibration_seeds = 25;
    double budget = 0.1;            // policy-opt demo: B_t
    int n_candidates = 10;          // policy-opt demo
    MEConfig me;
    DiscrepancyConfig dis;
    unsigned threads = 0;
    bool stable_timing = false;     // write runtime_ms as 0 for byte-stable output
};

ExperimentConfig experiment_config_from_json(const Json& j);
Json experiment_config_to_json(const ExperimentConfig& config);

/// FNV-1a hash of the canonical JSON form, stamped into every CSV row.
std::string config_hash(const ExperimentConfig& config);

/// Artifact version stamped into every CSV row.
std::string version_string();

struct ResultRow {
    std::string experiment;
    int n = 0, m = 0, S = 0, A = 0, H = 0, d = 0, K = 0;
    long long seed = 0;
    std::string mode;
    double measured_error = 0.0;
    double bound_inf = 0.0;
    double bound_fin = 0.0;
    double dis = 0.0;       // summed over steps
    double emp_dis = 0.0;   // summed over steps
    double conc_coeff = 0.0;  // +inf when supports mismatch
    double runtime_ms = 0.0;
    double policy_bound = 0.0;  // bandit: policy-level bound; otherwise 0
};

struct ExperimentResult {
    std::vector<ResultRow> rows;  // one per (cell, seed) plus aggregate rows
    double calibrated_c = 0.0;    // finite-bound constant actually used
    int check_violations = 0;     // invariant violations found by the per-kind check
    std::string check_summary;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Deterministic CSV: header comments (config hash, version, calibrated
/// constant), a fixed column order, then rows sorted by construction.
void write_csv(std::ostream& out, const ExperimentConfig& config, const ExperimentResult& result);

std::string csv_string(const ExperimentConfig& config, const ExperimentResult& result);

}  // namespace lowrank
