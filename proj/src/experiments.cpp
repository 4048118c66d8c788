#include "lowrank/experiments.hpp"

#include "lowrank/evaluation.hpp"
#include "lowrank/improvement.hpp"
#include "lowrank/norms.hpp"
#include "lowrank/parallel.hpp"
#include "lowrank/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace lowrank {

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::kDisjointSupport: return "disjoint_support";
        case ExperimentKind::kBandit: return "bandit";
        case ExperimentKind::kBoundCheck: return "bound_check";
        case ExperimentKind::kRateCheck: return "rate_check";
        case ExperimentKind::kPolicyOptDemo: return "policy_opt_demo";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::kDisjointSupport, ExperimentKind::kBandit, ExperimentKind::kBoundCheck,
          ExperimentKind::kRateCheck, ExperimentKind::kPolicyOptDemo})
        if (name == to_string(k)) return k;
    throw std::invalid_argument("unknown experiment kind: " + name);
}

std::vector<std::string> experiment_kind_names() {
    return {"disjoint_support", "bandit", "bound_check", "rate_check", "policy_opt_demo"};
}

namespace {

std::vector<int> ints_from_json(const Json& j) {
    std::vector<int> out;
    for (const auto& v : j) out.push_back(v.get<int>());
    return out;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double iqr_of(std::vector<double> v) {
    if (v.size() < 2) return 0.0;
    std::sort(v.begin(), v.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    return quantile(0.75) - quantile(0.25);
}

double percentile_of(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(std::max(x[i], 1e-300));
        ly[i] = std::log(std::max(y[i], 1e-300));
        sx += lx[i];
        sy += ly[i];
    }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return den > 0 ? num / den : 0.0;
}

double statistical_shape(int H, int S, int A, int d, double delta, int K) {
    const double h = H, s = S, a = A;
    return h * h *
           std::sqrt(static_cast<double>(d) * (s + a) * std::log(h * s / delta) /
                     static_cast<double>(K));
}

struct Cell {
    int n, m, K, H, d;
};

std::vector<Cell> expand_grid(const ExperimentGrid& grid) {
    std::vector<Cell> cells;
    for (int n : grid.n)
        for (int m : grid.m)
            for (int K : grid.K)
                for (int H : grid.H)
                    for (int d : grid.d) cells.push_back({n, m, K, H, d});
    return cells;
}

class Timer {
  public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

FactorizationForm cycle_form(std::size_t index) {
    switch (index % 3) {
        case 0: return FactorizationForm::kFormI;
        case 1: return FactorizationForm::kFormII;
        default: return FactorizationForm::kFullyFactorized;
    }
}

// Rank-one Hadamard product (mu 1') o pi, i.e. the occupancy of a one-step policy.
Matrix occupancy_of(const Vector& mu, const Matrix& pi) {
    Matrix d = pi;
    for (Eigen::Index s = 0; s < d.rows(); ++s) d.row(s) *= mu(s);
    return d;
}

struct KindRunner {
    const ExperimentConfig& config;
    std::vector<ResultRow> rows;
    double calibrated_c = 0.0;
    int violations = 0;
    std::string summary;
};

// ---------------------------------------------------------------------------
// disjoint_support: uniform transitions, random m-sparse behavior/target rows
// ---------------------------------------------------------------------------
void run_disjoint_support(KindRunner& runner) {
    const ExperimentConfig& cfg = runner.config;
    const bool finite = cfg.mode == "finite";
    std::vector<Cell> cells;
    if (finite) {
        cells = expand_grid(cfg.grid);
    } else {
        // K is not part of the infinite-sample grid.
        for (int n : cfg.grid.n)
            for (int m : cfg.grid.m)
                for (int H : cfg.grid.H)
                    for (int d : cfg.grid.d) cells.push_back({n, m, 0, H, d});
    }
    for (const Cell& c : cells)
        if (c.m > c.n) throw std::invalid_argument("disjoint_support: m must not exceed n");

    double c_stat = cfg.bound_c;
    if (finite && c_stat <= 0.0) {
        // Calibrate the statistical constant on a held-out seed block using
        // the first grid cell, then freeze it.
        const Cell& c = cells.front();
        std::vector<double> ratios;
        for (int i = 0; i < cfg.calibration_seeds; ++i) {
            const std::uint64_t s = SplitMix64::derive(cfg.seed, 0xC0DE0000ULL + static_cast<std::uint64_t>(i));
            const LowRankMDP mdp = uniform_mdp(c.n, c.n, c.H, c.d, s);
            const Policy behavior = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 1));
            const Policy target = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 2));
            const OfflineDataset data = sample_trajectories(mdp, behavior, c.K, SplitMix64::derive(s, 3));
            SlackConfig slack;
            slack.mode = SlackConfig::Mode::kOracle;
            slack.oracle_mdp = &mdp;
            slack.delta = cfg.delta;
            const OPERun run = evaluate_policy_finite(data, target, mdp.initial_dist, cfg.me, slack);
            const double measured = std::abs(run.estimate - exact_return(mdp, target));
            const BoundBreakdown fin = bound_finite(mdp, behavior, target, c.K, cfg.delta, 0.0);
            const double shape = statistical_shape(c.H, c.n, c.n, c.d, cfg.delta, c.K);
            ratios.push_back(std::max(0.0, measured - fin.total) / shape);
        }
        c_stat = percentile_of(ratios, 0.95);
    }
    runner.calibrated_c = c_stat;

    const std::size_t tasks = cells.size() * static_cast<std::size_t>(cfg.n_seeds);
    runner.rows.resize(tasks);
    parallel_for_index(tasks, [&](std::size_t idx) {
        Timer timer;
        const Cell& c = cells[idx / static_cast<std::size_t>(cfg.n_seeds)];
        const int seed_idx = static_cast<int>(idx % static_cast<std::size_t>(cfg.n_seeds));
        const std::uint64_t s = SplitMix64::derive(cfg.seed, idx);
        const LowRankMDP mdp = uniform_mdp(c.n, c.n, c.H, c.d, s);
        const Policy behavior = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 1));
        const Policy target = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 2));
        const double j_true = exact_return(mdp, target);

        double estimate = 0.0;
        if (finite) {
            const OfflineDataset data =
                sample_trajectories(mdp, behavior, c.K, SplitMix64::derive(s, 3));
            SlackConfig slack;
            slack.mode = SlackConfig::Mode::kOracle;
            slack.oracle_mdp = &mdp;
            slack.delta = cfg.delta;
            estimate = evaluate_policy_finite(data, target, mdp.initial_dist, cfg.me, slack).estimate;
        } else {
            estimate = evaluate_policy_infinite(mdp, behavior, target, cfg.me).estimate;
        }

        const BoundBreakdown inf_bound = bound_infinite(mdp, behavior, target, cfg.dis);
        const BoundBreakdown fin_bound =
            bound_finite(mdp, behavior, target, finite ? c.K : 1, cfg.delta, finite ? c_stat : 0.0);
        const OccupancyMeasure ob = occupancy_measures(mdp, behavior);
        const OccupancyMeasure ot = occupancy_measures(mdp, target);
        double conc = 0.0;
        for (int t = 0; t < c.H; ++t)
            conc = std::max(conc, concentrability_coefficient(
                                      ob.state_action[static_cast<std::size_t>(t)],
                                      ot.state_action[static_cast<std::size_t>(t)]));

        ResultRow row;
        row.experiment = to_string(cfg.kind);
        row.n = c.n;
        row.m = c.m;
        row.S = c.n;
        row.A = c.n;
        row.H = c.H;
        row.d = c.d;
        row.K = finite ? c.K : 0;
        row.seed = seed_idx;
        row.mode = cfg.mode;
        row.measured_error = std::abs(estimate - j_true);
        row.bound_inf = inf_bound.total;
        double emp_sum = 0.0, dis_sum = 0.0;
        for (double v : fin_bound.per_step) emp_sum += v;
        for (double v : inf_bound.per_step) dis_sum += v;
        row.bound_fin = fin_bound.total;
        row.dis = dis_sum;
        row.emp_dis = emp_sum;
        row.conc_coeff = conc;
        row.runtime_ms = cfg.stable_timing ? 0.0 : timer.elapsed_ms();
        runner.rows[idx] = std::move(row);
    }, cfg.threads);

    // Check: measured error never exceeds the deterministic bound (with the
    // solver feasibility slack).
    int violations = 0;
    for (const ResultRow& row : runner.rows) {
        const double slack_allow = 10.0 * cfg.me.feas_tol * row.H;
        if (!finite && row.measured_error > row.bound_inf + slack_allow) ++violations;
    }
    runner.violations = violations;
    std::ostringstream ss;
    ss << "disjoint_support: " << violations << " bound violations over " << runner.rows.size()
       << " rows";
    runner.summary = ss.str();
}

// ---------------------------------------------------------------------------
// bandit: one-step instances; distribution-level vs policy-level bounds
// ---------------------------------------------------------------------------
void run_bandit(KindRunner& runner) {
    const ExperimentConfig& cfg = runner.config;
    std::vector<Cell> cells = expand_grid(cfg.grid);
    const std::size_t tasks = cells.size() * static_cast<std::size_t>(cfg.n_seeds);
    runner.rows.resize(tasks);
    parallel_for_index(tasks, [&](std::size_t idx) {
        Timer timer;
        const Cell& c = cells[idx / static_cast<std::size_t>(cfg.n_seeds)];
        const int seed_idx = static_cast<int>(idx % static_cast<std::size_t>(cfg.n_seeds));
        const std::uint64_t s = SplitMix64::derive(cfg.seed, idx);
        const LowRankMDP mdp = uniform_mdp(c.n, c.n, 1, c.d, s);
        const Policy behavior = random_supported_policy(c.n, c.n, 1, c.m, SplitMix64::derive(s, 1));
        const Policy target = random_supported_policy(c.n, c.n, 1, c.m, SplitMix64::derive(s, 2));
        const double j_true = exact_return(mdp, target);
        const double estimate = evaluate_policy_infinite(mdp, behavior, target, cfg.me).estimate;

        const Matrix d_b = occupancy_of(mdp.initial_dist, behavior.step(0));
        const Matrix d_t = occupancy_of(mdp.initial_dist, target.step(0));
        DiscrepancyResult dis_d = operator_discrepancy(d_b, d_t, cfg.dis);
        const DiscrepancyResult dis_pi =
            policy_operator_discrepancy(behavior.step(0), target.step(0), cfg.dis);
        // The policy minimizer induces a feasible distribution candidate;
        // keep whichever is smaller (both are feasible upper bounds).
        const double induced =
            operator_norm(occupancy_of(mdp.initial_dist, dis_pi.minimizer) - d_t);
        dis_d.value = std::min(dis_d.value, induced);

        const double scale = 2.0 * std::sqrt(static_cast<double>(c.d) * c.n * c.n);
        const double mu_inf = mdp.initial_dist.maxCoeff();

        ResultRow row;
        row.experiment = to_string(cfg.kind);
        row.n = c.n;
        row.m = c.m;
        row.S = c.n;
        row.A = c.n;
        row.H = 1;
        row.d = c.d;
        row.K = 0;
        row.seed = seed_idx;
        row.mode = "infinite";
        row.measured_error = std::abs(estimate - j_true);
        row.bound_inf = scale * dis_d.value;
        row.bound_fin = scale * empirical_operator_discrepancy(d_b, d_t);
        row.dis = dis_d.value;
        row.emp_dis = empirical_operator_discrepancy(d_b, d_t);
        row.conc_coeff = concentrability_coefficient(d_b, d_t);
        row.policy_bound = scale * mu_inf * dis_pi.value;
        row.runtime_ms = cfg.stable_timing ? 0.0 : timer.elapsed_ms();
        runner.rows[idx] = std::move(row);
    }, cfg.threads);

    int violations = 0;
    for (const ResultRow& row : runner.rows) {
        const double slack_allow = 10.0 * cfg.me.feas_tol + 1e-9;
        if (row.measured_error > row.bound_inf + slack_allow) ++violations;
        if (row.bound_inf > row.policy_bound + 1e-9) ++violations;
    }
    runner.violations = violations;
    std::ostringstream ss;
    ss << "bandit: " << violations << " ordering violations over " << runner.rows.size() << " rows";
    runner.summary = ss.str();
}

// ---------------------------------------------------------------------------
// bound_check: random low-rank MDPs, both modes
// ---------------------------------------------------------------------------
void run_bound_check(KindRunner& runner) {
    const ExperimentConfig& cfg = runner.config;
    const bool finite = cfg.mode == "finite";
    std::vector<Cell> cells = expand_grid(cfg.grid);

    double c_stat = cfg.bound_c;
    if (finite && c_stat <= 0.0) {
        const Cell& c = cells.front();
        std::vector<double> ratios;
        for (int i = 0; i < cfg.calibration_seeds; ++i) {
            const std::uint64_t s = SplitMix64::derive(cfg.seed, 0xC0DE0000ULL + static_cast<std::uint64_t>(i));
            const LowRankMDP mdp =
                random_low_rank_mdp(c.n, c.n, c.H, c.d, s, cycle_form(static_cast<std::size_t>(i)));
            const Policy behavior = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 1));
            const Policy target = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 2));
            const OfflineDataset data = sample_trajectories(mdp, behavior, c.K, SplitMix64::derive(s, 3));
            SlackConfig slack;
            slack.mode = SlackConfig::Mode::kOracle;
            slack.oracle_mdp = &mdp;
            slack.delta = cfg.delta;
            const OPERun run = evaluate_policy_finite(data, target, mdp.initial_dist, cfg.me, slack);
            const double measured = std::abs(run.estimate - exact_return(mdp, target));
            const BoundBreakdown fin = bound_finite(mdp, behavior, target, c.K, cfg.delta, 0.0);
            const double shape = statistical_shape(c.H, c.n, c.n, c.d, cfg.delta, c.K);
            ratios.push_back(std::max(0.0, measured - fin.total) / shape);
        }
        c_stat = percentile_of(ratios, 0.95);
    }
    runner.calibrated_c = c_stat;

    const std::size_t tasks = cells.size() * static_cast<std::size_t>(cfg.n_seeds);
    runner.rows.resize(tasks);
    parallel_for_index(tasks, [&](std::size_t idx) {
        Timer timer;
        const Cell& c = cells[idx / static_cast<std::size_t>(cfg.n_seeds)];
        const int seed_idx = static_cast<int>(idx % static_cast<std::size_t>(cfg.n_seeds));
        const std::uint64_t s = SplitMix64::derive(cfg.seed, idx);
        const LowRankMDP mdp = random_low_rank_mdp(c.n, c.n, c.H, c.d, s, cycle_form(idx));
        const Policy behavior = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 1));
        const Policy target = random_supported_policy(c.n, c.n, c.H, c.m, SplitMix64::derive(s, 2));
        const double j_true = exact_return(mdp, target);

        double estimate;
        if (finite) {
            const OfflineDataset data =
                sample_trajectories(mdp, behavior, c.K, SplitMix64::derive(s, 3));
            SlackConfig slack;
            slack.mode = SlackConfig::Mode::kOracle;
            slack.oracle_mdp = &mdp;
            slack.delta = cfg.delta;
            estimate = evaluate_policy_finite(data, target, mdp.initial_dist, cfg.me, slack).estimate;
        } else {
            estimate = evaluate_policy_infinite(mdp, behavior, target, cfg.me).estimate;
        }
        const BoundBreakdown inf_bound = bound_infinite(mdp, behavior, target, cfg.dis);
        const BoundBreakdown fin_bound =
            bound_finite(mdp, behavior, target, finite ? c.K : 1, cfg.delta, finite ? c_stat : 0.0);
        const OccupancyMeasure ob = occupancy_measures(mdp, behavior);
        const OccupancyMeasure ot = occupancy_measures(mdp, target);
        double conc = 0.0;
        for (int t = 0; t < c.H; ++t)
            conc = std::max(conc, concentrability_coefficient(
                                      ob.state_action[static_cast<std::size_t>(t)],
                                      ot.state_action[static_cast<std::size_t>(t)]));

        ResultRow row;
        row.experiment = to_string(cfg.kind);
        row.n = c.n;
        row.m = c.m;
        row.S = c.n;
        row.A = c.n;
        row.H = c.H;
        row.d = c.d;
        row.K = finite ? c.K : 0;
        row.seed = seed_idx;
        row.mode = cfg.mode;
        row.measured_error = std::abs(estimate - j_true);
        row.bound_inf = inf_bound.total;
        row.bound_fin = fin_bound.total;
        double emp_sum = 0.0, dis_sum = 0.0;
        for (double v : fin_bound.per_step) emp_sum += v;
        for (double v : inf_bound.per_step) dis_sum += v;
        row.dis = dis_sum;
        row.emp_dis = emp_sum;
        row.conc_coeff = conc;
        row.runtime_ms = cfg.stable_timing ? 0.0 : timer.elapsed_ms();
        runner.rows[idx] = std::move(row);
    }, cfg.threads);

    int violations = 0;
    for (const ResultRow& row : runner.rows) {
        const double slack_allow = 10.0 * cfg.me.feas_tol * row.H;
        const double bound = finite ? row.bound_fin : row.bound_inf;
        if (row.measured_error > bound + slack_allow) ++violations;
    }
    runner.violations = violations;
    std::ostringstream ss;
    if (finite) {
        // The finite bound holds with probability 1 - delta; allow the nominal
        // failure count plus three binomial standard deviations.
        const double nominal = cfg.delta * static_cast<double>(runner.rows.size());
        const double allowed =
            nominal + 3.0 * std::sqrt(nominal * (1.0 - cfg.delta)) + 1e-12;
        ss << "bound_check(finite): " << violations << " violations (allowed "
           << static_cast<int>(std::floor(allowed)) << ") over " << runner.rows.size() << " rows";
        runner.violations = violations <= static_cast<int>(std::floor(allowed)) ? 0 : violations;
    } else {
        ss << "bound_check(infinite): " << violations << " violations over " << runner.rows.size()
           << " rows";
    }
    runner.summary = ss.str();
}

// ---------------------------------------------------------------------------
// rate_check: behavior evaluation error against K
// ---------------------------------------------------------------------------
void run_rate_check(KindRunner& runner) {
    const ExperimentConfig& cfg = runner.config;
    std::vector<Cell> cells = expand_grid(cfg.grid);
    const std::size_t tasks = cells.size() * static_cast<std::size_t>(cfg.n_seeds);
    runner.rows.resize(tasks);
    parallel_for_index(tasks, [&](std::size_t idx) {
        Timer timer;
        const Cell& c = cells[idx / static_cast<std::size_t>(cfg.n_seeds)];
        const int seed_idx = static_cast<int>(idx % static_cast<std::size_t>(cfg.n_seeds));
        // The instance depends on the seed index only, not on K, so the sweep
        // over K sees the same family of MDPs.
        const std::uint64_t s = SplitMix64::derive(cfg.seed, 0xAA000000ULL + static_cast<std::uint64_t>(seed_idx));
        const LowRankMDP mdp =
            random_low_rank_mdp(c.n, c.n, c.H, c.d, s, cycle_form(static_cast<std::size_t>(seed_idx)));
        const Policy behavior = random_policy(c.n, c.n, c.H, SplitMix64::derive(s, 1));
        const double j_true = exact_return(mdp, behavior);
        const OfflineDataset data = sample_trajectories(
            mdp, behavior, c.K, SplitMix64::derive(s, 100 + static_cast<std::uint64_t>(c.K)));
        SlackConfig slack;
        slack.mode = SlackConfig::Mode::kOracle;
        slack.oracle_mdp = &mdp;
        slack.delta = cfg.delta;
        const double estimate =
            evaluate_policy_finite(data, behavior, mdp.initial_dist, cfg.me, slack).estimate;

        ResultRow row;
        row.experiment = to_string(cfg.kind);
        row.n = c.n;
        row.m = c.n;
        row.S = c.n;
        row.A = c.n;
        row.H = c.H;
        row.d = c.d;
        row.K = c.K;
        row.seed = seed_idx;
        row.mode = "finite";
        row.measured_error = std::abs(estimate - j_true);
        row.bound_fin = bound_finite(mdp, behavior, behavior, c.K, cfg.delta, 1.0).total;
        row.runtime_ms = cfg.stable_timing ? 0.0 : timer.elapsed_ms();
        runner.rows[idx] = std::move(row);
    }, cfg.threads);

    // Slope of median error against K.
    std::vector<double> ks, medians;
    for (int K : cfg.grid.K) {
        std::vector<double> errs;
        for (const ResultRow& row : runner.rows)
            if (row.K == K) errs.push_back(row.measured_error);
        ks.push_back(static_cast<double>(K));
        medians.push_back(median_of(errs));
    }
    const double slope = loglog_slope(ks, medians);
    runner.violations = std::abs(slope + 0.5) <= 0.15 ? 0 : 1;
    std::ostringstream ss;
    ss << "rate_check: log-log slope " << slope << " (target -0.5 +/- 0.15)";
    runner.summary = ss.str();
}

// ---------------------------------------------------------------------------
// policy_opt_demo: one-step constrained improvement against the exact oracle
// ---------------------------------------------------------------------------
void run_policy_opt_demo(KindRunner& runner) {
    const ExperimentConfig& cfg = runner.config;
    std::vector<Cell> cells = expand_grid(cfg.grid);

    double c_stat = cfg.bound_c;
    if (c_stat <= 0.0) {
        const Cell& c = cells.front();
        std::vector<double> ratios;
        for (int i = 0; i < cfg.calibration_seeds; ++i) {
            const std::uint64_t s = SplitMix64::derive(cfg.seed, 0xC0DE0000ULL + static_cast<std::uint64_t>(i));
            const LowRankMDP mdp =
                random_low_rank_mdp(c.n, c.n, 1, c.d, s, FactorizationForm::kFullyFactorized);
            const Policy behavior = random_policy(c.n, c.n, 1, SplitMix64::derive(s, 1));
            const CandidateSet cands = build_candidate_set(
                behavior, {cfg.budget}, c.d, c.n, c.n, cfg.n_candidates, SplitMix64::derive(s, 2));
            const OfflineDataset data = sample_trajectories(mdp, behavior, c.K, SplitMix64::derive(s, 3));
            SlackConfig slack;
            slack.mode = SlackConfig::Mode::kOracle;
            slack.oracle_mdp = &mdp;
            slack.delta = cfg.delta;
            const OptimizeResult opt = optimize_policy(data, cands, cfg.me, slack);
            double j_best = -1e300, j_hat = exact_return(mdp, opt.best);
            for (const Policy& p : cands.policies) j_best = std::max(j_best, exact_return(mdp, p));
            const double gap = j_best - j_hat;
            double budget_sum = 0.0;
            for (double b : cands.bounds) budget_sum += b;
            const double dis_term =
                4.0 * std::sqrt(static_cast<double>(c.d) * c.n * c.n) * budget_sum;
            // Statistical shape of the suboptimality bound with C = 1.
            const double shape = suboptimality_bound(cands, c.K, cfg.delta, 1.0) - dis_term;
            ratios.push_back(std::max(0.0, gap - dis_term) / shape);
        }
        c_stat = percentile_of(ratios, 0.95);
    }
    runner.calibrated_c = c_stat;

    const std::size_t tasks = cells.size() * static_cast<std::size_t>(cfg.n_seeds);
    runner.rows.resize(tasks);
    parallel_for_index(tasks, [&](std::size_t idx) {
        Timer timer;
        const Cell& c = cells[idx / static_cast<std::size_t>(cfg.n_seeds)];
        const int seed_idx = static_cast<int>(idx % static_cast<std::size_t>(cfg.n_seeds));
        const std::uint64_t s = SplitMix64::derive(cfg.seed, idx);
        const LowRankMDP mdp =
            random_low_rank_mdp(c.n, c.n, 1, c.d, s, FactorizationForm::kFullyFactorized);
        const Policy behavior = random_policy(c.n, c.n, 1, SplitMix64::derive(s, 1));
        const CandidateSet cands = build_candidate_set(
            behavior, {cfg.budget}, c.d, c.n, c.n, cfg.n_candidates, SplitMix64::derive(s, 2));
        const OfflineDataset data = sample_trajectories(mdp, behavior, c.K, SplitMix64::derive(s, 3));
        SlackConfig slack;
        slack.mode = SlackConfig::Mode::kOracle;
        slack.oracle_mdp = &mdp;
        slack.delta = cfg.delta;
        const OptimizeResult opt = optimize_policy(data, cands, cfg.me, slack);
        double j_best = -1e300;
        for (const Policy& p : cands.policies) j_best = std::max(j_best, exact_return(mdp, p));
        const double j_hat = exact_return(mdp, opt.best);
        const double bound = suboptimality_bound(cands, c.K, cfg.delta, c_stat);

        ResultRow row;
        row.experiment = to_string(cfg.kind);
        row.n = c.n;
        row.m = cands.size();
        row.S = c.n;
        row.A = c.n;
        row.H = 1;
        row.d = c.d;
        row.K = c.K;
        row.seed = seed_idx;
        row.mode = "finite";
        row.measured_error = j_best - j_hat;  // suboptimality gap
        row.bound_fin = bound;
        row.runtime_ms = cfg.stable_timing ? 0.0 : timer.elapsed_ms();
        runner.rows[idx] = std::move(row);
    }, cfg.threads);

    int violations = 0;
    for (const ResultRow& row : runner.rows)
        if (row.measured_error > row.bound_fin + 1e-9) ++violations;
    runner.violations = violations;
    std::ostringstream ss;
    ss << "policy_opt_demo: " << violations << " bound violations over " << runner.rows.size()
       << " rows";
    runner.summary = ss.str();
}

void append_aggregates(std::vector<ResultRow>& rows) {
    // One median row and one IQR row per distinct cell, in first-seen order.
    std::vector<ResultRow> aggregates;
    std::vector<std::string> seen;
    auto cell_key = [](const ResultRow& r) {
        std::ostringstream k;
        k << r.experiment << '|' << r.n << '|' << r.m << '|' << r.H << '|' << r.d << '|' << r.K
          << '|' << r.mode;
        return k.str();
    };
    for (const ResultRow& row : rows) {
        const std::string key = cell_key(row);
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
        seen.push_back(key);
        std::vector<double> err, binf, bfin, dis, emp, conc, pol;
        for (const ResultRow& r : rows) {
            if (cell_key(r) != key) continue;
            err.push_back(r.measured_error);
            binf.push_back(r.bound_inf);
            bfin.push_back(r.bound_fin);
            dis.push_back(r.dis);
            emp.push_back(r.emp_dis);
            conc.push_back(r.conc_coeff);
            pol.push_back(r.policy_bound);
        }
        ResultRow med = rows[0];
        for (const ResultRow& r : rows)
            if (cell_key(r) == key) {
                med = r;
                break;
            }
        med.seed = -1;
        med.runtime_ms = 0.0;
        ResultRow iqr = med;
        med.mode += "_median";
        med.measured_error = median_of(err);
        med.bound_inf = median_of(binf);
        med.bound_fin = median_of(bfin);
        med.dis = median_of(dis);
        med.emp_dis = median_of(emp);
        med.conc_coeff = median_of(conc);
        med.policy_bound = median_of(pol);
        iqr.mode += "_iqr";
        iqr.measured_error = iqr_of(err);
        iqr.bound_inf = iqr_of(binf);
        iqr.bound_fin = iqr_of(bfin);
        iqr.dis = iqr_of(dis);
        iqr.emp_dis = iqr_of(emp);
        iqr.conc_coeff = iqr_of(conc);
        iqr.policy_bound = iqr_of(pol);
        aggregates.push_back(std::move(med));
        aggregates.push_back(std::move(iqr));
    }
    rows.insert(rows.end(), aggregates.begin(), aggregates.end());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    for (int v : config.grid.n)
        if (v < 1) throw std::invalid_argument("experiment grid: n must be positive");
    for (int v : config.grid.m)
        if (v < 1) throw std::invalid_argument("experiment grid: m must be positive");
    for (int v : config.grid.K)
        if (v < 1) throw std::invalid_argument("experiment grid: K must be positive");
    for (int v : config.grid.H)
        if (v < 1) throw std::invalid_argument("experiment grid: H must be positive");
    for (int v : config.grid.d)
        if (v < 2) throw std::invalid_argument("experiment grid: d must be at least 2");

    KindRunner runner{config, {}, 0.0, 0, ""};
    switch (config.kind) {
        case ExperimentKind::kDisjointSupport: run_disjoint_support(runner); break;
        case ExperimentKind::kBandit: run_bandit(runner); break;
        case ExperimentKind::kBoundCheck: run_bound_check(runner); break;
        case ExperimentKind::kRateCheck: run_rate_check(runner); break;
        case ExperimentKind::kPolicyOptDemo: run_policy_opt_demo(runner); break;
    }
    append_aggregates(runner.rows);
    ExperimentResult result;
    result.rows = std::move(runner.rows);
    result.calibrated_c = runner.calibrated_c;
    result.check_violations = runner.violations;
    result.check_summary = runner.summary;
    return result;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    ExperimentConfig cfg;
    cfg.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("grid")) {
        const Json& g = j.at("grid");
        if (g.contains("n")) cfg.grid.n = ints_from_json(g.at("n"));
        if (g.contains("m")) cfg.grid.m = ints_from_json(g.at("m"));
        if (g.contains("K")) cfg.grid.K = ints_from_json(g.at("K"));
        if (g.contains("H")) cfg.grid.H = ints_from_json(g.at("H"));
        if (g.contains("d")) cfg.grid.d = ints_from_json(g.at("d"));
    }
    if (j.contains("n_seeds")) cfg.n_seeds = j.at("n_seeds").get<int>();
    if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
    if (j.contains("bound_c")) cfg.bound_c = j.at("bound_c").get<double>();
    if (j.contains("calibration_seeds")) cfg.calibration_seeds = j.at("calibration_seeds").get<int>();
    if (j.contains("budget")) cfg.budget = j.at("budget").get<double>();
    if (j.contains("n_candidates")) cfg.n_candidates = j.at("n_candidates").get<int>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
    if (j.contains("stable_timing")) cfg.stable_timing = j.at("stable_timing").get<bool>();
    if (j.contains("me")) {
        const Json& m = j.at("me");
        if (m.contains("feas_tol")) cfg.me.feas_tol = m.at("feas_tol").get<double>();
        if (m.contains("max_iters")) cfg.me.max_iters = m.at("max_iters").get<int>();
        if (m.contains("restarts")) cfg.me.restarts = m.at("restarts").get<int>();
        if (m.contains("factor_rank")) cfg.me.factor_rank = m.at("factor_rank").get<int>();
        if (m.contains("bisect_tol_rel")) cfg.me.bisect_tol_rel = m.at("bisect_tol_rel").get<double>();
        if (m.contains("seed")) cfg.me.seed = m.at("seed").get<std::uint64_t>();
    }
    if (j.contains("dis")) {
        const Json& d = j.at("dis");
        if (d.contains("max_iters")) cfg.dis.max_iters = d.at("max_iters").get<int>();
        if (d.contains("step0")) cfg.dis.step0 = d.at("step0").get<double>();
        if (d.contains("stages")) cfg.dis.stages = d.at("stages").get<int>();
        if (d.contains("random_restarts")) cfg.dis.random_restarts = d.at("random_restarts").get<int>();
        if (d.contains("seed")) cfg.dis.seed = d.at("seed").get<std::uint64_t>();
    }
    return cfg;
}

Json experiment_config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["kind"] = to_string(cfg.kind);
    j["grid"]["n"] = cfg.grid.n;
    j["grid"]["m"] = cfg.grid.m;
    j["grid"]["K"] = cfg.grid.K;
    j["grid"]["H"] = cfg.grid.H;
    j["grid"]["d"] = cfg.grid.d;
    j["n_seeds"] = cfg.n_seeds;
    j["delta"] = cfg.delta;
    j["seed"] = cfg.seed;
    j["mode"] = cfg.mode;
    j["bound_c"] = cfg.bound_c;
    j["calibration_seeds"] = cfg.calibration_seeds;
    j["budget"] = cfg.budget;
    j["n_candidates"] = cfg.n_candidates;
    j["stable_timing"] = cfg.stable_timing;
    j["me"] = {{"feas_tol", cfg.me.feas_tol},
               {"max_iters", cfg.me.max_iters},
               {"restarts", cfg.me.restarts},
               {"factor_rank", cfg.me.factor_rank},
               {"bisect_tol_rel", cfg.me.bisect_tol_rel},
               {"seed", cfg.me.seed}};
    j["dis"] = {{"max_iters", cfg.dis.max_iters},
                {"step0", cfg.dis.step0},
                {"stages", cfg.dis.stages},
                {"random_restarts", cfg.dis.random_restarts},
                {"seed", cfg.dis.seed}};
    return j;
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string dump = experiment_config_to_json(config).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string version_string() { return "lowrank-ope-0.1.0"; }

namespace {

void append_double(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
}

}  // namespace

void write_csv(std::ostream& out, const ExperimentConfig& config, const ExperimentResult& result) {
    const std::string hash = config_hash(config);
    const std::string version = version_string();
    out << "# lowrank-ope experiment kind=" << to_string(config.kind) << "\n";
    out << "# config_hash=" << hash << " version=" << version << "\n";
    out << "# calibrated_c=";
    append_double(out, result.calibrated_c);
    out << "\n";
    out << "experiment,n,m,S,A,H,d,K,seed,mode,measured_error,bound_inf,bound_fin,dis,emp_dis,"
           "conc_coeff,runtime_ms,policy_bound,config_hash,version\n";
    for (const ResultRow& r : result.rows) {
        out << r.experiment << ',' << r.n << ',' << r.m << ',' << r.S << ',' << r.A << ',' << r.H
            << ',' << r.d << ',' << r.K << ',' << r.seed << ',' << r.mode << ',';
        append_double(out, r.measured_error);
        out << ',';
        append_double(out, r.bound_inf);
        out << ',';
        append_double(out, r.bound_fin);
        out << ',';
        append_double(out, r.dis);
        out << ',';
        append_double(out, r.emp_dis);
        out << ',';
        append_double(out, r.conc_coeff);
        out << ',';
        append_double(out, r.runtime_ms);
        out << ',';
        append_double(out, r.policy_bound);
        out << ',' << hash << ',' << version << "\n";
    }
}

std::string csv_string(const ExperimentConfig& config, const ExperimentResult& result) {
    std::ostringstream ss;
    write_csv(ss, config, result);
    return ss.str();
}

}  // namespace lowrank
