#include "lowrank/discrepancy.hpp"

#include "lowrank/norms.hpp"
#include "lowrank/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lowrank {

namespace {

using Coord = std::pair<Eigen::Index, Eigen::Index>;

// The feasible set is a product of simplices over disjoint coordinate groups:
// one group spanning supp(p) for distribution discrepancy, one group per state
// row for the policy variant. Everything off-group is pinned to zero.
struct FeasibleSet {
    Eigen::Index rows, cols;
    std::vector<std::vector<Coord>> groups;

    Matrix zero() const { return Matrix::Zero(rows, cols); }

    void project(Matrix& g) const {
        Matrix out = zero();
        std::vector<double> buf;
        for (const auto& group : groups) {
            buf.clear();
            for (const auto& [i, j] : group) buf.push_back(g(i, j));
            project_to_simplex(buf);
            for (std::size_t k = 0; k < group.size(); ++k)
                out(group[k].first, group[k].second) = buf[k];
        }
        g = std::move(out);
    }

    double vertex_min(const Matrix& grad) const {
        double total = 0.0;
        for (const auto& group : groups) {
            double lo = std::numeric_limits<double>::infinity();
            for (const auto& [i, j] : group) lo = std::min(lo, grad(i, j));
            total += lo;
        }
        return total;
    }

    Matrix masked_renormalized(const Matrix& q) const {
        Matrix out = zero();
        for (const auto& group : groups) {
            double mass = 0.0;
            for (const auto& [i, j] : group) mass += std::max(q(i, j), 0.0);
            if (std::abs(mass - 1.0) <= 1e-12) {
                // Already feasible on this group: copy exactly so that a
                // feasible q yields a discrepancy of exactly zero.
                for (const auto& [i, j] : group) out(i, j) = std::max(q(i, j), 0.0);
            } else if (mass > 1e-12) {
                for (const auto& [i, j] : group) out(i, j) = std::max(q(i, j), 0.0) / mass;
            } else {
                for (const auto& [i, j] : group)
                    out(i, j) = 1.0 / static_cast<double>(group.size());
            }
        }
        return out;
    }

    Matrix random_point(SplitMix64& rng) const {
        Matrix out = zero();
        for (const auto& group : groups) {
            double mass = 0.0;
            std::vector<double> w(group.size());
            for (auto& x : w) {
                x = rng.uniform(0.01, 1.0);
                mass += x;
            }
            for (std::size_t k = 0; k < group.size(); ++k)
                out(group[k].first, group[k].second) = w[k] / mass;
        }
        return out;
    }

    static void project_to_simplex(std::vector<double>& x) {
        std::vector<double> sorted = x;
        std::sort(sorted.begin(), sorted.end(), std::greater<double>());
        double running = 0.0, theta = 0.0;
        int pivot = 0;
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            running += sorted[k];
            const double candidate = (running - 1.0) / static_cast<double>(k + 1);
            if (sorted[k] - candidate > 0.0) {
                theta = candidate;
                pivot = static_cast<int>(k + 1);
            }
        }
        (void)pivot;
        for (auto& v : x) v = std::max(v - theta, 0.0);
    }
};

Matrix subgradient(const TopSingularPair& top, Eigen::Index rows, Eigen::Index cols) {
    if (top.sigma1 <= 0.0) return Matrix::Zero(rows, cols);
    // Near the crossing of the two leading singular values the objective is
    // non-differentiable; averaging the two rank-one subgradients damps the
    // oscillation there.
    if (top.sigma1 - top.sigma2 <= 1e-8 * std::max(top.sigma1, 1.0) && top.u2.size() > 0)
        return 0.5 * (top.u1 * top.v1.transpose() + top.u2 * top.v2.transpose());
    return top.u1 * top.v1.transpose();
}

DiscrepancyResult minimize_over(const FeasibleSet& set, const Matrix& p, const Matrix& q,
                                const DiscrepancyConfig& config) {
    DiscrepancyResult result;
    result.value = std::numeric_limits<double>::infinity();
    int total_iters = 0;
    bool final_stage_stalled = false;

    std::vector<Matrix> starts;
    starts.push_back(set.masked_renormalized(p));
    starts.push_back(set.masked_renormalized(q));
    for (int r = 0; r < config.random_restarts; ++r) {
        SplitMix64 rng(SplitMix64::derive(config.seed, 0xD15ULL + static_cast<std::uint64_t>(r)));
        starts.push_back(set.random_point(rng));
    }

    auto run_stage = [&](Matrix g, double step0, bool* stalled) {
        int stall = 0;
        if (stalled) *stalled = false;
        for (int k = 1; k <= config.max_iters; ++k) {
            ++total_iters;
            const Matrix diff = g - q;
            const TopSingularPair top = top_singular_pair(diff);
            const double value = top.sigma1;
            const bool meaningful = value < result.value - config.stall_tol;
            if (value < result.value) {
                result.value = value;
                result.minimizer = g;
            }
            if (meaningful) {
                stall = 0;
            } else if (++stall >= config.stall_iters) {
                if (stalled) *stalled = true;
                break;
            }
            if (result.value <= 1e-15) {
                if (stalled) *stalled = true;
                break;  // exact optimum; nothing below zero
            }
            g -= (step0 / std::sqrt(static_cast<double>(k))) * subgradient(top, g.rows(), g.cols());
            set.project(g);
        }
    };

    for (const Matrix& start : starts) {
        double step = config.step0;
        for (int stage = 0; stage < config.stages; ++stage, step *= 0.1) {
            const Matrix from = (stage == 0) ? start : result.minimizer;
            run_stage(from, step, nullptr);
        }
    }
    // Polishing pass from the overall best point; its stall flag doubles as
    // the convergence signal.
    run_stage(result.minimizer, config.step0 * std::pow(0.1, config.stages - 1),
              &final_stage_stalled);

    result.iterations = total_iters;
    result.converged = final_stage_stalled;
    const Matrix diff = result.minimizer - q;
    const Matrix grad = subgradient(top_singular_pair(diff), diff.rows(), diff.cols());
    result.certificate_gap =
        (grad.array() * result.minimizer.array()).sum() - set.vertex_min(grad);
    return result;
}

void check_distribution(const Matrix& m, const char* name) {
    if (m.size() == 0) throw std::invalid_argument(std::string(name) + ": empty matrix");
    if (m.minCoeff() < -1e-12)
        throw std::invalid_argument(std::string(name) + ": negative entries");
    if (std::abs(m.sum() - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(name) + ": entries must sum to 1");
}

}  // namespace

DiscrepancyResult operator_discrepancy(const Matrix& p, const Matrix& q,
                                       const DiscrepancyConfig& config) {
    check_distribution(p, "operator_discrepancy: p");
    check_distribution(q, "operator_discrepancy: q");
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw std::invalid_argument("operator_discrepancy: shape mismatch");
    FeasibleSet set;
    set.rows = p.rows();
    set.cols = p.cols();
    set.groups.emplace_back();
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            if (p(i, j) > 1e-12) set.groups[0].push_back({i, j});
    if (set.groups[0].empty()) throw std::invalid_argument("operator_discrepancy: empty support");
    return minimize_over(set, p, q, config);
}

double empirical_operator_discrepancy(const Matrix& p, const Matrix& q) {
    check_distribution(p, "empirical_operator_discrepancy: p");
    check_distribution(q, "empirical_operator_discrepancy: q");
    return operator_norm(p - q);
}

DiscrepancyResult policy_operator_discrepancy(const Matrix& pi_behavior, const Matrix& pi_target,
                                              const DiscrepancyConfig& config) {
    if (pi_behavior.rows() != pi_target.rows() || pi_behavior.cols() != pi_target.cols())
        throw std::invalid_argument("policy_operator_discrepancy: shape mismatch");
    for (Eigen::Index s = 0; s < pi_behavior.rows(); ++s) {
        if (std::abs(pi_behavior.row(s).sum() - 1.0) > 1e-9 ||
            std::abs(pi_target.row(s).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("policy_operator_discrepancy: rows must sum to 1");
    }
    FeasibleSet set;
    set.rows = pi_behavior.rows();
    set.cols = pi_behavior.cols();
    for (Eigen::Index s = 0; s < pi_behavior.rows(); ++s) {
        std::vector<Coord> row;
        for (Eigen::Index a = 0; a < pi_behavior.cols(); ++a)
            if (pi_behavior(s, a) > 1e-12) row.push_back({s, a});
        if (row.empty())
            throw std::invalid_argument("policy_operator_discrepancy: behavior row with empty support");
        set.groups.push_back(std::move(row));
    }
    return minimize_over(set, pi_behavior, pi_target, config);
}

double concentrability_coefficient(const Matrix& d_behavior, const Matrix& d_target,
                                   double support_threshold) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d_target.rows(); ++i) {
        for (Eigen::Index j = 0; j < d_target.cols(); ++j) {
            if (d_target(i, j) <= support_threshold) continue;
            if (d_behavior(i, j) <= support_threshold)
                return std::numeric_limits<double>::infinity();
            worst = std::max(worst, d_target(i, j) / d_behavior(i, j));
        }
    }
    return worst;
}

}  // namespace lowrank
