#include "lowrank/completion.hpp"

#include "lowrank/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lowrank {

void MEProblem::validate() const {
    if (weights.rows() != observed.rows() || weights.cols() != observed.cols())
        throw std::invalid_argument("MEProblem: shape mismatch");
    if (weights.minCoeff() < 0.0) throw std::invalid_argument("MEProblem: negative weights");
    if (std::abs(weights.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("MEProblem: weights must sum to 1");
    if (entry_bound <= 0.0) throw std::invalid_argument("MEProblem: entry bound must be positive");
    if (rank_param < 1) throw std::invalid_argument("MEProblem: rank parameter must be positive");
    if (mode == MEMode::kInnerProduct && slack < 0.0)
        throw std::invalid_argument("MEProblem: slack must be nonnegative");
    for (Eigen::Index i = 0; i < weights.rows(); ++i)
        for (Eigen::Index j = 0; j < weights.cols(); ++j)
            if (weights(i, j) > 0.0 && !std::isfinite(observed(i, j)))
                throw std::invalid_argument("MEProblem: observed undefined on the weight support");
}

namespace {

constexpr double kBoxPenaltyWeight = 10.0;

struct SupportEntry {
    Eigen::Index i, j;
    double y;    // observed value
    double rho;  // weight
};

struct Workspace {
    Eigen::Index S, A;
    int rank;
    double L;
    double slack;
    MEMode mode;
    double feas_tol;
    double box_tol;
    std::vector<SupportEntry> support;
    double observed_mean = 0.0;  // <rho, Z>, inner-product mode
};

double max_row_norm(const Matrix& m) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).norm());
    return best;
}

void project_rows(Matrix& m, double radius) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double norm = m.row(i).norm();
        if (norm > radius) m.row(i) *= radius / norm;
    }
}

struct Residuals {
    double mode_linf = 0.0;   // equality: max |M - Y| on support; ip: max(0, |e| - slack)
    double box_linf = 0.0;
    double objective = 0.0;   // squared residual + weighted box hinge
    double mean_error = 0.0;  // ip: <rho, M - Z>
};

Residuals measure(const Workspace& ws, const Matrix& m) {
    Residuals r;
    if (ws.mode == MEMode::kEquality) {
        for (const auto& e : ws.support) {
            const double diff = m(e.i, e.j) - e.y;
            r.mode_linf = std::max(r.mode_linf, std::abs(diff));
            r.objective += diff * diff;
        }
    } else {
        double mean = 0.0;
        for (const auto& e : ws.support) mean += e.rho * m(e.i, e.j);
        r.mean_error = mean - ws.observed_mean;
        const double viol = std::max(0.0, std::abs(r.mean_error) - ws.slack);
        r.mode_linf = viol;
        r.objective = viol * viol;
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double over = std::abs(m(i, j)) - ws.L;
            if (over > 0.0) {
                r.box_linf = std::max(r.box_linf, over);
                r.objective += kBoxPenaltyWeight * over * over;
            }
        }
    }
    return r;
}

// Internal feasibility is slightly tighter than the advertised tolerance so
// the final box clip cannot push the residual past the contract.
bool feasible(const Workspace& ws, const Residuals& r) {
    return r.mode_linf <= 0.9 * ws.feas_tol && r.box_linf <= ws.box_tol;
}

Matrix objective_gradient(const Workspace& ws, const Matrix& m, const Residuals& r) {
    Matrix g = Matrix::Zero(ws.S, ws.A);
    if (ws.mode == MEMode::kEquality) {
        for (const auto& e : ws.support) g(e.i, e.j) = 2.0 * (m(e.i, e.j) - e.y);
    } else if (r.mode_linf > 0.0) {
        const double scale = 2.0 * r.mode_linf * (r.mean_error >= 0.0 ? 1.0 : -1.0);
        for (const auto& e : ws.support) g(e.i, e.j) = scale * e.rho;
    }
    for (Eigen::Index i = 0; i < ws.S; ++i) {
        for (Eigen::Index j = 0; j < ws.A; ++j) {
            const double over = std::abs(m(i, j)) - ws.L;
            if (over > 0.0)
                g(i, j) += 2.0 * kBoxPenaltyWeight * over * (m(i, j) >= 0.0 ? 1.0 : -1.0);
        }
    }
    return g;
}

struct ProbeResult {
    bool feasible = false;
    Matrix u, v;
    double best_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

// Projected gradient feasibility probe at a fixed budget. Polyak steps toward
// objective zero with halving on increase; aborts on stall.
ProbeResult run_probe(const Workspace& ws, Matrix u, Matrix v, double tau, const MEConfig& config) {
    ProbeResult out;
    const double radius = std::sqrt(tau);
    project_rows(u, radius);
    project_rows(v, radius);
    Matrix m = u * v.transpose();
    Residuals res = measure(ws, m);
    double best_obj = res.objective;
    int stall = 0;
    for (int it = 0; it < config.max_iters; ++it) {
        out.iterations = it + 1;
        out.best_residual = std::min(out.best_residual, res.mode_linf + res.box_linf);
        if (feasible(ws, res)) {
            out.feasible = true;
            out.u = std::move(u);
            out.v = std::move(v);
            return out;
        }
        const Matrix g = objective_gradient(ws, m, res);
        Matrix gu = g * v;
        Matrix gv = g.transpose() * u;
        const double gnorm2 = gu.squaredNorm() + gv.squaredNorm();
        if (gnorm2 < 1e-300) break;  // flat: no descent direction at this budget
        double eta = res.objective / gnorm2;
        Matrix u_next, v_next, m_next;
        Residuals res_next;
        bool improved = false;
        for (int halving = 0; halving < 30; ++halving) {
            u_next = u - eta * gu;
            v_next = v - eta * gv;
            project_rows(u_next, radius);
            project_rows(v_next, radius);
            m_next = u_next * v_next.transpose();
            res_next = measure(ws, m_next);
            if (res_next.objective < res.objective) {
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        // A descent step must exist unless the iterate is projected-stationary,
        // and the update is deterministic, so retrying cannot help.
        if (!improved) break;
        u = std::move(u_next);
        v = std::move(v_next);
        m = std::move(m_next);
        res = res_next;
        if (res.objective < best_obj * (1.0 - 1e-4)) {
            best_obj = res.objective;
            stall = 0;
        } else if (++stall >= config.stall_iters) {
            break;
        }
    }
    out.best_residual = std::min(out.best_residual, res.mode_linf + res.box_linf);
    return out;
}

// Per-column diagonal rescaling (ternary search on each log scale) shrinking
// the max-row-norm product of a factorization without changing the product
// U V'.
void balance_columns(Matrix& u, Matrix& v) {
    const int k = static_cast<int>(u.cols());
    auto product = [&](const Vector& logd) {
        Matrix us = u, vs = v;
        for (int j = 0; j < k; ++j) {
            const double s = std::exp(logd(j));
            us.col(j) *= s;
            vs.col(j) /= s;
        }
        return max_row_norm(us) * max_row_norm(vs);
    };
    Vector logd = Vector::Zero(std::max(k, 1));
    for (int sweep = 0; sweep < 2; ++sweep) {
        for (int j = 0; j < k; ++j) {
            double lo = -1.5, hi = 1.5;
            for (int it = 0; it < 16; ++it) {
                const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
                Vector d1 = logd, d2 = logd;
                d1(j) += m1;
                d2(j) += m2;
                if (product(d1) < product(d2))
                    hi = m2;
                else
                    lo = m1;
            }
            logd(j) += 0.5 * (lo + hi);
        }
    }
    for (int j = 0; j < k; ++j) {
        const double s = std::exp(logd(j));
        u.col(j) *= s;
        v.col(j) /= s;
    }
}

// Deterministic start from the thin SVD of the zero-filled observations, with
// the rescaling pass above. When the product already fits under the budget
// this start is exactly feasible for equality problems with full support.
void svd_start(const Workspace& ws, Matrix& u, Matrix& v) {
    Matrix filled = Matrix::Zero(ws.S, ws.A);
    for (const auto& e : ws.support) filled(e.i, e.j) = e.y;
    Eigen::JacobiSVD<Matrix> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = Matrix::Zero(ws.S, ws.rank);
    v = Matrix::Zero(ws.A, ws.rank);
    const int k = std::min<int>(ws.rank, static_cast<int>(svd.singularValues().size()));
    for (int j = 0; j < k; ++j) {
        const double root = std::sqrt(svd.singularValues()(j));
        u.col(j) = svd.matrixU().col(j) * root;
        v.col(j) = svd.matrixV().col(j) * root;
    }
    balance_columns(u, v);
}

// Alternating ridge least squares on the observed entries at the generative
// rank. Backup targets are low-rank by construction, so this usually lands on
// an exact completion whose balanced row-norm product is already close to the
// smallest feasible budget.
void als_start(const Workspace& ws, int gen_rank, Matrix& u, Matrix& v) {
    svd_start(ws, u, v);
    const int k = std::max(1, std::min(gen_rank, ws.rank));
    Matrix uk = u.leftCols(k);
    Matrix vk = v.leftCols(k);
    std::vector<std::vector<const SupportEntry*>> by_row(static_cast<std::size_t>(ws.S));
    std::vector<std::vector<const SupportEntry*>> by_col(static_cast<std::size_t>(ws.A));
    for (const auto& e : ws.support) {
        by_row[static_cast<std::size_t>(e.i)].push_back(&e);
        by_col[static_cast<std::size_t>(e.j)].push_back(&e);
    }
    const double ridge = 1e-10;
    for (int round = 0; round < 80; ++round) {
        for (Eigen::Index i = 0; i < ws.S; ++i) {
            if (by_row[static_cast<std::size_t>(i)].empty()) continue;
            Matrix gram = ridge * Matrix::Identity(k, k);
            Vector rhs = Vector::Zero(k);
            for (const auto* e : by_row[static_cast<std::size_t>(i)]) {
                gram += vk.row(e->j).transpose() * vk.row(e->j);
                rhs += e->y * vk.row(e->j).transpose();
            }
            uk.row(i) = gram.ldlt().solve(rhs).transpose();
        }
        double residual = 0.0;
        for (Eigen::Index j = 0; j < ws.A; ++j) {
            if (by_col[static_cast<std::size_t>(j)].empty()) continue;
            Matrix gram = ridge * Matrix::Identity(k, k);
            Vector rhs = Vector::Zero(k);
            for (const auto* e : by_col[static_cast<std::size_t>(j)]) {
                gram += uk.row(e->i).transpose() * uk.row(e->i);
                rhs += e->y * uk.row(e->i).transpose();
            }
            vk.row(j) = gram.ldlt().solve(rhs).transpose();
        }
        for (const auto& e : ws.support) {
            const double diff = uk.row(e.i).dot(vk.row(e.j)) - e.y;
            residual = std::max(residual, std::abs(diff));
        }
        if (residual < 1e-12) break;
    }
    u.setZero();
    v.setZero();
    u.leftCols(k) = uk;
    v.leftCols(k) = vk;
    balance_columns(u, v);
}

// Flat mean-matching start for the inner-product mode.
void flat_start(const Workspace& ws, Matrix& u, Matrix& v) {
    double target = ws.observed_mean;
    target = (target >= 0.0 ? 1.0 : -1.0) * std::max(0.0, std::abs(target) - ws.slack);
    target = std::clamp(target, -ws.L, ws.L);
    u = Matrix::Zero(ws.S, ws.rank);
    v = Matrix::Zero(ws.A, ws.rank);
    const double root = std::sqrt(std::abs(target));
    u.col(0).setConstant(target >= 0.0 ? root : -root);
    v.col(0).setConstant(root);
}

void random_start(const Workspace& ws, SplitMix64& rng, double tau, Matrix& u, Matrix& v) {
    const double scale = std::sqrt(tau / static_cast<double>(ws.rank));
    u.resize(ws.S, ws.rank);
    v.resize(ws.A, ws.rank);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = rng.uniform(-scale, scale);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-scale, scale);
}

struct Attempt {
    bool feasible = false;
    Matrix u, v;
    double best_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

Attempt attempt_budget(const Workspace& ws, double tau, const MEConfig& config,
                       const Matrix* warm_u, const Matrix* warm_v,
                       const std::pair<Matrix, Matrix>* als, std::uint64_t probe_id) {
    Attempt out;
    std::vector<std::pair<Matrix, Matrix>> starts;
    // When the inner-product slack can never bind (at or past twice the
    // entry bound), the exact minimizer is the flat mean-matching matrix.
    // Otherwise only data-shaped starts are used: a flat start would wash
    // the observed structure out of the returned completion.
    if (ws.mode == MEMode::kInnerProduct && ws.slack >= 2.0 * ws.L) {
        Matrix u, v;
        flat_start(ws, u, v);
        starts.emplace_back(std::move(u), std::move(v));
    }
    if (als != nullptr) starts.emplace_back(*als);
    {
        // Fresh data-shaped start at every budget; warm factors only as a
        // fallback. Re-projecting the previous probe's output compounds the
        // row shrinkage and flattens the completion over the bisection.
        Matrix u, v;
        svd_start(ws, u, v);
        starts.emplace_back(std::move(u), std::move(v));
    }
    if (warm_u != nullptr) starts.emplace_back(*warm_u, *warm_v);
    for (int r = 0; r < config.restarts; ++r) {
        SplitMix64 rng(SplitMix64::derive(config.seed, probe_id * 64 + static_cast<std::uint64_t>(r)));
        Matrix u, v;
        random_start(ws, rng, tau, u, v);
        starts.emplace_back(std::move(u), std::move(v));
    }
    for (auto& [u, v] : starts) {
        ProbeResult probe = run_probe(ws, std::move(u), std::move(v), tau, config);
        out.iterations += probe.iterations;
        out.best_residual = std::min(out.best_residual, probe.best_residual);
        if (probe.feasible) {
            out.feasible = true;
            out.u = std::move(probe.u);
            out.v = std::move(probe.v);
            return out;
        }
    }
    return out;
}

}  // namespace

MESolution solve_me(const MEProblem& problem, const MEConfig& config) {
    problem.validate();
    Workspace ws;
    ws.S = problem.weights.rows();
    ws.A = problem.weights.cols();
    ws.rank = config.factor_rank > 0 ? config.factor_rank
                                     : static_cast<int>(std::min(ws.S, ws.A));
    ws.L = problem.entry_bound;
    ws.slack = problem.slack;
    ws.mode = problem.mode;
    ws.feas_tol = config.feas_tol;
    ws.box_tol = config.box_tol;
    for (Eigen::Index i = 0; i < ws.S; ++i)
        for (Eigen::Index j = 0; j < ws.A; ++j)
            if (problem.weights(i, j) > 0.0)
                ws.support.push_back({i, j, problem.observed(i, j), problem.weights(i, j)});
    if (ws.support.empty()) throw std::invalid_argument("solve_me: empty weight support");
    if (ws.mode == MEMode::kInnerProduct)
        for (const auto& e : ws.support) ws.observed_mean += e.rho * e.y;

    const double d = static_cast<double>(problem.rank_param);
    const double tau_hi = std::sqrt(d) * ws.L;
    double tau_lo = 0.0;
    if (ws.mode == MEMode::kEquality) {
        for (const auto& e : ws.support) tau_lo = std::max(tau_lo, std::abs(e.y));
    } else {
        tau_lo = std::max(0.0, std::abs(ws.observed_mean) - ws.slack);
    }
    tau_lo = std::min(tau_lo, tau_hi);

    std::pair<Matrix, Matrix> als;
    const std::pair<Matrix, Matrix>* als_ptr = nullptr;
    if (ws.mode == MEMode::kEquality) {
        als_start(ws, problem.rank_param, als.first, als.second);
        als_ptr = &als;
    }

    int total_iterations = 0;
    std::uint64_t probe_id = 0;
    Attempt top = attempt_budget(ws, tau_hi, config, nullptr, nullptr, als_ptr, probe_id++);
    total_iterations += top.iterations;
    if (!top.feasible)
        throw MESolverFailure("solve_me: infeasible at the sqrt(d)*L budget cap", top.best_residual);

    // Feasible factors certify the budget given by their own row-norm
    // product; rebalancing makes the rows symmetric so they stay inside any
    // not-smaller budget without projection.
    auto certified_budget = [](Matrix& u, Matrix& v) {
        const double ru = max_row_norm(u), rv = max_row_norm(v);
        if (ru > 0.0 && rv > 0.0) {
            const double scale = std::sqrt(rv / ru);
            u *= scale;
            v /= scale;
        }
        return ru * rv;
    };

    Matrix best_u = std::move(top.u), best_v = std::move(top.v);
    double lo = tau_lo, hi = std::min(tau_hi, certified_budget(best_u, best_v));
    const double bisect_tol = config.bisect_tol_rel * ws.L;
    while (hi - lo > bisect_tol) {
        const double mid = 0.5 * (lo + hi);
        Attempt probe = attempt_budget(ws, mid, config, &best_u, &best_v, als_ptr, probe_id++);
        total_iterations += probe.iterations;
        if (probe.feasible) {
            best_u = std::move(probe.u);
            best_v = std::move(probe.v);
            hi = std::min(mid, certified_budget(best_u, best_v));
        } else {
            lo = mid;
        }
    }

    MESolution sol;
    sol.estimate = best_u * best_v.transpose();
    sol.max_norm_value = std::min(hi, max_row_norm(best_u) * max_row_norm(best_v));
    sol.estimate = sol.estimate.cwiseMax(-ws.L).cwiseMin(ws.L);
    const Residuals final_res = measure(ws, sol.estimate);
    sol.constraint_residual = final_res.mode_linf;
    sol.iterations = total_iterations;
    sol.converged = final_res.mode_linf <= config.feas_tol && final_res.box_linf == 0.0;
    return sol;
}

}  // namespace lowrank
