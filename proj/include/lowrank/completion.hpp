#pragma once

#include "lowrank/types.hpp"

#include <cstdint>
#include <stdexcept>

namespace lowrank {

enum class MEMode {
    kEquality,      // match the observed entries exactly on the weight support
    kInnerProduct,  // match the weighted mean of the observed matrix up to a slack
};

/// One matrix-estimation instance: complete a partially constrained S x A
/// matrix with small max norm inside the box ||M||_inf <= entry_bound.
struct MEProblem {
    Matrix weights;       // nonnegative, sums to 1; its support defines the constraints
    Matrix observed;      // values required on supp(weights); NaN allowed elsewhere
    double entry_bound = 1.0;  // L
    int rank_param = 2;        // d
    MEMode mode = MEMode::kEquality;
    double slack = 0.0;        // inner-product mode only, >= 0

    void validate() const;
};

struct MEConfig {
    double feas_tol = 1e-7;        // constraint residual accepted as feasible
    double box_tol = 1e-8;         // entrywise box violation accepted before the final clip
    int max_iters = 2000;          // projected-gradient iterations per feasibility probe
    int restarts = 3;              // random restarts beyond the deterministic starts
    int factor_rank = 0;           // 0 -> min(S, A)
    double bisect_tol_rel = 1e-4;  // budget bisection tolerance, relative to entry_bound
    int stall_iters = 200;         // probe aborts after this many non-improving iterations
    std::uint64_t seed = 0;
};

struct MESolution {
    Matrix estimate;               // S x A, ||.||_inf <= entry_bound
    double max_norm_value = 0.0;   // certified upper bound on ||estimate||_max
    double constraint_residual = 0.0;
    int iterations = 0;            // total projected-gradient iterations spent
    bool converged = false;
};

/// Thrown when no feasible point is found even at the sqrt(d) * entry_bound
/// budget cap. Carries the best residual reached for diagnosis.
class MESolverFailure : public std::runtime_error {
  public:
    MESolverFailure(const std::string& what, double best_residual)
        : std::runtime_error(what), best_residual_(best_residual) {}
    double best_residual() const { return best_residual_; }

  private:
    double best_residual_;
};

/**
 * Max-norm-budgeted completion via bisection over the budget tau in
 * [lower bound, sqrt(d) * L]. Each probe solves a feasibility subproblem in
 * factored form M = U V' with every row of U and V projected onto the l2 ball
 * of radius sqrt(tau), minimizing the squared constraint residual plus a
 * hinge penalty for the entrywise box, by projected gradient descent with
 * Polyak steps; the deterministic starts are followed by `restarts` seeded
 * random starts. The final iterate is clipped into the box and its residual
 * re-checked.
 *
 * The returned certificate satisfies max_norm_value <= sqrt(d) * L + bisect
 * tolerance whenever the observed data admits that cap. Identical problem and
 * config produce a bit-identical solution.
 */
MESolution solve_me(const MEProblem& problem, const MEConfig& config = {});

}  // namespace lowrank
