#pragma once

#include "lowrank/types.hpp"

#include <cstdint>

namespace lowrank {

struct DiscrepancyConfig {
    int max_iters = 3000;       // per step-size stage per restart
    double step0 = 0.5;         // initial step scale; stages shrink it
    int stages = 3;             // step annealing stages (step0, step0/10, ...)
    int stall_iters = 200;
    double stall_tol = 1e-8;    // convergence: best value improves less than this
    int random_restarts = 3;    // on top of the two deterministic starts
    std::uint64_t seed = 0;
};

struct DiscrepancyResult {
    double value = 0.0;        // ||g* - q||_op at the returned minimizer
    Matrix minimizer;          // feasible g*
    int iterations = 0;
    bool converged = false;
    double certificate_gap = 0.0;  // linearization (Frank-Wolfe) gap at g*
};

/**
 * Support-constrained spectral distance between two distributions over
 * state-action pairs: minimize ||g - q||_op over distributions g supported
 * inside supp(p). Solved by projected subgradient descent (top singular pair
 * subgradient, simplex projection restricted to the support, steps
 * step0/sqrt(k) with annealed stages, best-iterate tracking) restarted from
 * p, from q masked onto supp(p) and renormalized, and from random feasible
 * points. The value is always a feasible upper bound on the true minimum;
 * certificate_gap reports the linearization gap so callers can judge solver
 * quality instead of trusting it.
 */
DiscrepancyResult operator_discrepancy(const Matrix& p, const Matrix& q,
                                       const DiscrepancyConfig& config = {});

/// ||p - q||_op. Upper-bounds operator_discrepancy(p, q) by feasibility of p.
double empirical_operator_discrepancy(const Matrix& p, const Matrix& q);

/**
 * Policy-level analogue: minimize ||pi - pi_target||_op over row-stochastic
 * pi whose rows are supported inside the corresponding rows of pi_behavior.
 * Every behavior row must have nonempty support.
 */
DiscrepancyResult policy_operator_discrepancy(const Matrix& pi_behavior, const Matrix& pi_target,
                                              const DiscrepancyConfig& config = {});

/// max d_target / d_behavior over the target's support; +inf when the target
/// visits a pair the behavior cannot.
double concentrability_coefficient(const Matrix& d_behavior, const Matrix& d_target,
                                   double support_threshold = 1e-12);

}  // namespace lowrank
