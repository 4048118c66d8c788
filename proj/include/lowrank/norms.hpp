#pragma once

#include "lowrank/types.hpp"

namespace lowrank {

/// Largest singular value.
double operator_norm(const Matrix& m);

/// Sum of singular values.
double nuclear_norm(const Matrix& m);

/// Largest singular value together with its left/right singular vectors, plus
/// the second singular value (used to detect near-degenerate top pairs).
struct TopSingularPair {
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    Vector u1, v1;
    Vector u2, v2;
};
TopSingularPair top_singular_pair(const Matrix& m);

/// Count of singular values above rel_tol * sigma_max.
int numerical_rank(const Matrix& m, double rel_tol = 1e-8);

struct MaxNormBound {
    double lower = 0.0;  // nuclear / sqrt(n*m)
    double upper = 0.0;  // certified factorization bound
};

/**
 * Two-sided estimate of the max norm (the factorization norm
 * min_{M=UV'} ||U||_{2->inf} ||V||_{2->inf}). The lower bound is
 * nuclear(M)/sqrt(n m). The upper bound is the smallest of
 * sqrt(numerical rank) * ||M||_inf, nuclear(M), and the best row-norm product
 * found by a short diagonal-rescaling search over the balanced SVD factors.
 * rank_hint > 0 additionally caps the rank used in the first bound.
 */
MaxNormBound max_norm_bound(const Matrix& m, int rank_hint = 0);

}  // namespace lowrank
