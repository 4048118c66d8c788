#include "lowrank/completion.hpp"
#include "lowrank/norms.hpp"
#include "lowrank/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace lowrank;

namespace {

Matrix random_rank_k(SplitMix64& rng, int r, int c, int k, double lo = -1.0, double hi = 1.0) {
    Matrix m = Matrix::Zero(r, c);
    for (int i = 0; i < k; ++i) {
        Matrix u(r, 1), v(1, c);
        for (int j = 0; j < r; ++j) u(j, 0) = rng.uniform(lo, hi);
        for (int j = 0; j < c; ++j) v(0, j) = rng.uniform(lo, hi);
        m += u * v;
    }
    return m;
}

Matrix uniform_weights(int r, int c) { return Matrix::Constant(r, c, 1.0 / (r * c)); }

}  // namespace

TEST_CASE("equality mode with full support pins every entry") {
    SplitMix64 rng(3);
    Matrix y = random_rank_k(rng, 5, 4, 2);
    y /= y.cwiseAbs().maxCoeff();  // inside the unit box
    MEProblem problem;
    problem.weights = uniform_weights(5, 4);
    problem.observed = y;
    problem.entry_bound = 1.0;
    problem.rank_param = 4;
    problem.mode = MEMode::kEquality;
    const MESolution sol = solve_me(problem);
    CHECK(sol.converged);
    CHECK((sol.estimate - y).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(sol.estimate.cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
}

TEST_CASE("inner-product mode with vacuous slack returns the zero matrix") {
    SplitMix64 rng(5);
    Matrix z = random_rank_k(rng, 4, 4, 2);
    z /= z.cwiseAbs().maxCoeff();
    MEProblem problem;
    problem.weights = uniform_weights(4, 4);
    problem.observed = z;
    problem.entry_bound = 1.0;
    problem.rank_param = 4;
    problem.mode = MEMode::kInnerProduct;
    problem.slack = 2.0;  // >= 2L: no constraint binds
    const MESolution sol = solve_me(problem);
    CHECK(sol.converged);
    CHECK(sol.estimate.cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(sol.max_norm_value <= 1e-3);
}

TEST_CASE("inner-product mode shrinks the mean by exactly the slack") {
    Matrix z = Matrix::Constant(3, 3, 0.6);
    MEProblem problem;
    problem.weights = uniform_weights(3, 3);
    problem.observed = z;
    problem.entry_bound = 1.0;
    problem.rank_param = 2;
    problem.mode = MEMode::kInnerProduct;
    problem.slack = 0.2;
    const MESolution sol = solve_me(problem);
    CHECK(sol.converged);
    double mean = (problem.weights.array() * sol.estimate.array()).sum();
    CHECK(std::abs(mean - 0.6) <= problem.slack + 1e-7);
    // Optimal budget is |<rho, Z>| - slack = 0.4.
    CHECK(sol.max_norm_value <= 0.4 + 1e-4 + 1e-6);
    CHECK(sol.max_norm_value >= 0.4 - 1e-4);
}

TEST_CASE("rank-1 completion on a connected support matches the factor-scaling oracle") {
    SplitMix64 rng(7);
    Vector u(4), v(4);
    for (int i = 0; i < 4; ++i) u(i) = rng.uniform(0.3, 1.0);
    for (int i = 0; i < 4; ++i) v(i) = rng.uniform(0.3, 1.0);
    const Matrix y = u * v.transpose();
    // First row, first column and the diagonal: connected, covers all rows
    // and columns.
    Matrix weights = Matrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i) {
        weights(0, i) = 1.0;
        weights(i, 0) = 1.0;
        weights(i, i) = 1.0;
    }
    weights /= weights.sum();

    MEProblem problem;
    problem.weights = weights;
    problem.observed = y;
    problem.entry_bound = 1.0;
    problem.rank_param = 2;
    problem.mode = MEMode::kEquality;
    const MESolution sol = solve_me(problem);
    CHECK(sol.converged);
    CHECK(sol.constraint_residual <= 1e-7);

    // Exhaustive search over the rank-one factor family (u, v) -> (s u, v / s):
    // connectivity forces any rank-one completion to be y itself, so the
    // family is parameterized by the scalar s alone.
    double oracle = 1e300;
    for (double s = 0.05; s <= 3.0; s += 0.01) {
        const double prod = (s * u).cwiseAbs().maxCoeff() * (v / s).cwiseAbs().maxCoeff();
        oracle = std::min(oracle, prod);
    }
    const double balanced = u.cwiseAbs().maxCoeff() * v.cwiseAbs().maxCoeff();
    CHECK(oracle == doctest::Approx(balanced).epsilon(1e-9));  // scaling cannot beat balance
    CHECK(sol.max_norm_value <= oracle + 1e-4 + 1e-6);
}

TEST_CASE("certified budget respects the sqrt(d) L cap on backup-shaped data") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const int S = 5 + trial, A = 4;
        const double L = 3.0;
        Matrix y = random_rank_k(rng, S, A, 2);
        y *= L / y.cwiseAbs().maxCoeff();
        Matrix weights = Matrix::Zero(S, A);
        int picked = 0;
        while (picked < S + A) {
            const int i = static_cast<int>(rng.next_below(S));
            const int j = static_cast<int>(rng.next_below(A));
            if (weights(i, j) == 0.0) ++picked;
            weights(i, j) = 1.0;
        }
        weights /= weights.sum();
        MEProblem problem;
        problem.weights = weights;
        problem.observed = y;
        problem.entry_bound = L;
        problem.rank_param = 2;
        problem.mode = MEMode::kEquality;
        const MESolution sol = solve_me(problem);
        CHECK(sol.converged);
        CHECK(sol.max_norm_value <= std::sqrt(2.0) * L + 1e-4 * L + 1e-9);
        // Sandwich: nuclear / sqrt(SA) lower-bounds any max-norm certificate.
        CHECK(nuclear_norm(sol.estimate) / std::sqrt(static_cast<double>(S * A)) <=
              sol.max_norm_value + 1e-6);
    }
}

TEST_CASE("identical problem and config solve bit-identically") {
    SplitMix64 rng(13);
    Matrix y = random_rank_k(rng, 6, 5, 2);
    y /= y.cwiseAbs().maxCoeff();
    Matrix weights = Matrix::Zero(6, 5);
    for (int i = 0; i < 6; ++i) weights(i, i % 5) = 1.0;
    weights(0, 1) = weights(1, 0) = 1.0;
    weights /= weights.sum();
    MEProblem problem;
    problem.weights = weights;
    problem.observed = y;
    problem.entry_bound = 1.0;
    problem.rank_param = 2;
    problem.mode = MEMode::kEquality;
    MEConfig config;
    config.seed = 99;
    const MESolution a = solve_me(problem, config);
    const MESolution b = solve_me(problem, config);
    REQUIRE(a.estimate.size() == b.estimate.size());
    CHECK(std::memcmp(a.estimate.data(), b.estimate.data(),
                      sizeof(double) * static_cast<std::size_t>(a.estimate.size())) == 0);
    CHECK(a.max_norm_value == b.max_norm_value);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("observations outside the box make the problem infeasible") {
    Matrix y = Matrix::Constant(3, 3, 5.0);  // |y| > sqrt(d) * L
    MEProblem problem;
    problem.weights = uniform_weights(3, 3);
    problem.observed = y;
    problem.entry_bound = 1.0;
    problem.rank_param = 2;
    problem.mode = MEMode::kEquality;
    MEConfig config;
    config.max_iters = 300;
    try {
        solve_me(problem, config);
        FAIL("expected MESolverFailure");
    } catch (const MESolverFailure& e) {
        CHECK(e.best_residual() > 0.0);
    }
}

TEST_CASE("problem validation rejects malformed instances") {
    MEProblem problem;
    problem.weights = Matrix::Constant(2, 2, 0.25);
    problem.observed = Matrix::Zero(2, 2);
    problem.entry_bound = 1.0;
    problem.rank_param = 2;
    SUBCASE("negative weights") {
        problem.weights(0, 0) = -0.1;
        CHECK_THROWS_AS(solve_me(problem), std::invalid_argument);
    }
    SUBCASE("weights not normalized") {
        problem.weights(0, 0) = 0.9;
        CHECK_THROWS_AS(solve_me(problem), std::invalid_argument);
    }
    SUBCASE("undefined observation on the support") {
        problem.observed(1, 1) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(solve_me(problem), std::invalid_argument);
    }
    SUBCASE("negative slack") {
        problem.mode = MEMode::kInnerProduct;
        problem.slack = -1.0;
        CHECK_THROWS_AS(solve_me(problem), std::invalid_argument);
    }
}
