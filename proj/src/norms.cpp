#include "lowrank/norms.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace lowrank {

double operator_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

double nuclear_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues().sum();
}

TopSingularPair top_singular_pair(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    TopSingularPair out;
    const auto& sv = svd.singularValues();
    out.sigma1 = sv.size() > 0 ? sv(0) : 0.0;
    out.sigma2 = sv.size() > 1 ? sv(1) : 0.0;
    if (sv.size() > 0) {
        out.u1 = svd.matrixU().col(0);
        out.v1 = svd.matrixV().col(0);
    }
    if (sv.size() > 1) {
        out.u2 = svd.matrixU().col(1);
        out.v2 = svd.matrixV().col(1);
    }
    return out;
}

int numerical_rank(const Matrix& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * sv(0)) ++rank;
    return rank;
}

namespace {

double max_row_norm(const Matrix& m) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) best = std::max(best, m.row(i).norm());
    return best;
}

// Product of max row norms after scaling factor column j by exp(logd[j]) in U
// and exp(-logd[j]) in V.
double scaled_product(const Matrix& u, const Matrix& v, const Vector& logd) {
    Matrix us = u, vs = v;
    for (Eigen::Index j = 0; j < logd.size(); ++j) {
        const double s = std::exp(logd(j));
        us.col(j) *= s;
        vs.col(j) /= s;
    }
    return max_row_norm(us) * max_row_norm(vs);
}

}  // namespace

MaxNormBound max_norm_bound(const Matrix& m, int rank_hint) {
    MaxNormBound out;
    if (m.size() == 0) return out;
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double sigma1 = sv(0);
    const double nuclear = sv.sum();
    const double nm = static_cast<double>(m.rows()) * static_cast<double>(m.cols());
    out.lower = nuclear / std::sqrt(nm);
    if (sigma1 <= 0.0) return out;  // zero matrix: (0, 0)

    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-8 * sigma1) ++rank;
    if (rank_hint > 0) rank = std::min(rank, rank_hint);
    const double inf_norm = m.cwiseAbs().maxCoeff();
    double upper = std::min(std::sqrt(static_cast<double>(rank)) * inf_norm, nuclear);

    // Balanced SVD factors, then a short coordinate search over per-column
    // diagonal rescalings of the factorization.
    Matrix u(m.rows(), rank), v(m.cols(), rank);
    for (int j = 0; j < rank; ++j) {
        const double root = std::sqrt(sv(j));
        u.col(j) = svd.matrixU().col(j) * root;
        v.col(j) = svd.matrixV().col(j) * root;
    }
    Vector logd = Vector::Zero(rank);
    double best = scaled_product(u, v, logd);
    for (int sweep = 0; sweep < 3; ++sweep) {
        for (int j = 0; j < rank; ++j) {
            double lo = -1.5, hi = 1.5;
            for (int it = 0; it < 24; ++it) {
                const double m1 = lo + (hi - lo) / 3.0;
                const double m2 = hi - (hi - lo) / 3.0;
                Vector d1 = logd, d2 = logd;
                d1(j) += m1;
                d2(j) += m2;
                if (scaled_product(u, v, d1) < scaled_product(u, v, d2))
                    hi = m2;
                else
                    lo = m1;
            }
            logd(j) += 0.5 * (lo + hi);
            best = std::min(best, scaled_product(u, v, logd));
        }
    }
    out.upper = std::min(upper, best);
    return out;
}

}  // namespace lowrank
