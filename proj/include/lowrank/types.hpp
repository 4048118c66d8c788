#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lowrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Raised when an evaluation touches a state-action pair outside the
/// defined region of a partial matrix or kernel.
class OffSupportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// S x A matrix whose entries are only meaningful where `defined` is true.
/// Undefined entries hold NaN so that accidental reads surface immediately.
struct MaskedMatrix {
    Matrix values;
    Mask defined;

    MaskedMatrix() = default;
    MaskedMatrix(Matrix v, Mask m) : values(std::move(v)), defined(std::move(m)) {
        if (values.rows() != defined.rows() || values.cols() != defined.cols())
            throw std::invalid_argument("MaskedMatrix: shape mismatch between values and mask");
    }

    static MaskedMatrix undefined(Eigen::Index rows, Eigen::Index cols);
    static MaskedMatrix full(Matrix v);

    double at(Eigen::Index i, Eigen::Index j) const {
        if (!defined(i, j)) throw OffSupportError("MaskedMatrix: entry is undefined");
        return values(i, j);
    }
    bool is_defined(Eigen::Index i, Eigen::Index j) const { return defined(i, j); }
    Eigen::Index defined_count() const { return defined.count(); }
};

/// Read-only view of one time step of a transition kernel.
/// `probs` has one row per state-action pair (row index s*A + a) holding the
/// distribution over next states. `row_defined == nullptr` means every row is
/// defined (exact kernel); otherwise only flagged rows may be read.
struct KernelSlice {
    const Matrix* probs = nullptr;
    const std::vector<std::uint8_t>* row_defined = nullptr;

    bool is_defined(Eigen::Index sa) const {
        return row_defined == nullptr || (*row_defined)[static_cast<std::size_t>(sa)] != 0;
    }
};

/// Row index of (s, a) inside a flattened S x A layout.
inline Eigen::Index sa_index(Eigen::Index s, Eigen::Index a, Eigen::Index num_actions) {
    return s * num_actions + a;
}

/// Flatten an S x A matrix into a length-S*A vector in (s, a) row-major order.
Vector flatten_sa(const Matrix& m);

/// Inverse of flatten_sa.
Matrix unflatten_sa(const Vector& v, Eigen::Index num_states, Eigen::Index num_actions);

/// Entries strictly above `threshold` (floating-point zero guard).
Mask support_of(const Matrix& m, double threshold = 1e-12);

}  // namespace lowrank
