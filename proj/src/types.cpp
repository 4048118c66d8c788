#include "lowrank/types.hpp"

#include <limits>

namespace lowrank {

MaskedMatrix MaskedMatrix::undefined(Eigen::Index rows, Eigen::Index cols) {
    MaskedMatrix m;
    m.values = Matrix::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
    m.defined = Mask::Constant(rows, cols, false);
    return m;
}

MaskedMatrix MaskedMatrix::full(Matrix v) {
    MaskedMatrix m;
    m.defined = Mask::Constant(v.rows(), v.cols(), true);
    m.values = std::move(v);
    return m;
}

Vector flatten_sa(const Matrix& m) {
    Vector v(m.rows() * m.cols());
    for (Eigen::Index s = 0; s < m.rows(); ++s)
        for (Eigen::Index a = 0; a < m.cols(); ++a) v(s * m.cols() + a) = m(s, a);
    return v;
}

Matrix unflatten_sa(const Vector& v, Eigen::Index num_states, Eigen::Index num_actions) {
    if (v.size() != num_states * num_actions)
        throw std::invalid_argument("unflatten_sa: size mismatch");
    Matrix m(num_states, num_actions);
    for (Eigen::Index s = 0; s < num_states; ++s)
        for (Eigen::Index a = 0; a < num_actions; ++a) m(s, a) = v(s * num_actions + a);
    return m;
}

Mask support_of(const Matrix& m, double threshold) {
    return m.array() > threshold;
}

}  // namespace lowrank
