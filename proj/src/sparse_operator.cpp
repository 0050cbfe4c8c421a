#include "subreg/sparse_operator.hpp"

#include <algorithm>
#include <cmath>

namespace subreg {

SparseOperator::SparseOperator(SparseMatrix matrix, bool symmetric)
    : matrix_(std::move(matrix)), symmetric_(symmetric) {
    require(matrix_.rows() == matrix_.cols(), "SparseOperator: matrix must be square");
    matrix_.makeCompressed();
}

double SparseOperator::asymmetry() const {
    const SparseMatrix diff = matrix_ - SparseMatrix(matrix_.transpose());
    double worst = 0.0;
    for (Index k = 0; k < diff.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    }
    return worst;
}

std::pair<double, double> SparseOperator::gershgorin() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Index r = 0; r < matrix_.outerSize(); ++r) {
        double center = 0.0;
        double radius = 0.0;
        for (SparseMatrix::InnerIterator it(matrix_, r); it; ++it) {
            if (it.col() == r) {
                center = it.value();
            } else {
                radius += std::abs(it.value());
            }
        }
        lo = std::min(lo, center - radius);
        hi = std::max(hi, center + radius);
    }
    return {lo, hi};
}

SparseOperator SparseOperator::scaled(double factor) const {
    return SparseOperator(SparseMatrix(factor * matrix_), symmetric_);
}

SparseOperator SparseOperator::shifted(const Vector& diagonal_shift) const {
    require(diagonal_shift.size() == dimension(), "SparseOperator::shifted: size mismatch");
    SparseMatrix m = matrix_;
    for (Index i = 0; i < dimension(); ++i) m.coeffRef(i, i) += diagonal_shift(i);
    return SparseOperator(std::move(m), symmetric_);
}

}  // namespace subreg
