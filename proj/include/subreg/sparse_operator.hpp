#pragma once

#include <Eigen/Sparse>

#include "subreg/numerics.hpp"

namespace subreg {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Stencil operator from a finite-difference discretization. Rows are stored
/// compressed (column-index/value pairs per row).
class SparseOperator {
public:
    SparseOperator() = default;
    SparseOperator(SparseMatrix matrix, bool symmetric);

    Index dimension() const { return matrix_.rows(); }
    bool symmetric() const { return symmetric_; }
    const SparseMatrix& matrix() const { return matrix_; }

    Vector apply(const Vector& x) const { return matrix_ * x; }
    Matrix apply(const Matrix& x) const { return matrix_ * x; }
    Vector diagonal() const { return matrix_.diagonal(); }

    /// Largest |a_ij - a_ji|.
    double asymmetry() const;
    /// Gershgorin interval [lower, upper] enclosing the spectrum.
    std::pair<double, double> gershgorin() const;
    Matrix dense() const { return Matrix(matrix_); }

    SparseOperator scaled(double factor) const;
    SparseOperator shifted(const Vector& diagonal_shift) const;

private:
    SparseMatrix matrix_;
    bool symmetric_ = false;
};

}  // namespace subreg
