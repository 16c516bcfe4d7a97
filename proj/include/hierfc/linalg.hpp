#pragma once

#include <Eigen/Dense>

#include "hierfc/error.hpp"

namespace hierfc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * Cholesky factorization of a symmetric positive-definite matrix with a
 * diagonal jitter escalation.
 *
 * A plain factorization is tried first. On failure, 1e-10 * trace/n is added
 * to the diagonal and multiplied by 10 per retry up to 1e-6 * trace/n, after
 * which SingularW is raised. Explicit inverses are never formed.
 */
class SpdFactor {
public:
    static constexpr double kJitterStart = 1e-10;
    static constexpr double kJitterMax = 1e-6;
    static constexpr double kIllConditioned = 1e12;

    /// `what` names the matrix in error and warning messages.
    explicit SpdFactor(const Matrix& a, std::string_view what = "W", Diagnostics* diag = nullptr);

    Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }
    Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

    Eigen::Index size() const { return llt_.matrixLLT().rows(); }

    /// Diagonal jitter that was added (0 when the plain factorization succeeded).
    double jitter() const { return jitter_; }

    /// Cheap condition estimate from the Cholesky diagonal: (max L_ii / min L_ii)^2.
    double condition_estimate() const { return condition_; }

    const Eigen::LLT<Matrix>& llt() const { return llt_; }

private:
    Eigen::LLT<Matrix> llt_;
    double jitter_ = 0.0;
    double condition_ = 1.0;
};

/// Largest absolute entry of a - b.
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace hierfc
