#include <algorithm>
#include <cmath>

#include "hierfc/reconcile_point.hpp"

namespace hierfc {

namespace {

/// 0/1 availability mask and residuals with unavailable cells zeroed.
std::pair<Matrix, Matrix> masked(const Matrix& residuals, const BoolMatrix* available) {
    Matrix mask(residuals.rows(), residuals.cols());
    Matrix values(residuals.rows(), residuals.cols());
    for (Index i = 0; i < residuals.rows(); ++i) {
        for (Index t = 0; t < residuals.cols(); ++t) {
            const double r = residuals(i, t);
            const bool ok = available != nullptr ? (*available)(i, t) : !std::isnan(r);
            if (ok && !std::isfinite(r)) {
                throw Error(ErrorCode::NonFiniteResiduals,
                            "residual of series " + std::to_string(i) + " at column " + std::to_string(t) + " is not finite");
            }
            mask(i, t) = ok ? 1.0 : 0.0;
            values(i, t) = ok ? r : 0.0;
        }
    }
    return {std::move(mask), std::move(values)};
}

}  // namespace

CovarianceEstimate estimate_w(CovarianceVariant variant, const HierarchyStructure& structure,
                              const Matrix& residuals, const BoolMatrix* available) {
    const Index n = structure.n();
    if (variant == CovarianceVariant::Ols) {
        return {Matrix::Identity(n, n), std::nullopt};
    }
    if (variant == CovarianceVariant::WlsStruct) {
        return {structure.row_sums().asDiagonal(), std::nullopt};
    }

    if (residuals.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "residuals have " + std::to_string(residuals.rows()) +
                                                  " rows, hierarchy has " + std::to_string(n));
    }
    if (available != nullptr && (available->rows() != residuals.rows() || available->cols() != residuals.cols())) {
        throw Error(ErrorCode::ShapeMismatch, "availability mask does not match residuals");
    }
    const auto [mask, values] = masked(residuals, available);
    const Matrix counts = mask * mask.transpose();
    if (counts.diagonal().minCoeff() < 2.0) {
        throw Error(ErrorCode::InsufficientResiduals, "every series needs at least 2 available residuals");
    }

    if (variant == CovarianceVariant::WlsVar) {
        const Vector ms = values.array().square().rowwise().sum().matrix().cwiseQuotient(counts.diagonal());
        return {ms.asDiagonal(), std::nullopt};
    }

    if (counts.minCoeff() < 2.0) {
        throw Error(ErrorCode::InsufficientResiduals, "some series pairs share fewer than 2 residual columns");
    }
    const Matrix sample = (values * values.transpose()).cwiseQuotient(counts);
    if (variant == CovarianceVariant::Full) {
        return {sample, std::nullopt};
    }

    // Shrink toward the diagonal.
    const Vector sd = sample.diagonal().cwiseSqrt();
    Vector inv_sd(n);
    for (Index i = 0; i < n; ++i) {
        inv_sd(i) = sd(i) > 0.0 ? 1.0 / sd(i) : 0.0;
    }
    const Matrix x = inv_sd.asDiagonal() * values;
    const Matrix x2 = x.array().square().matrix();
    const Matrix mean_w = (x * x.transpose()).cwiseQuotient(counts);
    const Matrix sum_w2 = x2 * x2.transpose();

    double numerator = 0.0;
    double denominator = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            const double c = counts(i, j);
            const double w_bar = mean_w(i, j);
            const double ss = std::max(0.0, sum_w2(i, j) - c * w_bar * w_bar);
            numerator += ss / (c * (c - 1.0));
            denominator += w_bar * w_bar;
        }
    }
    double lambda = denominator > 0.0 ? numerator / denominator : 1.0;
    if (!std::isfinite(lambda)) {
        lambda = 1.0;
    }
    lambda = std::clamp(lambda, 0.0, 1.0);

    Matrix w = (1.0 - lambda) * sample;
    w.diagonal() = sample.diagonal();
    return {std::move(w), lambda};
}

}  // namespace hierfc
