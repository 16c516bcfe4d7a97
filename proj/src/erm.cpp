#include <cmath>
#include <sstream>

#include "hierfc/reconcile_point.hpp"

namespace hierfc {

namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) {
        return z - gamma;
    }
    if (z < -gamma) {
        return z + gamma;
    }
    return 0.0;
}

}  // namespace

ReconciliationMap erm(const HierarchyStructure& structure, const Matrix& base_history, const Matrix& actual_history,
                      Method variant, double lambda, Diagnostics* diag, ErmOptions options) {
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    if (variant != Method::ErmCf && variant != Method::ErmLasso) {
        throw Error(ErrorCode::BadSpec, "erm variant must be erm_cf or erm_lasso");
    }
    if (variant == Method::ErmLasso && !(lambda > 0.0 && std::isfinite(lambda))) {
        throw Error(ErrorCode::BadLambda, "erm lasso needs lambda > 0");
    }
    if (base_history.rows() != n || actual_history.rows() != n ||
        base_history.cols() != actual_history.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "erm histories must both be n x T'");
    }

    std::vector<Index> cols;
    for (Index t = 0; t < base_history.cols(); ++t) {
        if (base_history.col(t).allFinite() && actual_history.col(t).allFinite()) {
            cols.push_back(t);
        }
    }
    if (cols.size() < 2) {
        throw Error(ErrorCode::InsufficientHistory,
                    "erm needs at least 2 periods with base and actual values, got " + std::to_string(cols.size()));
    }
    Matrix yhat(n, static_cast<Index>(cols.size()));
    Matrix y(n, static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        yhat.col(static_cast<Index>(k)) = base_history.col(cols[k]);
        y.col(static_cast<Index>(k)) = actual_history.col(cols[k]);
    }

    const Matrix& s = structure.s();
    const Matrix gram_s = s.transpose() * s;               // n_b x n_b
    const Matrix cross = s.transpose() * y * yhat.transpose();  // n_b x n
    const Matrix gram_f = yhat * yhat.transpose();          // n x n

    ReconciliationMap map;
    map.method = variant;

    if (variant == Method::ErmCf) {
        const double ridge = 1e-8 * gram_f.trace() / static_cast<double>(n);
        Matrix reg = gram_f;
        reg.diagonal().array() += ridge;
        const SpdFactor s_factor(gram_s, "S'S", diag);
        const SpdFactor f_factor(reg, "Yhat Yhat'", diag);
        const Matrix left = s_factor.solve(cross);                 // (S'S)^-1 S' Y Yhat'
        map.p = f_factor.solve(Matrix(left.transpose())).transpose();  // right-multiply by reg^-1
        return map;
    }

    // Coordinate descent on P with the penalty centred at the bottom-up P.
    Matrix p_bu = Matrix::Zero(nb, n);
    p_bu.rightCols(nb).setIdentity();
    Matrix p = p_bu;
    Matrix u = p * gram_f;  // P * Yhat Yhat', kept in sync with P
    bool converged = false;
    int sweep = 0;
    for (; sweep < options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double hjj = gram_f(j, j);
            if (hjj <= 0.0) {
                continue;
            }
            for (Index k = 0; k < nb; ++k) {
                const double curvature = gram_s(k, k) * hjj;
                if (curvature <= 0.0) {
                    continue;
                }
                const double grad = 2.0 * (gram_s.row(k).dot(u.col(j)) - cross(k, j));
                const double offset = p(k, j) - p_bu(k, j);
                const double target = soft_threshold(offset - grad / (2.0 * curvature), lambda / (2.0 * curvature));
                const double delta = target - offset;
                if (delta != 0.0) {
                    p(k, j) += delta;
                    u.row(k) += delta * gram_f.row(j);
                    max_change = std::max(max_change, std::abs(delta));
                }
            }
        }
        if (max_change < options.tolerance) {
            converged = true;
            break;
        }
    }
    map.p = std::move(p);
    map.converged = converged;
    if (!converged) {
        std::ostringstream msg;
        msg << "lasso stopped after " << options.max_sweeps << " sweeps without reaching tolerance "
            << options.tolerance;
        warn(diag, "erm_lasso", msg.str());
    }
    return map;
}

}  // namespace hierfc
