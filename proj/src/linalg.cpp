#include "hierfc/linalg.hpp"

#include <cmath>
#include <sstream>

namespace hierfc {

namespace {

bool factor_ok(const Eigen::LLT<Matrix>& llt) {
    if (llt.info() != Eigen::Success) {
        return false;
    }
    const auto diag = llt.matrixLLT().diagonal();
    return diag.allFinite() && (diag.array() > 0.0).all();
}

}  // namespace

SpdFactor::SpdFactor(const Matrix& a, std::string_view what, Diagnostics* diag) {
    if (a.rows() != a.cols()) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + " is not square");
    }
    if (!a.allFinite()) {
        throw Error(ErrorCode::SingularW, std::string(what) + " has non-finite entries");
    }
    const auto n = a.rows();
    if (n == 0) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + " is empty");
    }
    // Only the lower triangle is read by LLT; symmetrize so both halves agree.
    Matrix sym = 0.5 * (a + a.transpose());
    llt_.compute(sym);
    if (!factor_ok(llt_)) {
        const double scale = sym.trace() / static_cast<double>(n);
        bool done = false;
        if (scale > 0.0 && std::isfinite(scale)) {
            for (double rel = kJitterStart; rel <= kJitterMax * (1.0 + 1e-9); rel *= 10.0) {
                Matrix shifted = sym;
                shifted.diagonal().array() += rel * scale;
                llt_.compute(shifted);
                if (factor_ok(llt_)) {
                    jitter_ = rel * scale;
                    done = true;
                    break;
                }
            }
        }
        if (!done) {
            throw Error(ErrorCode::SingularW,
                        std::string(what) + " is not positive definite after diagonal jitter");
        }
        std::ostringstream msg;
        msg << "added diagonal jitter " << jitter_ << " to " << what;
        warn(diag, "spd", msg.str());
    }
    const auto d = llt_.matrixLLT().diagonal();
    const double ratio = d.maxCoeff() / d.minCoeff();
    condition_ = ratio * ratio;
    if (condition_ > kIllConditioned) {
        std::ostringstream msg;
        msg << what << " is ill-conditioned (condition estimate " << condition_ << ")";
        warn(diag, "spd", msg.str());
    }
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "max_abs_diff operands differ in shape");
    }
    if (a.size() == 0) {
        return 0.0;
    }
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace hierfc
