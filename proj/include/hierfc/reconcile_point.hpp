#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hierfc/baseforecast.hpp"
#include "hierfc/hierarchy.hpp"

namespace hierfc {

enum class Method {
    BottomUp,
    TopDownF,
    TopDownA,
    TopDownP,
    MiddleOut,
    CombOls,
    CombWls,
    MinTraceOls,
    MinTraceWlsStruct,
    MinTraceWlsVar,
    MinTraceShrink,
    ErmCf,
    ErmLasso,
};

std::string_view to_string(Method method) noexcept;

/// TopDown variants and MiddleOut, which disaggregate from a single level.
bool is_top_down_family(Method method) noexcept;

/// Methods whose P satisfies P * S = I.
bool is_projection(Method method) noexcept;

/// Parsed method selector:
/// `bottom_up`, `top_down:f|a|p`, `middle_out:<level>`, `comb:ols|wls`,
/// `min_trace:ols|wls_struct|wls_var|shrink`, `erm:cf`, `erm:lasso:<lambda>`.
struct MethodSpec {
    Method method = Method::BottomUp;
    std::string middle_level;
    double lambda = 0.0;
    std::string selector;

    static MethodSpec parse(std::string_view text);
};

enum class CovarianceVariant { Ols, WlsStruct, WlsVar, Shrink, Full };

struct CovarianceEstimate {
    Matrix w;
    std::optional<double> shrink_lambda;
};

/**
 * Weight matrix W for MinTrace.
 *
 * `residuals` is n x T; cells flagged false in `available` (or NaN when no
 * mask is given) are skipped pairwise. Moments use the mean-zero convention
 * (divide by the count). Shrink targets the diagonal with the data-driven
 * intensity
 *   lambda = sum_{i!=j} Var(r_ij) / sum_{i!=j} r_ij^2
 * on standardized residuals, clamped to [0, 1]; Var(r_ij) is the sampling
 * variance of the mean cross-product.
 */
CovarianceEstimate estimate_w(CovarianceVariant variant, const HierarchyStructure& structure,
                              const Matrix& residuals, const BoolMatrix* available = nullptr);

/**
 * Linear map from base to reconciled forecasts, reconciled = S * P * base.
 *
 * Most methods store one n_b x n matrix P. TopDown with forecast proportions
 * and MiddleOut depend on the base forecasts themselves, so they store one P
 * per horizon step instead.
 */
struct ReconciliationMap {
    Method method = Method::BottomUp;
    std::optional<Matrix> p;
    std::vector<Matrix> horizon_p;
    std::optional<Matrix> w;
    std::optional<double> shrink_lambda;
    /// False when lasso hit its sweep cap; the last iterate is kept.
    bool converged = true;

    bool has_explicit_p() const noexcept { return p.has_value(); }
    /// P used for horizon step `step`.
    const Matrix& p_at(Index step) const;
};

ReconciliationMap bottom_up(const HierarchyStructure& structure);

enum class TopDownVariant {
    ForecastProportions,            // f
    AverageHistoricalProportions,   // a
    ProportionsOfHistoricalAverages  // p
};

/// `history` is n x T (used by a and p), `base_point` n x h (used by f).
ReconciliationMap top_down(const HierarchyStructure& structure, TopDownVariant variant, const Matrix& history,
                           const Matrix& base_point, Diagnostics* diag = nullptr);

/// Middle-level base forecasts are split down each subtree by forecast
/// proportions; everything above is summed from the resulting bottoms.
ReconciliationMap middle_out(const HierarchyStructure& structure, std::string_view middle_level,
                             const Matrix& base_point, Diagnostics* diag = nullptr);

/// P = (S' W^-1 S)^-1 S' W^-1 via Cholesky solves. `tag` labels the result.
ReconciliationMap mintrace(const HierarchyStructure& structure, const Matrix& w, Method tag = Method::MinTraceOls,
                           Diagnostics* diag = nullptr);

struct ErmOptions {
    double tolerance = 1e-8;
    int max_sweeps = 10'000;
};

/**
 * Learns P from in-sample (actual, base forecast) pairs, both n x T'.
 * Columns with any non-finite entry are dropped.
 *
 * ErmCf: P = (S'S)^-1 S' Y Yhat' (Yhat Yhat' + eps I)^-1, eps = 1e-8 tr(Yhat Yhat')/n.
 * ErmLasso: minimizes sum_t |y_t - S P yhat_t|^2 + lambda |P - P_bu|_1 by
 * cyclic coordinate descent.
 */
ReconciliationMap erm(const HierarchyStructure& structure, const Matrix& base_history, const Matrix& actual_history,
                      Method variant, double lambda = 0.0, Diagnostics* diag = nullptr, ErmOptions options = {});

/// n x h reconciled point forecasts.
Matrix reconcile_point(const ReconciliationMap& map, const HierarchyStructure& structure, const Matrix& base_point);

/// Reconciled frame carrying the base frame's labels; bands are not copied.
ForecastFrame reconcile(const ReconciliationMap& map, const HierarchyStructure& structure, const ForecastFrame& base);

/// Builds the map for a selector from the training panel and base forecasts.
ReconciliationMap build_map(const MethodSpec& spec, const HierarchyStructure& structure, const SeriesPanel& history,
                            const BaseForecast& base, Diagnostics* diag = nullptr);

}  // namespace hierfc
