#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hierfc/hierarchy.hpp"
#include "hierfc/panel.hpp"

namespace hierfc {

/// Per-series mean squared error over the horizon.
Vector mse(const Matrix& actual, const Matrix& forecast);

/// Per-series mean absolute error scaled by the mean absolute m-step
/// in-sample naive error. Throws ZeroScale when that scale is 0.
Vector mase(const Matrix& actual, const Matrix& forecast, const Matrix& insample, int m);

/// Quantile forecasts at ascending probabilities; values[k] is n x h.
struct QuantileForecast {
    std::vector<double> probs;
    std::vector<Matrix> values;
};

/// {0.01, 0.02, ..., 0.99}
std::vector<double> default_quantile_grid();

QuantileForecast quantiles_from_samples(const std::vector<Matrix>& samples, const std::vector<double>& probs);

/// Uses each band's two tail probabilities plus the mean as the median.
QuantileForecast quantiles_from_bands(const Matrix& mean, const std::map<double, Band>& bands);

/**
 * Scaled CRPS per series. Each cell's CRPS is approximated by
 * (2/|Q|) sum_q pinball_q, and a series' score is the sum of its cell CRPS
 * over the sum of |actual|. Throws ZeroScale if a series' actuals are all 0.
 */
Vector scrps(const Matrix& actual, const QuantileForecast& quantiles);

/**
 * Energy score averaged over the horizon:
 * mean_b |x_b - y|^beta - 1/2 mean_i |x_{2i} - x_{2i+1}|^beta
 * with disjoint consecutive pairs. samples[b] is n x h; needs B >= 2.
 */
double energy_score(const Matrix& actual, const std::vector<Matrix>& samples, double beta = 1.0);

struct ReportRow {
    std::string level;
    std::string method;
    std::string metric;
    double value = 0.0;
    std::optional<double> ci;  // 95% half-width over replicate runs
};

inline constexpr const char* kOverallLevel = "Overall";

struct EvaluationReport {
    std::vector<ReportRow> rows;
    std::map<std::string, std::string> metadata;

    /// `level,method,metric,value[,ci95]`; metadata as leading `#` lines.
    void write_csv(std::ostream& out) const;
    /// Aligned table: one row per level, one column per (method, metric).
    void write_table(std::ostream& out) const;
};

/// Averages per-series scores within each tag level, plus an Overall row
/// with the mean over all series. Throws UnknownTag if a tag names a series
/// not in `series_ids`.
std::vector<ReportRow> evaluate_by_level(const Vector& per_series, const std::vector<std::string>& series_ids,
                                         const Tags& tags, const std::string& method, const std::string& metric);

/// Mean of each (level, method, metric) over replicates with a
/// 1.96 * sd / sqrt(k) half-width. Replicates must have identical rows.
EvaluationReport combine_replicates(const std::vector<EvaluationReport>& replicates);

}  // namespace hierfc
