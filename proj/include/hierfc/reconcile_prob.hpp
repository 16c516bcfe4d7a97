#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "hierfc/reconcile_point.hpp"

namespace hierfc {

enum class IntervalMethod { Normality, Bootstrap, Permbu };

std::string_view to_string(IntervalMethod method) noexcept;
IntervalMethod parse_interval_method(std::string_view text);

/// Coherent predictive distribution for every series and horizon step.
struct ProbabilisticForecast {
    Matrix mean;                  // n x h reconciled point forecast
    std::vector<Matrix> samples;  // B sample paths, each n x h; empty for normality
    std::map<double, Band> bands;
    IntervalMethod method = IntervalMethod::Bootstrap;
    Method point_method = Method::BottomUp;
    std::uint64_t seed = 0;
};

/// Empirical quantile with linear interpolation at position 1 + (B - 1) p.
/// `sorted` must be ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Per cell: lo-L at (1 - L/100)/2 and hi-L at (1 + L/100)/2 of the samples.
/// Levels must lie in [0, 100).
std::map<double, Band> quantile_bands(const std::vector<Matrix>& samples, const std::vector<double>& levels);

/// Standard normal quantile.
double normal_quantile(double p);

/**
 * Gaussian bands around the reconciled mean with covariance
 * V = S P W P' S', the same for every horizon step. `base_covariance` is the
 * n x n base forecast error covariance W. TopDown-family maps are rejected
 * with NoExplicitP unless `allow_experimental` is set.
 */
ProbabilisticForecast normality_bands(const ReconciliationMap& map, const HierarchyStructure& structure,
                                      const Matrix& base_covariance, const Matrix& base_point,
                                      const std::vector<double>& levels, bool allow_experimental = false);

/// W for normality_bands: per-series residual RMS on the diagonal, with the
/// correlation pattern of the map's W (identity when the map has none).
Matrix normality_covariance(const ReconciliationMap& map, const Matrix& complete_residuals);

struct SamplingOptions {
    Index samples = 1000;
    std::uint64_t seed = 0;
    Index block_len = 1;  // bootstrap only
    std::size_t threads = 1;
    bool allow_experimental = false;  // bootstrap over TopDown-family maps
};

/**
 * Residual bootstrap. Each sample path draws whole residual columns (one
 * per horizon step, or contiguous blocks of `block_len`), adds them to the
 * base forecasts and reconciles with `map`. `residuals` holds only fully
 * available columns (n x K, K >= 1).
 */
ProbabilisticForecast bootstrap_samples(const ReconciliationMap& map, const HierarchyStructure& structure,
                                        const Matrix& base_point, const Matrix& residuals,
                                        const std::vector<double>& levels, const SamplingOptions& options);

enum class MarginalKind { Gaussian, Empirical };

MarginalKind parse_marginal(std::string_view text);

/**
 * Bottom-up sampling with an empirical copula. Bottom marginals are centred
 * at the map's reconciled bottom forecasts. At every parent, each child's
 * sample vector (with its whole subtree) is reordered so that its ranks match
 * the ranks of that child's in-sample residuals over B resampled residual
 * columns; the parent is the sum of the reordered children. Strict trees only.
 */
ProbabilisticForecast permbu_samples(const ReconciliationMap& map, const HierarchyStructure& structure,
                                     const Matrix& base_point, const Matrix& residuals,
                                     const std::vector<double>& levels, const SamplingOptions& options,
                                     MarginalKind marginal = MarginalKind::Gaussian);

/// Ranks in [0, B) with ties broken by position.
std::vector<Index> stable_ranks(const Eigen::Ref<const Vector>& values);

}  // namespace hierfc
