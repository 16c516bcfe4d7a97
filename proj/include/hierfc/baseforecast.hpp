#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hierfc/panel.hpp"

namespace hierfc {

enum class ModelKind { Naive, SeasonalNaive, Ses };

/// Base model selector: `naive`, `snaive`, `snaive:<m>` or `ses:<alpha>`.
struct ModelSpec {
    ModelKind kind = ModelKind::Naive;
    double alpha = 0.3;  // ses only
    int season = 0;      // snaive only; 0 means the panel frequency

    static ModelSpec parse(std::string_view text);
    std::string name() const;
};

/**
 * Unreconciled forecasts plus one-step in-sample fit.
 *
 * `fitted` and `residuals` are n x T and column-aligned with the panel.
 * Cells without a fitted value (the first lag columns of each series) are
 * NaN and flagged false in `available`.
 */
struct BaseForecast {
    ForecastFrame forecast;
    Matrix fitted;
    Matrix residuals;
    BoolMatrix available;
    std::string model_name;

    /// Columns where every series has a residual, in time order.
    std::vector<Index> complete_columns() const;
    /// residuals restricted to complete_columns().
    Matrix complete_residuals() const;
};

BaseForecast forecast_naive(const SeriesPanel& panel, Index h, std::size_t threads = 1);
BaseForecast forecast_seasonal_naive(const SeriesPanel& panel, Index h, int m, std::size_t threads = 1);
BaseForecast forecast_ses(const SeriesPanel& panel, Index h, double alpha, std::size_t threads = 1);

/// Fits `models[i]` to series i. Series are independent; output does not
/// depend on the thread count.
BaseForecast forecast_models(const SeriesPanel& panel, Index h, const std::vector<ModelSpec>& models,
                             std::size_t threads = 1);

BaseForecast forecast(const SeriesPanel& panel, Index h, const ModelSpec& model, std::size_t threads = 1);

}  // namespace hierfc
