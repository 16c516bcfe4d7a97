#include "hierfc/baseforecast.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "hierfc/csv.hpp"
#include "hierfc/parallel.hpp"

namespace hierfc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SeriesFit {
    Vector forecast;
    Vector fitted;
};

SeriesFit fit_naive(const Vector& y, Index h) {
    const Index t = y.size();
    if (t < 2) {
        throw Error(ErrorCode::TooShort, "naive needs at least 2 observations");
    }
    SeriesFit fit{Vector::Constant(h, y(t - 1)), Vector::Constant(t, kNaN)};
    for (Index k = 1; k < t; ++k) {
        fit.fitted(k) = y(k - 1);
    }
    return fit;
}

SeriesFit fit_seasonal_naive(const Vector& y, Index h, int m) {
    const Index t = y.size();
    if (m < 1) {
        throw Error(ErrorCode::BadSpec, "season length must be positive");
    }
    if (t < m || t < 1) {
        throw Error(ErrorCode::TooShort, "seasonal naive needs at least m=" + std::to_string(m) + " observations");
    }
    SeriesFit fit{Vector(h), Vector::Constant(t, kNaN)};
    for (Index k = 0; k < h; ++k) {
        fit.forecast(k) = y(t - m + (k % m));
    }
    for (Index k = m; k < t; ++k) {
        fit.fitted(k) = y(k - m);
    }
    return fit;
}

SeriesFit fit_ses(const Vector& y, Index h, double alpha) {
    const Index t = y.size();
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::BadAlpha, "ses alpha must lie in (0, 1]");
    }
    if (t < 2) {
        throw Error(ErrorCode::TooShort, "ses needs at least 2 observations");
    }
    SeriesFit fit{Vector(h), Vector::Constant(t, kNaN)};
    double level = y(0);
    for (Index k = 0; k < t; ++k) {
        if (k > 0) {
            fit.fitted(k) = level;
        }
        level = alpha * y(k) + (1.0 - alpha) * level;
    }
    fit.forecast.setConstant(level);
    return fit;
}

}  // namespace

ModelSpec ModelSpec::parse(std::string_view text) {
    ModelSpec spec;
    const auto colon = text.find(':');
    const auto head = text.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    if (head == "naive" && arg.empty()) {
        spec.kind = ModelKind::Naive;
    } else if (head == "snaive") {
        spec.kind = ModelKind::SeasonalNaive;
        if (!arg.empty()) {
            const double m = csv::parse_double(arg, "snaive season length");
            if (m < 1 || m != std::floor(m)) {
                throw Error(ErrorCode::BadSpec, "snaive season length must be a positive integer");
            }
            spec.season = static_cast<int>(m);
        }
    } else if (head == "ses") {
        spec.kind = ModelKind::Ses;
        if (!arg.empty()) {
            spec.alpha = csv::parse_double(arg, "ses alpha");
        }
        if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) {
            throw Error(ErrorCode::BadAlpha, "ses alpha must lie in (0, 1]");
        }
    } else {
        throw Error(ErrorCode::BadSpec, "unknown model '" + std::string(text) + "' (expected naive, snaive, ses:<alpha>)");
    }
    return spec;
}

std::string ModelSpec::name() const {
    switch (kind) {
        case ModelKind::Naive: return "naive";
        case ModelKind::SeasonalNaive: return season > 0 ? "snaive:" + std::to_string(season) : "snaive";
        case ModelKind::Ses: return "ses:" + csv::format_double(alpha);
    }
    return "unknown";
}

std::vector<Index> BaseForecast::complete_columns() const {
    std::vector<Index> cols;
    for (Index t = 0; t < available.cols(); ++t) {
        if (available.col(t).all()) {
            cols.push_back(t);
        }
    }
    return cols;
}

Matrix BaseForecast::complete_residuals() const {
    const auto cols = complete_columns();
    Matrix out(residuals.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        out.col(static_cast<Index>(k)) = residuals.col(cols[k]);
    }
    return out;
}

BaseForecast forecast_models(const SeriesPanel& panel, Index h, const std::vector<ModelSpec>& models,
                             std::size_t threads) {
    if (h < 1) {
        throw Error(ErrorCode::BadSpec, "horizon must be positive");
    }
    if (static_cast<Index>(models.size()) != panel.n()) {
        throw Error(ErrorCode::ShapeMismatch, "one model per series is required");
    }
    const Index n = panel.n();
    const Index t = panel.periods();
    BaseForecast out;
    out.forecast.point.resize(n, h);
    out.forecast.series_ids = panel.series_ids;
    out.forecast.horizon_labels = future_labels(panel.timestamps, h);
    out.fitted.resize(n, t);
    out.residuals.resize(n, t);
    out.available.resize(n, t);

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
        const auto i = static_cast<Index>(idx);
        const Vector y = panel.values.row(i).transpose();
        const auto& model = models[idx];
        SeriesFit fit;
        switch (model.kind) {
            case ModelKind::Naive: fit = fit_naive(y, h); break;
            case ModelKind::SeasonalNaive:
                fit = fit_seasonal_naive(y, h, model.season > 0 ? model.season : panel.frequency);
                break;
            case ModelKind::Ses: fit = fit_ses(y, h, model.alpha); break;
        }
        out.forecast.point.row(i) = fit.forecast.transpose();
        out.fitted.row(i) = fit.fitted.transpose();
        for (Index k = 0; k < t; ++k) {
            const bool ok = !std::isnan(fit.fitted(k));
            out.available(i, k) = ok;
            out.residuals(i, k) = ok ? y(k) - fit.fitted(k) : kNaN;
        }
    });

    std::set<std::string> names;
    for (const auto& m : models) {
        names.insert(m.name());
    }
    for (const auto& name : names) {
        out.model_name += (out.model_name.empty() ? "" : "+") + name;
    }
    return out;
}

BaseForecast forecast(const SeriesPanel& panel, Index h, const ModelSpec& model, std::size_t threads) {
    return forecast_models(panel, h, std::vector<ModelSpec>(static_cast<std::size_t>(panel.n()), model), threads);
}

BaseForecast forecast_naive(const SeriesPanel& panel, Index h, std::size_t threads) {
    return forecast(panel, h, ModelSpec{ModelKind::Naive, 0.3, 0}, threads);
}

BaseForecast forecast_seasonal_naive(const SeriesPanel& panel, Index h, int m, std::size_t threads) {
    if (m < 1) {
        throw Error(ErrorCode::BadSpec, "season length must be positive");
    }
    return forecast(panel, h, ModelSpec{ModelKind::SeasonalNaive, 0.3, m}, threads);
}

BaseForecast forecast_ses(const SeriesPanel& panel, Index h, double alpha, std::size_t threads) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::BadAlpha, "ses alpha must lie in (0, 1]");
    }
    return forecast(panel, h, ModelSpec{ModelKind::Ses, alpha, 0}, threads);
}

}  // namespace hierfc
