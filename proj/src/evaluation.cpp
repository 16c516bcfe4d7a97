#include "hierfc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "hierfc/csv.hpp"
#include "hierfc/reconcile_prob.hpp"

namespace hierfc {

namespace {

void same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": actual and forecast shapes differ");
    }
}

}  // namespace

Vector mse(const Matrix& actual, const Matrix& forecast) {
    same_shape(actual, forecast, "mse");
    if (actual.cols() == 0) {
        throw Error(ErrorCode::ShapeMismatch, "mse: empty horizon");
    }
    return (actual - forecast).array().square().rowwise().mean();
}

Vector mase(const Matrix& actual, const Matrix& forecast, const Matrix& insample, int m) {
    same_shape(actual, forecast, "mase");
    if (insample.rows() != actual.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "mase: in-sample rows differ from actual rows");
    }
    if (m < 1 || insample.cols() <= m) {
        throw Error(ErrorCode::TooShort, "mase needs more than m in-sample periods");
    }
    const Index t = insample.cols();
    const Vector scale =
        (insample.rightCols(t - m) - insample.leftCols(t - m)).cwiseAbs().rowwise().mean();
    const Vector mae = (actual - forecast).cwiseAbs().rowwise().mean();
    for (Index i = 0; i < scale.size(); ++i) {
        if (scale(i) == 0.0) {
            throw Error(ErrorCode::ZeroScale, "mase: in-sample naive error of series " + std::to_string(i) + " is zero");
        }
    }
    return mae.cwiseQuotient(scale);
}

std::vector<double> default_quantile_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 99; ++k) {
        grid.push_back(k / 100.0);
    }
    return grid;
}

QuantileForecast quantiles_from_samples(const std::vector<Matrix>& samples, const std::vector<double>& probs) {
    if (samples.empty()) {
        throw Error(ErrorCode::NoDistribution, "no samples");
    }
    if (probs.empty()) {
        throw Error(ErrorCode::EmptyLevels, "empty quantile grid");
    }
    const Index n = samples.front().rows();
    const Index h = samples.front().cols();
    QuantileForecast out{probs, std::vector<Matrix>(probs.size(), Matrix(n, h))};
    std::sort(out.probs.begin(), out.probs.end());
    std::vector<double> cell(samples.size());
    for (Index i = 0; i < n; ++i) {
        for (Index t = 0; t < h; ++t) {
            for (std::size_t b = 0; b < samples.size(); ++b) {
                cell[b] = samples[b](i, t);
            }
            std::sort(cell.begin(), cell.end());
            for (std::size_t q = 0; q < out.probs.size(); ++q) {
                out.values[q](i, t) = quantile_sorted(cell, out.probs[q]);
            }
        }
    }
    return out;
}

QuantileForecast quantiles_from_bands(const Matrix& mean, const std::map<double, Band>& bands) {
    if (bands.empty()) {
        throw Error(ErrorCode::NoDistribution, "forecast carries no prediction bands");
    }
    std::map<double, Matrix> by_prob;
    by_prob.emplace(0.5, mean);
    for (const auto& [level, band] : bands) {
        if (level == 0.0) {
            continue;
        }
        by_prob.insert_or_assign((1.0 - level / 100.0) / 2.0, band.lo);
        by_prob.insert_or_assign((1.0 + level / 100.0) / 2.0, band.hi);
    }
    QuantileForecast out;
    for (auto& [p, values] : by_prob) {
        out.probs.push_back(p);
        out.values.push_back(std::move(values));
    }
    return out;
}

Vector scrps(const Matrix& actual, const QuantileForecast& quantiles) {
    if (quantiles.probs.empty() || quantiles.values.size() != quantiles.probs.size()) {
        throw Error(ErrorCode::NoDistribution, "no quantile forecasts");
    }
    for (const auto& v : quantiles.values) {
        same_shape(actual, v, "scrps");
    }
    const Index n = actual.rows();
    const double weight = 2.0 / static_cast<double>(quantiles.probs.size());
    Vector out(n);
    for (Index i = 0; i < n; ++i) {
        double crps = 0.0;
        for (std::size_t q = 0; q < quantiles.probs.size(); ++q) {
            const double p = quantiles.probs[q];
            for (Index t = 0; t < actual.cols(); ++t) {
                const double y = actual(i, t);
                const double yq = quantiles.values[q](i, t);
                crps += (p - (y < yq ? 1.0 : 0.0)) * (y - yq);
            }
        }
        const double scale = actual.row(i).cwiseAbs().sum();
        if (scale == 0.0) {
            throw Error(ErrorCode::ZeroScale, "scrps: actuals of series " + std::to_string(i) + " are all zero");
        }
        out(i) = weight * crps / scale;
    }
    return out;
}

double energy_score(const Matrix& actual, const std::vector<Matrix>& samples, double beta) {
    if (samples.size() < 2) {
        throw Error(ErrorCode::TooFewSamples, "energy score needs at least 2 samples");
    }
    if (!(beta > 0.0 && beta <= 2.0)) {
        throw Error(ErrorCode::BadSpec, "energy score beta must lie in (0, 2]");
    }
    for (const auto& s : samples) {
        same_shape(actual, s, "energy_score");
    }
    const Index h = actual.cols();
    if (h == 0) {
        throw Error(ErrorCode::ShapeMismatch, "energy_score: empty horizon");
    }
    const std::size_t count = samples.size();
    const std::size_t pairs = count / 2;
    double total = 0.0;
    for (Index t = 0; t < h; ++t) {
        double to_truth = 0.0;
        for (const auto& s : samples) {
            to_truth += std::pow((s.col(t) - actual.col(t)).norm(), beta);
        }
        double between = 0.0;
        for (std::size_t k = 0; k < pairs; ++k) {
            between += std::pow((samples[2 * k].col(t) - samples[2 * k + 1].col(t)).norm(), beta);
        }
        total += to_truth / static_cast<double>(count) - 0.5 * between / static_cast<double>(pairs);
    }
    return total / static_cast<double>(h);
}

std::vector<ReportRow> evaluate_by_level(const Vector& per_series, const std::vector<std::string>& series_ids,
                                         const Tags& tags, const std::string& method, const std::string& metric) {
    if (per_series.size() != static_cast<Index>(series_ids.size())) {
        throw Error(ErrorCode::ShapeMismatch, "one score per series is required");
    }
    std::unordered_map<std::string, Index> index;
    for (std::size_t i = 0; i < series_ids.size(); ++i) {
        index.emplace(series_ids[i], static_cast<Index>(i));
    }
    std::vector<ReportRow> rows;
    for (const auto& [level, ids] : tags) {
        if (ids.empty()) {
            continue;
        }
        double sum = 0.0;
        for (const auto& id : ids) {
            const auto it = index.find(id);
            if (it == index.end()) {
                throw Error(ErrorCode::UnknownTag, "level '" + level + "' names unknown series '" + id + "'");
            }
            sum += per_series(it->second);
        }
        rows.push_back({level, method, metric, sum / static_cast<double>(ids.size()), std::nullopt});
    }
    rows.push_back({kOverallLevel, method, metric, per_series.mean(), std::nullopt});
    return rows;
}

EvaluationReport combine_replicates(const std::vector<EvaluationReport>& replicates) {
    if (replicates.empty()) {
        throw Error(ErrorCode::BadSpec, "no replicate reports");
    }
    EvaluationReport out;
    out.metadata = replicates.front().metadata;
    out.metadata["replicates"] = std::to_string(replicates.size());
    const auto k = static_cast<double>(replicates.size());
    for (std::size_t r = 0; r < replicates.front().rows.size(); ++r) {
        ReportRow row = replicates.front().rows[r];
        double sum = 0.0;
        for (const auto& rep : replicates) {
            if (rep.rows.size() != replicates.front().rows.size() || rep.rows[r].level != row.level ||
                rep.rows[r].method != row.method || rep.rows[r].metric != row.metric) {
                throw Error(ErrorCode::ShapeMismatch, "replicate reports have different rows");
            }
            sum += rep.rows[r].value;
        }
        const double mean = sum / k;
        double ss = 0.0;
        for (const auto& rep : replicates) {
            ss += (rep.rows[r].value - mean) * (rep.rows[r].value - mean);
        }
        row.value = mean;
        row.ci = replicates.size() > 1 ? 1.96 * std::sqrt(ss / (k - 1.0)) / std::sqrt(k) : 0.0;
        out.rows.push_back(std::move(row));
    }
    return out;
}

void EvaluationReport::write_csv(std::ostream& out) const {
    for (const auto& [key, value] : metadata) {
        out << "# " << key << '=' << value << '\n';
    }
    const bool with_ci = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.ci.has_value(); });
    out << "level,method,metric,value" << (with_ci ? ",ci95" : "") << '\n';
    for (const auto& r : rows) {
        out << csv::escape(r.level) << ',' << csv::escape(r.method) << ',' << csv::escape(r.metric) << ','
            << csv::format_double(r.value);
        if (with_ci) {
            out << ',' << (r.ci ? csv::format_double(*r.ci) : "");
        }
        out << '\n';
    }
}

void EvaluationReport::write_table(std::ostream& out) const {
    std::vector<std::string> levels;
    std::vector<std::string> columns;
    std::map<std::pair<std::string, std::string>, std::string> cells;
    for (const auto& r : rows) {
        if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) {
            levels.push_back(r.level);
        }
        const auto column = r.method + " " + r.metric;
        if (std::find(columns.begin(), columns.end(), column) == columns.end()) {
            columns.push_back(column);
        }
        std::ostringstream text;
        text << std::fixed << std::setprecision(3) << r.value;
        if (r.ci) {
            text << "±" << std::fixed << std::setprecision(3) << *r.ci;
        }
        cells[{r.level, column}] = text.str();
    }
    // Keep Overall last.
    if (auto it = std::find(levels.begin(), levels.end(), kOverallLevel); it != levels.end()) {
        levels.erase(it);
        levels.emplace_back(kOverallLevel);
    }
    std::size_t level_width = 5;
    for (const auto& l : levels) {
        level_width = std::max(level_width, l.size());
    }
    std::vector<std::size_t> widths;
    for (const auto& c : columns) {
        std::size_t w = c.size();
        for (const auto& l : levels) {
            w = std::max(w, cells[{l, c}].size());
        }
        widths.push_back(w);
    }
    out << std::left << std::setw(static_cast<int>(level_width)) << "level";
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << columns[c];
    }
    out << '\n';
    for (const auto& l : levels) {
        out << std::left << std::setw(static_cast<int>(level_width)) << l;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << cells[{l, columns[c]}];
        }
        out << '\n';
    }
}

}  // namespace hierfc
