#include "hierfc/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "hierfc/baseforecast.hpp"
#include "hierfc/evaluation.hpp"
#include "hierfc/reconcile_prob.hpp"

namespace hierfc {

namespace {

/// Error raised with context prepended (file, method).
Error with_context(const Error& e, const std::string& context) {
    std::string what = e.what();
    const auto prefix = std::string(to_string(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) {
        what = what.substr(prefix.size());
    }
    return Error(e.code(), context + ": " + what);
}

int report(const Error& e, std::ostream& diag) {
    diag << "error: " << e.what() << '\n';
    return is_numerical(e.code()) ? kExitNumerical : kExitInput;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) {
        throw Error(ErrorCode::ParseError, std::string("no ") + what + " file given");
    }
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::ParseError, std::string(what) + " file '" + path + "' does not exist");
    }
}

HierarchyStructure load_structure(const std::string& s_path, const std::string& tags_path) {
    require_file(s_path, "S matrix");
    require_file(tags_path, "tags");
    try {
        return read_structure_files(s_path, tags_path);
    } catch (const Error& e) {
        throw with_context(e, s_path + " / " + tags_path);
    }
}

void emit_warnings(const Diagnostics& diagnostics, std::ostream& diag, std::ostream* log) {
    for (const auto& w : diagnostics.items()) {
        diag << "warning: [" << w.source << "] " << w.message << '\n';
        if (log != nullptr) {
            *log << "warning: [" << w.source << "] " << w.message << '\n';
        }
    }
}

std::vector<ModelSpec> series_models(const ReconcileOptions& options, const HierarchyStructure& structure) {
    const ModelSpec fallback = ModelSpec::parse(options.model);
    std::vector<ModelSpec> models(static_cast<std::size_t>(structure.n()), fallback);
    for (const auto& entry : options.level_models) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::BadSpec, "level model must be <level>=<model>, got '" + entry + "'");
        }
        const auto level = entry.substr(0, eq);
        const ModelSpec spec = ModelSpec::parse(entry.substr(eq + 1));
        for (Index row : structure.level_rows(level)) {
            models[static_cast<std::size_t>(row)] = spec;
        }
    }
    return models;
}

int reconcile_impl(const ReconcileOptions& options, std::ostream& diag) {
    std::unique_ptr<std::ofstream> log;
    if (!options.log.empty()) {
        log = std::make_unique<std::ofstream>(options.log);
        if (!*log) {
            throw Error(ErrorCode::ParseError, "cannot open log file '" + options.log + "'");
        }
    }
    if (options.out.empty()) {
        throw Error(ErrorCode::BadSpec, "no output file given (--out)");
    }
    if (options.h < 1) {
        throw Error(ErrorCode::BadSpec, "--h must be positive");
    }
    if (options.methods.empty()) {
        throw Error(ErrorCode::BadSpec, "no reconciliation methods given");
    }

    const HierarchyStructure structure = load_structure(options.s_matrix, options.tags);
    require_file(options.data, "panel");
    SeriesPanel panel = load_long_file(options.data, &structure, options.season);
    if (options.holdout) {
        try {
            panel = split_holdout(panel, options.h).first;
        } catch (const Error& e) {
            throw with_context(e, options.data);
        }
    }

    // Parse every selector before doing any work.
    std::vector<MethodSpec> methods;
    for (const auto& m : options.methods) {
        methods.push_back(MethodSpec::parse(m));
    }
    std::optional<IntervalMethod> intervals;
    if (options.intervals) {
        intervals = parse_interval_method(*options.intervals);
        if (options.levels.empty()) {
            throw Error(ErrorCode::EmptyLevels, "no interval levels given (--levels)");
        }
    }
    const MarginalKind marginal = parse_marginal(options.marginal);
    const StructureKind kind = classify(structure);
    for (const auto& m : methods) {
        if (is_top_down_family(m.method) && kind == StructureKind::Grouped) {
            throw Error(ErrorCode::GroupedStructure,
                        m.selector + " cannot be applied to grouped hierarchical structures");
        }
        if (intervals && is_top_down_family(m.method) && !options.allow_experimental &&
            *intervals != IntervalMethod::Permbu) {
            throw Error(ErrorCode::NoExplicitP, std::string(to_string(*intervals)) + " intervals over " + m.selector +
                                                    " are not implemented; pass --allow-experimental");
        }
    }
    if (intervals == IntervalMethod::Permbu && kind == StructureKind::Grouped) {
        throw Error(ErrorCode::GroupedStructure, "permbu cannot be applied to grouped hierarchical structures");
    }

    Diagnostics diagnostics;
    if (!validate_coherence(structure, panel.values, 1e-6).empty()) {
        diagnostics.warn("input", options.data + " is not coherent with the S matrix at 1e-6");
    }

    const BaseForecast base = forecast_models(panel, options.h, series_models(options, structure), options.threads);
    const Matrix residuals = base.complete_residuals();

    std::vector<std::pair<std::string, ForecastFrame>> frames;
    for (const auto& spec : methods) {
        try {
            const ReconciliationMap map = build_map(spec, structure, panel, base, &diagnostics);
            ForecastFrame frame = reconcile(map, structure, base.forecast);
            if (intervals) {
                SamplingOptions sampling;
                sampling.samples = options.samples;
                sampling.seed = options.seed;
                sampling.block_len = options.block_len;
                sampling.threads = options.threads;
                sampling.allow_experimental = options.allow_experimental;
                ProbabilisticForecast prob;
                switch (*intervals) {
                    case IntervalMethod::Normality:
                        prob = normality_bands(map, structure, normality_covariance(map, residuals), base.forecast.point,
                                               options.levels, options.allow_experimental);
                        break;
                    case IntervalMethod::Bootstrap:
                        prob = bootstrap_samples(map, structure, base.forecast.point, residuals, options.levels,
                                                 sampling);
                        break;
                    case IntervalMethod::Permbu:
                        prob = permbu_samples(map, structure, base.forecast.point, residuals, options.levels, sampling,
                                              marginal);
                        break;
                }
                frame.bands = std::move(prob.bands);
            }
            frames.emplace_back(spec.selector, std::move(frame));
        } catch (const Error& e) {
            throw with_context(e, "method " + spec.selector);
        }
    }

    std::ofstream out(options.out, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::ParseError, "cannot write output file '" + options.out + "'");
    }
    write_forecasts(out, frames);
    emit_warnings(diagnostics, diag, log.get());
    return kExitOk;
}

/// Actuals for the forecast periods, plus the in-sample history before them.
struct Alignment {
    Matrix actual;
    Matrix insample;
};

Alignment align(const SeriesPanel& actuals, const ForecastFrame& frame, const std::string& where) {
    std::map<std::string, Index> column;
    for (std::size_t t = 0; t < actuals.timestamps.size(); ++t) {
        column.emplace(actuals.timestamps[t], static_cast<Index>(t));
    }
    Alignment out{Matrix(actuals.n(), frame.horizon()), Matrix()};
    Index first = actuals.periods();
    for (Index t = 0; t < frame.horizon(); ++t) {
        const auto& label = frame.horizon_labels[static_cast<std::size_t>(t)];
        const auto it = column.find(label);
        if (it == column.end()) {
            throw Error(ErrorCode::ShapeMismatch, where + ": period '" + label + "' is missing from the actuals");
        }
        out.actual.col(t) = actuals.values.col(it->second);
        first = std::min(first, it->second);
    }
    out.insample = actuals.values.leftCols(first);
    return out;
}

int evaluate_impl(const EvaluateOptions& options, std::ostream& diag) {
    if (options.forecasts.empty()) {
        throw Error(ErrorCode::BadSpec, "no forecast files given (--forecasts)");
    }
    if (options.metrics.empty()) {
        throw Error(ErrorCode::BadSpec, "no metrics given");
    }
    for (const auto& m : options.metrics) {
        if (m != "mse" && m != "mase" && m != "scrps") {
            throw Error(ErrorCode::BadSpec, "unknown metric '" + m + "' (expected mse, mase, scrps)");
        }
    }
    const HierarchyStructure structure = load_structure(options.s_matrix, options.tags);
    require_file(options.actuals, "actuals");
    const SeriesPanel actuals = load_long_file(options.actuals, &structure, options.season);

    std::vector<EvaluationReport> reports;
    for (const auto& path : options.forecasts) {
        require_file(path, "forecast");
        std::ifstream in(path);
        std::vector<std::pair<std::string, ForecastFrame>> frames;
        try {
            frames = read_forecasts(in, &structure);
        } catch (const Error& e) {
            throw with_context(e, path);
        }
        EvaluationReport report;
        report.metadata["n"] = std::to_string(structure.n());
        report.metadata["scrps_aggregation"] = "mean of per-series scaled scores";
        for (const auto& [method, frame] : frames) {
            const auto where = path + ", method " + method;
            const Alignment aligned = align(actuals, frame, where);
            report.metadata["h"] = std::to_string(frame.horizon());
            for (const auto& metric : options.metrics) {
                Vector scores;
                try {
                    if (metric == "mse") {
                        scores = mse(aligned.actual, frame.point);
                    } else if (metric == "mase") {
                        scores = mase(aligned.actual, frame.point, aligned.insample, options.season);
                    } else {
                        scores = scrps(aligned.actual, quantiles_from_bands(frame.point, frame.bands));
                    }
                } catch (const Error& e) {
                    throw with_context(e, where);
                }
                auto rows = evaluate_by_level(scores, structure.series_ids(), structure.tags(), method, metric);
                report.rows.insert(report.rows.end(), rows.begin(), rows.end());
            }
        }
        reports.push_back(std::move(report));
    }
    EvaluationReport final_report = reports.size() == 1 ? reports.front() : combine_replicates(reports);

    if (options.out.empty()) {
        final_report.write_csv(std::cout);
    } else {
        std::ofstream out(options.out, std::ios::binary);
        if (!out) {
            throw Error(ErrorCode::ParseError, "cannot write report file '" + options.out + "'");
        }
        final_report.write_csv(out);
    }
    if (options.table) {
        final_report.write_table(std::cout);
    }
    (void)diag;
    return kExitOk;
}

int synth_impl(const SynthOptions& options, std::ostream& diag) {
    if (options.out_dir.empty()) {
        throw Error(ErrorCode::BadSpec, "no output directory given (--out-dir)");
    }
    const Scenario scenario = generate(options.spec);
    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::ParseError, "cannot create '" + options.out_dir + "': " + ec.message());
    }
    const std::filesystem::path dir(options.out_dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) {
            throw Error(ErrorCode::ParseError, "cannot write '" + (dir / name).string() + "'");
        }
        return f;
    };
    {
        auto f = open("y.csv");
        write_long(f, scenario.panel);
    }
    {
        auto f = open("s.csv");
        write_s_matrix(f, scenario.structure);
    }
    {
        auto f = open("tags.json");
        write_tags(f, scenario.structure);
    }
    {
        auto f = open("spec.json");
        f << options.spec.to_json() << '\n';
    }
    diag << "wrote " << scenario.structure.n() << " series (" << scenario.structure.n_bottom() << " bottom, "
         << to_string(classify(scenario.structure)) << ") x " << scenario.panel.periods() << " periods to "
         << options.out_dir << '\n';
    return kExitOk;
}

template <typename Fn>
int guarded(Fn&& fn, std::ostream& diag) {
    try {
        return fn();
    } catch (const Error& e) {
        return report(e, diag);
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

}  // namespace

int run_reconcile(const ReconcileOptions& options, std::ostream& diag) {
    return guarded([&] { return reconcile_impl(options, diag); }, diag);
}

int run_evaluate(const EvaluateOptions& options, std::ostream& diag) {
    return guarded([&] { return evaluate_impl(options, diag); }, diag);
}

int run_synth(const SynthOptions& options, std::ostream& diag) {
    return guarded([&] { return synth_impl(options, diag); }, diag);
}

}  // namespace hierfc
