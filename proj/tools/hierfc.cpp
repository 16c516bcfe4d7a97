#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hierfc/pipeline.hpp"

namespace {

// HF_<NAME> environment variables fill in flags that were not given.
CLI::Option* env(CLI::Option* opt, const char* name) {
    return opt->envname(std::string("HF_") + name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical forecast reconciliation"};
    app.set_help_flag("--help", "Print this help message and exit");
    app.require_subcommand(1);

    hierfc::ReconcileOptions rec;
    std::vector<std::string> methods;
    std::vector<double> levels;
    std::string intervals;
    auto* r = app.add_subcommand("reconcile", "Base forecasts, reconciliation and prediction intervals");
    env(r->add_option("--data", rec.data, "Long-format panel (unique_id,ds,y)")->required(), "DATA");
    env(r->add_option("--s", rec.s_matrix, "Summing matrix CSV")->required(), "S");
    env(r->add_option("--tags", rec.tags, "Level tags JSON")->required(), "TAGS");
    env(r->add_option("--out", rec.out, "Forecast output CSV")->required(), "OUT");
    env(r->add_option("--log", rec.log, "Also write warnings to this file"), "LOG");
    env(r->add_option("--model", rec.model, "naive | snaive[:m] | ses[:alpha]")->capture_default_str(),
                     "MODEL");
    r->add_option("--level-model", rec.level_models, "Per-level model override <level>=<model>");
    env(r->add_option("--season", rec.season, "Seasonal period m")->capture_default_str(), "SEASON");
    env(r->add_option("--h", rec.h, "Forecast horizon")->capture_default_str(), "H");
    r->add_flag("--holdout", rec.holdout, "Drop the last h periods before fitting");
    r->add_option("--methods", methods, "Comma-separated reconciliation methods")->delimiter(',');
    env(r->add_option("--intervals", intervals, "normality | bootstrap | permbu"), "INTERVALS");
    r->add_option("--levels", levels, "Interval levels in percent")->delimiter(',');
    env(r->add_option("--samples", rec.samples, "Sample paths for bootstrap/permbu")->capture_default_str(),
              "SAMPLES");
    env(r->add_option("--seed", rec.seed, "Random seed")->capture_default_str(), "SEED");
    env(r->add_option("--block-len", rec.block_len, "Bootstrap block length")->capture_default_str(),
              "BLOCK_LEN");
    env(r->add_option("--marginal", rec.marginal, "permbu marginals: gaussian | empirical")
                         ->capture_default_str(),
                     "MARGINAL");
    r->add_flag("--allow-experimental", rec.allow_experimental,
                "Allow normality/bootstrap intervals over top-down and middle-out");
    env(r->add_option("--threads", rec.threads, "Worker threads (0 = all cores)"), "THREADS");

    hierfc::EvaluateOptions ev;
    std::vector<std::string> metrics;
    auto* e = app.add_subcommand("evaluate", "Score forecasts against actuals by level");
    e->add_option("--forecasts", ev.forecasts, "Forecast CSV, one per replicate run")->required();
    env(e->add_option("--actuals", ev.actuals, "Long-format actuals")->required(), "ACTUALS");
    env(e->add_option("--s", ev.s_matrix, "Summing matrix CSV")->required(), "S");
    env(e->add_option("--tags", ev.tags, "Level tags JSON")->required(), "TAGS");
    e->add_option("--metrics", metrics, "mse, mase, scrps")->delimiter(',');
    env(e->add_option("--season", ev.season, "Seasonal period for MASE")->capture_default_str(), "SEASON");
    env(e->add_option("--out", ev.out, "Report CSV (stdout when omitted)"), "OUT");
    e->add_flag("--table", ev.table, "Print an aligned table to stdout");

    hierfc::SynthOptions syn;
    std::string spec_path;
    auto* s = app.add_subcommand("synth", "Generate a synthetic hierarchical panel");
    s->add_option("--spec", spec_path, "Scenario JSON");
    env(s->add_option("--out-dir", syn.out_dir, "Output directory")->required(), "OUT_DIR");
    auto* children = s->add_option("--children", syn.spec.children, "Fan-out per tree depth")->delimiter(',');
    auto* groups = s->add_option("--groups", syn.spec.groups, "Categories per grouping dimension")->delimiter(',');
    auto* periods = s->add_option("--periods", syn.spec.periods, "History length T");
    auto* horizon = s->add_option("--horizon", syn.spec.horizon, "Extra periods appended");
    auto* season = s->add_option("--season", syn.spec.season, "Seasonal period");
    auto* sigma = s->add_option("--sigma", syn.spec.sigma, "Bottom noise scale");
    auto* rho = s->add_option("--rho", syn.spec.rho, "Bottom noise correlation");
    auto* level = s->add_option("--level", syn.spec.level, "Mean bottom level");
    auto* trend = s->add_option("--trend", syn.spec.trend, "Mean bottom slope");
    auto* seasonal = s->add_option("--seasonal", syn.spec.seasonal, "Seasonal amplitude");
    auto* seed = env(s->add_option("--seed", syn.spec.seed, "Random seed"), "SEED");

    CLI11_PARSE(app, argc, argv);

    if (r->parsed()) {
        if (!methods.empty()) {
            rec.methods = methods;
        }
        if (!levels.empty()) {
            rec.levels = levels;
        }
        if (!intervals.empty()) {
            rec.intervals = intervals;
        }
        return hierfc::run_reconcile(rec, std::cerr);
    }
    if (e->parsed()) {
        if (!metrics.empty()) {
            ev.metrics = metrics;
        }
        return hierfc::run_evaluate(ev, std::cerr);
    }
    if (!spec_path.empty()) {
        // Flags given on the command line override the file.
        hierfc::ScenarioSpec flags = syn.spec;
        std::ifstream in(spec_path);
        if (!in) {
            std::cerr << "error: ParseError: spec file '" << spec_path << "' does not exist\n";
            return hierfc::kExitInput;
        }
        try {
            syn.spec = hierfc::ScenarioSpec::from_json(in);
        } catch (const std::exception& ex) {
            std::cerr << "error: " << spec_path << ": " << ex.what() << '\n';
            return hierfc::kExitInput;
        }
        if (children->count()) syn.spec.children = flags.children;
        if (groups->count()) syn.spec.groups = flags.groups;
        if (periods->count()) syn.spec.periods = flags.periods;
        if (horizon->count()) syn.spec.horizon = flags.horizon;
        if (season->count()) syn.spec.season = flags.season;
        if (sigma->count()) syn.spec.sigma = flags.sigma;
        if (rho->count()) syn.spec.rho = flags.rho;
        if (level->count()) syn.spec.level = flags.level;
        if (trend->count()) syn.spec.trend = flags.trend;
        if (seasonal->count()) syn.spec.seasonal = flags.seasonal;
        if (seed->count()) syn.spec.seed = flags.seed;
    }
    return hierfc::run_synth(syn, std::cerr);
}
