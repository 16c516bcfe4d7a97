#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hierfc/synth.hpp"

namespace hierfc {

/// Process exit codes of the command-line pipeline.
enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumerical = 3 };

struct ReconcileOptions {
    std::string data;
    std::string s_matrix;
    std::string tags;
    std::string out;
    std::string log;
    std::string model = "naive";
    std::vector<std::string> level_models;  // "<level>=<model>"
    int season = 1;
    long h = 12;
    bool holdout = false;
    std::vector<std::string> methods = {"bottom_up"};
    std::optional<std::string> intervals;
    std::vector<double> levels = {80.0, 90.0};
    long samples = 1000;
    std::uint64_t seed = 0;
    long block_len = 1;
    std::string marginal = "gaussian";
    bool allow_experimental = false;
    std::size_t threads = 0;
};

struct EvaluateOptions {
    std::vector<std::string> forecasts;  // one file per replicate run
    std::string actuals;
    std::string s_matrix;
    std::string tags;
    std::vector<std::string> metrics = {"mse"};
    int season = 1;
    std::string out;
    bool table = false;
};

struct SynthOptions {
    ScenarioSpec spec;
    std::string out_dir;
};

/// Each returns an ExitCode and reports errors and warnings on `diag`.
int run_reconcile(const ReconcileOptions& options, std::ostream& diag);
int run_evaluate(const EvaluateOptions& options, std::ostream& diag);
int run_synth(const SynthOptions& options, std::ostream& diag);

}  // namespace hierfc
