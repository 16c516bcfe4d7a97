// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "hierfc/baseforecast.hpp"
#include "hierfc/evaluation.hpp"
#include "hierfc/reconcile_prob.hpp"
#include "hierfc/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hierfc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
    Outcome out;
    const auto start = Clock::now();
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) {
        ++failures;
    }
    std::printf("%s  %-22s %s (%.1fs)\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

SeriesPanel make_panel(const Matrix& values) {
    SeriesPanel p;
    p.values = values;
    for (Index t = 0; t < values.cols(); ++t) p.timestamps.push_back(std::to_string(t + 1));
    for (Index i = 0; i < values.rows(); ++i) p.series_ids.push_back("s" + std::to_string(i));
    return p;
}

// Coherent positive bottoms plus independent aggregate noise, so base
// forecasts are incoherent.
SeriesPanel noisy_panel(std::mt19937_64& gen, const HierarchyStructure& h, Index T) {
    const Matrix bottom = (oracle::gaussian(gen, h.n_bottom(), T, 2.0).array() + 30.0).matrix();
    Matrix values = h.s() * bottom + oracle::gaussian(gen, h.n(), T, 1.5);
    auto p = make_panel(values);
    p.series_ids = h.series_ids();
    return p;
}

std::vector<std::string> selectors(const HierarchyStructure& h, double lasso_lambda) {
    std::vector<std::string> out{"bottom_up",       "comb:ols",         "comb:wls",
                                 "min_trace:ols",   "min_trace:wls_struct", "min_trace:wls_var",
                                 "min_trace:shrink", "erm:cf",          "erm:lasso:" + std::to_string(lasso_lambda)};
    if (classify(h) == StructureKind::StrictTree) {
        for (const char* s : {"top_down:f", "top_down:a", "top_down:p"}) out.emplace_back(s);
        out.push_back("middle_out:" + h.tags()[h.tags().size() > 2 ? 1 : 0].first);
    }
    return out;
}

Outcome coherence_suite() {
    std::mt19937_64 gen(101);
    Index checks = 0;
    Index structures_grouped = 0;
    const auto start = Clock::now();
    for (int k = 0; k < 50; ++k) {
        const auto rs = k % 2 == 0 ? oracle::random_grouped(gen, 200) : oracle::random_tree(gen, 200);
        const auto h = rs.build();
        structures_grouped += classify(h) == StructureKind::Grouped;
        const auto panel = noisy_panel(gen, h, 36);
        const auto base = forecast_ses(panel, 6, 0.3);
        Diagnostics diag;
        const double lambda = 1e-2 * (base.forecast.point.squaredNorm() / static_cast<double>(h.n()));
        for (const auto& sel : selectors(h, lambda)) {
            const auto map = build_map(MethodSpec::parse(sel), h, panel, base, &diag);
            const Matrix rec = reconcile_point(map, h, base.forecast.point);
            const auto v = validate_coherence(h, rec, 1e-8);
            if (!v.empty()) {
                return {false, sel + " incoherent on structure " + std::to_string(k) + " (n=" +
                                   std::to_string(h.n()) + ")"};
            }
            ++checks;
        }
    }
    const double elapsed = seconds_since(start);
    return {elapsed < 60.0, std::to_string(checks) + " method/structure pairs, " +
                                std::to_string(structures_grouped) + " grouped of 50, " + fmt(elapsed) +
                                "s (limit 60s)"};
}

Outcome projection_identities() {
    std::mt19937_64 gen(202);
    double worst_ps = 0.0;
    double worst_fix = 0.0;
    for (int k = 0; k < 100; ++k) {
        const auto h = oracle::random_structure(gen, 120).build();
        const auto panel = noisy_panel(gen, h, 30);
        const auto base = forecast_ses(panel, 3, 0.4);
        const Matrix coherent = h.s() * oracle::gaussian(gen, h.n_bottom(), 3, 10.0);
        const Matrix eye = Matrix::Identity(h.n_bottom(), h.n_bottom());
        for (const char* sel : {"bottom_up", "comb:ols", "comb:wls", "min_trace:ols", "min_trace:wls_struct",
                                "min_trace:wls_var", "min_trace:shrink"}) {
            const auto map = build_map(MethodSpec::parse(sel), h, panel, base);
            worst_ps = std::max(worst_ps, oracle::max_abs(*map.p * h.s() - eye));
            if (std::string(sel).rfind("min_trace", 0) == 0) {
                const Matrix rec = reconcile_point(map, h, coherent);
                worst_fix = std::max(worst_fix, oracle::max_abs(rec - coherent) / std::max(1.0, oracle::max_abs(coherent)));
            }
        }
    }
    return {worst_ps <= 1e-8 && worst_fix <= 1e-10,
            "max |PS - I| = " + fmt(worst_ps) + " (1e-8), max relative drift on coherent input = " + fmt(worst_fix) +
                " (1e-10), 100 structures"};
}

Outcome gls_oracle() {
    std::mt19937_64 gen(303);
    double worst = 0.0;
    int cases = 0;
    for (int k = 0; k < 100; ++k) {
        const auto h = oracle::random_structure(gen, 30).build();
        const Matrix r = oracle::gaussian(gen, h.n(), 8 + k % 30) + 0.5 * h.s() * oracle::gaussian(gen, h.n_bottom(), 8 + k % 30);
        const Matrix yhat = oracle::gaussian(gen, h.n(), 4, 20.0);
        const std::vector<std::pair<CovarianceVariant, Matrix>> weights{
            {CovarianceVariant::Ols, Matrix::Identity(h.n(), h.n())},
            {CovarianceVariant::WlsStruct, Matrix(h.s().rowwise().sum().asDiagonal())},
            {CovarianceVariant::WlsVar, oracle::w_variance(r)},
            {CovarianceVariant::Shrink, [&] {
                 double lam = 0;
                 return oracle::w_shrink(r, &lam);
             }()}};
        for (const auto& [variant, w_ref] : weights) {
            const auto est = estimate_w(variant, h, r);
            const Matrix got = reconcile_point(mintrace(h, est.w), h, yhat);
            const Matrix expected = oracle::gls_reconcile(h.s(), w_ref, yhat);
            worst = std::max(worst, oracle::max_abs(got - expected) / std::max(1.0, oracle::max_abs(expected)));
            ++cases;
        }
    }
    return {worst <= 1e-6, std::to_string(cases) + " cases, max relative error " + fmt(worst) + " (1e-6)"};
}

Outcome worked_fixtures() {
    const auto h = build_structure({{"total", {"T"}}, {"bottom", {"A", "B"}}}, {{"T", {"A", "B"}}});
    Matrix yhat(3, 1);
    yhat << 12, 5, 4;
    Matrix bu(3, 1);
    bu << 9, 5, 4;
    Matrix ols(3, 1);
    ols << 11, 6, 5;
    const double e1 = oracle::max_abs(reconcile_point(bottom_up(h), h, yhat) - bu);
    const double e2 = oracle::max_abs(reconcile_point(mintrace(h, Matrix::Identity(3, 3)), h, yhat) - ols);
    return {e1 <= 1e-12 && e2 <= 1e-12, "bottom_up [9,5,4] err " + fmt(e1) + ", mintrace_ols [11,6,5] err " + fmt(e2)};
}

Outcome shrinkage_validity() {
    std::mt19937_64 gen(404);
    int rank_deficient = 0;
    double lo = 1.0;
    double hi = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto h = oracle::random_structure(gen, 60).build();
        const Index T = 3 + static_cast<Index>(gen() % 40);
        Matrix r;
        switch (k % 3) {
            case 0: r = oracle::gaussian(gen, h.n(), T); break;
            // exactly coherent residuals: rank at most n_b
            case 1: r = h.s() * oracle::gaussian(gen, h.n_bottom(), T); break;
            // a few common factors
            default: r = oracle::gaussian(gen, h.n(), 2) * oracle::gaussian(gen, 2, T); break;
        }
        Eigen::FullPivLU<Matrix> lu(r);
        rank_deficient += lu.rank() < h.n();
        const auto est = estimate_w(CovarianceVariant::Shrink, h, r);
        const double lam = *est.shrink_lambda;
        if (!(lam >= 0.0 && lam <= 1.0)) {
            return {false, "lambda " + fmt(lam) + " outside [0,1] at case " + std::to_string(k)};
        }
        lo = std::min(lo, lam);
        hi = std::max(hi, lam);
        const auto map = mintrace(h, est.w, Method::MinTraceShrink);
        if (!map.p->allFinite()) {
            return {false, "non-finite P at case " + std::to_string(k)};
        }
    }
    return {true, "1000 matrices (" + std::to_string(rank_deficient) + " rank-deficient), lambda in [" + fmt(lo) +
                      ", " + fmt(hi) + "], all factorizations succeeded"};
}

Outcome bootstrap_coverage() {
    std::array<double, 2> hits{};
    double total = 0.0;
    const std::vector<double> levels{80, 90};
    const auto start = Clock::now();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ScenarioSpec spec;
        spec.children = {5, 4};
        spec.periods = 48;
        spec.horizon = 12;
        spec.sigma = 2.0;
        spec.seed = seed;
        const auto sc = generate(spec);
        const auto [train, test] = split_holdout(sc.panel, 12);
        const auto base = forecast_naive(train, 12);
        for (const char* sel : {"bottom_up", "min_trace:shrink"}) {
            const auto map = build_map(MethodSpec::parse(sel), sc.structure, train, base);
            SamplingOptions opt;
            opt.samples = 2000;
            opt.seed = seed;
            opt.threads = 0;
            const auto f = bootstrap_samples(map, sc.structure, base.forecast.point, base.complete_residuals(), levels, opt);
            for (std::size_t l = 0; l < levels.size(); ++l) {
                const auto& band = f.bands.at(levels[l]);
                hits[l] += ((test.values.array() >= band.lo.array()) && (test.values.array() <= band.hi.array()))
                               .cast<double>()
                               .sum();
            }
            total += static_cast<double>(test.values.size());
        }
    }
    const double c80 = 100.0 * hits[0] / total;
    const double c90 = 100.0 * hits[1] / total;
    const double elapsed = seconds_since(start);
    return {std::abs(c80 - 80.0) <= 5.0 && std::abs(c90 - 90.0) <= 5.0 && elapsed < 300.0,
            "coverage 80%: " + fmt(c80) + ", 90%: " + fmt(c90) + " over 10 seeds, B=2000, " + fmt(elapsed) + "s"};
}

int run(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch() {
    const auto dir = fs::temp_directory_path() / ("hierfc_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir;
}

Outcome determinism() {
    const auto dir = scratch() / "det";
    fs::remove_all(dir);
    const std::string cli = HIERFC_CLI;
    if (run(cli + " synth --out-dir " + dir.string() +
            " --children 10,10 --groups 4 --periods 216 --horizon 12 --season 12 --seasonal 8 --sigma 3 --rho 0.2 "
            "--seed 42 2> /dev/null") != 0) {
        return {false, "synth failed"};
    }
    const auto start = Clock::now();
    std::vector<std::string> outputs;
    for (const char* threads : {"1", "8", "8"}) {
        const auto out = dir / ("rec_" + std::to_string(outputs.size()) + ".csv");
        const std::string cmd = cli + " reconcile --data " + (dir / "y.csv").string() + " --s " + (dir / "s.csv").string() +
                                " --tags " + (dir / "tags.json").string() +
                                " --model snaive --season 12 --h 12 --holdout --methods bottom_up,min_trace:shrink"
                                " --intervals bootstrap --samples 1000 --levels 80,90 --seed 7 --threads " +
                                threads + " --out " + out.string() + " 2> /dev/null";
        if (run(cmd) != 0) {
            return {false, "reconcile failed with --threads " + std::string(threads)};
        }
        outputs.push_back(slurp(out));
    }
    const double elapsed = seconds_since(start);
    std::ifstream s(dir / "s.csv");
    std::ifstream t(dir / "tags.json");
    const Index n = read_structure(s, t).n();
    const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2] && !outputs[0].empty();
    fs::remove_all(dir);
    return {same && n == 555 && elapsed < 300.0,
            std::to_string(n) + " series, h=12, B=1000, 3 runs (--threads 1, 8, 8) " +
                (same ? "byte-identical" : "DIFFER") + ", " + fmt(elapsed) + "s total"};
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected an error");
}

Outcome guards() {
    ScenarioSpec gspec;
    gspec.groups = {2, 2};
    gspec.children = {2};
    const auto g = generate(gspec);
    const auto [train, test] = split_holdout(g.panel, 12);
    const auto base = forecast_naive(train, 12);
    int checked = 0;
    for (const char* sel : {"top_down:f", "top_down:a", "top_down:p", "middle_out:total"}) {
        if (code_of([&] { build_map(MethodSpec::parse(sel), g.structure, train, base); }) != ErrorCode::GroupedStructure)
            return {false, std::string(sel) + " accepted a grouped structure"};
        ++checked;
    }
    SamplingOptions opt;
    opt.samples = 10;
    if (code_of([&] {
            permbu_samples(bottom_up(g.structure), g.structure, base.forecast.point, base.complete_residuals(), {80},
                           opt);
        }) != ErrorCode::GroupedStructure)
        return {false, "permbu accepted a grouped structure"};
    ++checked;

    ScenarioSpec tspec;
    tspec.children = {2, 2};
    const auto tr = generate(tspec);
    const auto [ttrain, ttest] = split_holdout(tr.panel, 12);
    const auto tbase = forecast_naive(ttrain, 12);
    const auto td = build_map(MethodSpec::parse("top_down:f"), tr.structure, ttrain, tbase);
    const Matrix w = Matrix::Identity(tr.structure.n(), tr.structure.n());
    if (code_of([&] { normality_bands(td, tr.structure, w, tbase.forecast.point, {80}); }) != ErrorCode::NoExplicitP)
        return {false, "normality over top_down accepted"};
    if (code_of([&] {
            bootstrap_samples(td, tr.structure, tbase.forecast.point, tbase.complete_residuals(), {80}, opt);
        }) != ErrorCode::NoExplicitP)
        return {false, "bootstrap over top_down accepted"};
    checked += 2;
    opt.allow_experimental = true;
    normality_bands(td, tr.structure, w, tbase.forecast.point, {80}, true);
    bootstrap_samples(td, tr.structure, tbase.forecast.point, tbase.complete_residuals(), {80}, opt);

    // same guards through the command line
    const auto dir = scratch() / "guards";
    fs::remove_all(dir);
    const std::string cli = HIERFC_CLI;
    if (run(cli + " synth --out-dir " + dir.string() + " --children 2 --groups 2 2> /dev/null") != 0)
        return {false, "synth failed"};
    const std::string inputs = " --data " + (dir / "y.csv").string() + " --s " + (dir / "s.csv").string() +
                               " --tags " + (dir / "tags.json").string() + " --out " + (dir / "x.csv").string();
    const auto err = dir / "err.txt";
    for (const char* flags : {" --methods top_down:a", " --intervals permbu"}) {
        if (run(cli + " reconcile" + inputs + flags + " 2> " + err.string()) != 2 ||
            slurp(err).find("cannot be applied to group") == std::string::npos)
            return {false, std::string("CLI did not reject") + flags};
        ++checked;
    }
    fs::remove_all(dir);
    return {true, std::to_string(checked) + " guard checks (library and CLI), experimental flag unlocks top_down bands"};
}

Outcome scoring_properties() {
    std::mt19937_64 gen(505);
    double worst_scale = 0.0;
    double min_score = 0.0;
    double perfect = 0.0;
    for (int k = 0; k < 200; ++k) {
        const Index n = 1 + static_cast<Index>(gen() % 6);
        const Index h = 1 + static_cast<Index>(gen() % 5);
        const Matrix actual = (oracle::gaussian(gen, n, h, 3.0).array() + 1.0).matrix();
        std::vector<Matrix> samples;
        for (int b = 0; b < 64; ++b) samples.push_back(actual + oracle::gaussian(gen, n, h, 2.0));
        const auto grid = default_quantile_grid();
        const Vector base_score = scrps(actual, quantiles_from_samples(samples, grid));
        min_score = std::min({min_score, base_score.minCoeff(), energy_score(actual, samples)});
        for (double c : {0.01, 1.0, 1000.0}) {
            std::vector<Matrix> scaled;
            for (const auto& s : samples) scaled.push_back(c * s);
            const Vector sc = scrps(c * actual, quantiles_from_samples(scaled, grid));
            worst_scale = std::max(worst_scale, (sc - base_score).cwiseAbs().maxCoeff());
        }
        const std::vector<Matrix> degenerate(8, actual);
        perfect = std::max({perfect, scrps(actual, quantiles_from_samples(degenerate, grid)).cwiseAbs().maxCoeff(),
                            std::abs(energy_score(actual, degenerate))});
    }
    return {perfect == 0.0 && min_score >= 0.0 && worst_scale <= 1e-10,
            "perfect forecasts score " + fmt(perfect) + ", min score " + fmt(min_score) +
                ", max sCRPS change under rescaling " + fmt(worst_scale) + " (1e-10)"};
}

Outcome trend_check() {
    double bu = 0.0;
    double shrink = 0.0;
    int shrink_wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ScenarioSpec spec;
        spec.children = {4, 5};
        spec.periods = 60;
        spec.horizon = 12;
        spec.sigma = 4.0;
        spec.seed = seed;
        const auto sc = generate(spec);
        const auto [train, test] = split_holdout(sc.panel, 12);
        std::vector<ModelSpec> models(static_cast<std::size_t>(sc.structure.n()), ModelSpec::parse("ses:0.1"));
        for (Index row : sc.structure.level_rows(sc.structure.tags().back().first))
            models[static_cast<std::size_t>(row)] = ModelSpec::parse("naive");
        const auto base = forecast_models(train, 12, models);
        double scores[2];
        int m = 0;
        for (const char* sel : {"bottom_up", "min_trace:shrink"}) {
            const auto map = build_map(MethodSpec::parse(sel), sc.structure, train, base);
            SamplingOptions opt;
            opt.samples = 1000;
            opt.seed = seed;
            opt.threads = 0;
            const auto f = bootstrap_samples(map, sc.structure, base.forecast.point, base.complete_residuals(), {80}, opt);
            scores[m++] = scrps(test.values, quantiles_from_samples(f.samples, default_quantile_grid())).mean();
        }
        bu += scores[0] / 10.0;
        shrink += scores[1] / 10.0;
        shrink_wins += scores[1] <= scores[0];
    }
    return {shrink <= bu, "mean sCRPS min_trace:shrink " + fmt(shrink) + " vs bottom_up " + fmt(bu) + " (shrink lower on " +
                              std::to_string(shrink_wins) + "/10 seeds)"};
}

}  // namespace

int main() {
    criterion("coherence", coherence_suite);
    criterion("projection", projection_identities);
    criterion("gls-oracle", gls_oracle);
    criterion("worked-fixtures", worked_fixtures);
    criterion("shrinkage-validity", shrinkage_validity);
    criterion("bootstrap-coverage", bootstrap_coverage);
    criterion("determinism", determinism);
    criterion("applicability-guards", guards);
    criterion("scoring-properties", scoring_properties);
    criterion("trend", trend_check);
    fs::remove_all(scratch());
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
