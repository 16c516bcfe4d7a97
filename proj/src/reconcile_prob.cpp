#include "hierfc/reconcile_prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "hierfc/parallel.hpp"
#include "hierfc/rng.hpp"

namespace hierfc {

std::string_view to_string(IntervalMethod method) noexcept {
    switch (method) {
        case IntervalMethod::Normality: return "normality";
        case IntervalMethod::Bootstrap: return "bootstrap";
        case IntervalMethod::Permbu: return "permbu";
    }
    return "unknown";
}

IntervalMethod parse_interval_method(std::string_view text) {
    if (text == "normality") {
        return IntervalMethod::Normality;
    }
    if (text == "bootstrap") {
        return IntervalMethod::Bootstrap;
    }
    if (text == "permbu") {
        return IntervalMethod::Permbu;
    }
    throw Error(ErrorCode::BadSpec, "unknown interval method '" + std::string(text) + "'");
}

MarginalKind parse_marginal(std::string_view text) {
    if (text == "gaussian") {
        return MarginalKind::Gaussian;
    }
    if (text == "empirical") {
        return MarginalKind::Empirical;
    }
    throw Error(ErrorCode::BadSpec, "unknown marginal sampler '" + std::string(text) + "'");
}

namespace {

void check_levels(const std::vector<double>& levels) {
    if (levels.empty()) {
        throw Error(ErrorCode::EmptyLevels, "no interval levels requested");
    }
    for (double level : levels) {
        if (!(level >= 0.0 && level < 100.0)) {
            throw Error(ErrorCode::BadLevel, "interval level must lie in [0, 100)");
        }
    }
}

void reject_top_down(const ReconciliationMap& map, std::string_view what, bool allow_experimental) {
    if (is_top_down_family(map.method) && !allow_experimental) {
        throw Error(ErrorCode::NoExplicitP,
                    std::string(what) + " intervals over " + std::string(to_string(map.method)) +
                        " are not implemented; pass --allow-experimental to compute them anyway");
    }
}

}  // namespace

double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t count = sorted.size();
    if (count == 0) {
        throw Error(ErrorCode::TooFewSamples, "quantile of an empty sample");
    }
    const double pos = static_cast<double>(count - 1) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, count - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::map<double, Band> quantile_bands(const std::vector<Matrix>& samples, const std::vector<double>& levels) {
    check_levels(levels);
    if (samples.empty()) {
        throw Error(ErrorCode::TooFewSamples, "quantile bands need at least one sample");
    }
    const Index n = samples.front().rows();
    const Index h = samples.front().cols();
    std::map<double, Band> bands;
    for (double level : levels) {
        bands.emplace(level, Band{Matrix(n, h), Matrix(n, h)});
    }
    std::vector<double> cell(samples.size());
    for (Index i = 0; i < n; ++i) {
        for (Index t = 0; t < h; ++t) {
            for (std::size_t b = 0; b < samples.size(); ++b) {
                cell[b] = samples[b](i, t);
            }
            std::sort(cell.begin(), cell.end());
            for (auto& [level, band] : bands) {
                band.lo(i, t) = quantile_sorted(cell, (1.0 - level / 100.0) / 2.0);
                band.hi(i, t) = quantile_sorted(cell, (1.0 + level / 100.0) / 2.0);
            }
        }
    }
    return bands;
}

double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, p);
}

ProbabilisticForecast normality_bands(const ReconciliationMap& map, const HierarchyStructure& structure,
                                      const Matrix& base_covariance, const Matrix& base_point,
                                      const std::vector<double>& levels, bool allow_experimental) {
    check_levels(levels);
    reject_top_down(map, "normality", allow_experimental);
    const Index n = structure.n();
    if (base_covariance.rows() != n || base_covariance.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, "base covariance must be n x n");
    }
    ProbabilisticForecast out;
    out.method = IntervalMethod::Normality;
    out.point_method = map.method;
    out.mean = reconcile_point(map, structure, base_point);
    const Index h = out.mean.cols();

    Matrix sd(n, h);
    auto reconciled_sd = [&](const Matrix& p) {
        const Matrix sp = structure.s() * p;  // n x n
        const Matrix spw = sp * base_covariance;
        return sp.cwiseProduct(spw).rowwise().sum().cwiseMax(0.0).cwiseSqrt().eval();
    };
    if (map.has_explicit_p()) {
        sd.colwise() = reconciled_sd(*map.p);
    } else {
        for (Index t = 0; t < h; ++t) {
            sd.col(t) = reconciled_sd(map.p_at(t));
        }
    }
    for (double level : levels) {
        const double z = level == 0.0 ? 0.0 : normal_quantile(0.5 + level / 200.0);
        out.bands.emplace(level, Band{out.mean - z * sd, out.mean + z * sd});
    }
    return out;
}

Matrix normality_covariance(const ReconciliationMap& map, const Matrix& complete_residuals) {
    const Index n = complete_residuals.rows();
    const Index k = complete_residuals.cols();
    if (k < 1) {
        throw Error(ErrorCode::NoResiduals, "normality intervals need at least one residual column");
    }
    const Vector sigma = (complete_residuals.array().square().rowwise().sum() / static_cast<double>(k)).sqrt();
    Matrix corr = Matrix::Identity(n, n);
    if (map.w && map.w->rows() == n) {
        const Vector d = map.w->diagonal();
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                if (i != j && d(i) > 0.0 && d(j) > 0.0) {
                    corr(i, j) = (*map.w)(i, j) / std::sqrt(d(i) * d(j));
                }
            }
        }
    }
    return sigma.asDiagonal() * corr * sigma.asDiagonal();
}

ProbabilisticForecast bootstrap_samples(const ReconciliationMap& map, const HierarchyStructure& structure,
                                        const Matrix& base_point, const Matrix& residuals,
                                        const std::vector<double>& levels, const SamplingOptions& options) {
    check_levels(levels);
    reject_top_down(map, "bootstrap", options.allow_experimental);
    const Index n = structure.n();
    if (residuals.rows() != n || base_point.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "residuals and base forecasts must have one row per series");
    }
    const Index k = residuals.cols();
    if (k < 1) {
        throw Error(ErrorCode::NoResiduals, "bootstrap needs at least one fully available residual column");
    }
    if (!residuals.allFinite()) {
        throw Error(ErrorCode::NonFiniteResiduals, "bootstrap residuals contain non-finite values");
    }
    if (options.samples < 1) {
        throw Error(ErrorCode::BadSpec, "bootstrap needs at least one sample");
    }
    if (options.block_len < 1) {
        throw Error(ErrorCode::BadSpec, "block length must be positive");
    }
    const Index h = base_point.cols();
    const Index block = std::min(options.block_len, k);

    ProbabilisticForecast out;
    out.method = IntervalMethod::Bootstrap;
    out.point_method = map.method;
    out.seed = options.seed;
    out.mean = reconcile_point(map, structure, base_point);
    out.samples.resize(static_cast<std::size_t>(options.samples));

    parallel_for(out.samples.size(), options.threads, [&](std::size_t b) {
        CounterRng rng(options.seed, CounterRng::kBootstrap ^ static_cast<std::uint64_t>(b));
        Matrix perturbed = base_point;
        for (Index start = 0; start < h; start += block) {
            const auto first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(k - block + 1)));
            for (Index j = 0; j < block && start + j < h; ++j) {
                perturbed.col(start + j) += residuals.col(first + j);
            }
        }
        out.samples[b] = reconcile_point(map, structure, perturbed);
    });
    out.bands = quantile_bands(out.samples, levels);
    return out;
}

std::vector<Index> stable_ranks(const Eigen::Ref<const Vector>& values) {
    const Index count = values.size();
    std::vector<Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values(a) < values(b); });
    std::vector<Index> rank(static_cast<std::size_t>(count));
    for (Index r = 0; r < count; ++r) {
        rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;
    }
    return rank;
}

ProbabilisticForecast permbu_samples(const ReconciliationMap& map, const HierarchyStructure& structure,
                                     const Matrix& base_point, const Matrix& residuals,
                                     const std::vector<double>& levels, const SamplingOptions& options,
                                     MarginalKind marginal) {
    check_levels(levels);
    const TreeLinks links = tree_links(structure);
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    if (residuals.rows() != n || base_point.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "residuals and base forecasts must have one row per series");
    }
    const Index k = residuals.cols();
    if (k < 1) {
        throw Error(ErrorCode::NoResiduals, "permbu needs at least one fully available residual column");
    }
    if (!residuals.allFinite()) {
        throw Error(ErrorCode::NonFiniteResiduals, "permbu residuals contain non-finite values");
    }
    const Index draws = options.samples;
    if (draws < 1) {
        throw Error(ErrorCode::BadSpec, "permbu needs at least one sample");
    }
    const Index h = base_point.cols();

    ProbabilisticForecast out;
    out.method = IntervalMethod::Permbu;
    out.point_method = map.method;
    out.seed = options.seed;
    out.mean = reconcile_point(map, structure, base_point);

    // Copula: B residual columns, without replacement when there are enough.
    std::vector<Index> columns(static_cast<std::size_t>(draws));
    {
        CounterRng rng(options.seed, CounterRng::kPermbuCopula);
        if (draws <= k) {
            std::vector<Index> pool(static_cast<std::size_t>(k));
            std::iota(pool.begin(), pool.end(), Index{0});
            for (Index s = 0; s < draws; ++s) {
                const auto pick = s + static_cast<Index>(rng.below(static_cast<std::uint64_t>(k - s)));
                std::swap(pool[static_cast<std::size_t>(s)], pool[static_cast<std::size_t>(pick)]);
            }
            std::copy(pool.begin(), pool.begin() + draws, columns.begin());
        } else {
            for (auto& c : columns) {
                c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(k)));
            }
        }
    }
    std::vector<std::vector<Index>> ranks(static_cast<std::size_t>(n));
    {
        Vector row(draws);
        for (Index i = 0; i < n; ++i) {
            for (Index s = 0; s < draws; ++s) {
                row(s) = residuals(i, columns[static_cast<std::size_t>(s)]);
            }
            ranks[static_cast<std::size_t>(i)] = stable_ranks(row);
        }
    }

    // Rows in each node's subtree (the node included).
    std::vector<std::vector<Index>> subtree(static_cast<std::size_t>(n));
    for (Index node : links.bottom_up_order) {
        auto& rows = subtree[static_cast<std::size_t>(node)];
        rows.push_back(node);
        for (Index c : links.children[static_cast<std::size_t>(node)]) {
            const auto& sub = subtree[static_cast<std::size_t>(c)];
            rows.insert(rows.end(), sub.begin(), sub.end());
        }
    }

    Vector sigma(nb);
    for (Index b = 0; b < nb; ++b) {
        sigma(b) = std::sqrt(residuals.row(n - nb + b).squaredNorm() / static_cast<double>(k));
    }

    std::vector<Matrix> per_step(static_cast<std::size_t>(h));
    parallel_for(static_cast<std::size_t>(h), options.threads, [&](std::size_t step_idx) {
        const auto step = static_cast<Index>(step_idx);
        const Vector centre = (map.p_at(step) * base_point.col(step)).eval();
        Matrix x = Matrix::Zero(n, draws);
        for (Index b = 0; b < nb; ++b) {
            const Index row = n - nb + b;
            CounterRng rng(options.seed, CounterRng::kPermbuMarginal ^
                                             static_cast<std::uint64_t>(b * h + step));
            for (Index s = 0; s < draws; ++s) {
                if (marginal == MarginalKind::Gaussian) {
                    x(row, s) = centre(b) + sigma(b) * rng.normal();
                } else {
                    x(row, s) = centre(b) + residuals(row, static_cast<Index>(rng.below(static_cast<std::uint64_t>(k))));
                }
            }
        }

        std::vector<Index> order(static_cast<std::size_t>(draws));
        Matrix reordered;
        for (Index node : links.bottom_up_order) {
            const auto& kids = links.children[static_cast<std::size_t>(node)];
            if (kids.empty()) {
                continue;
            }
            for (Index c : kids) {
                std::iota(order.begin(), order.end(), Index{0});
                std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x(c, a) < x(c, b); });
                const auto& rank = ranks[static_cast<std::size_t>(c)];
                const auto& rows = subtree[static_cast<std::size_t>(c)];
                reordered.resize(static_cast<Index>(rows.size()), draws);
                for (Index s = 0; s < draws; ++s) {
                    const Index src = order[static_cast<std::size_t>(rank[static_cast<std::size_t>(s)])];
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        reordered(static_cast<Index>(r), s) = x(rows[r], src);
                    }
                }
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    x.row(rows[r]) = reordered.row(static_cast<Index>(r));
                }
            }
            x.row(node).setZero();
            for (Index c : kids) {
                x.row(node) += x.row(c);
            }
        }
        per_step[step_idx] = std::move(x);
    });

    out.samples.assign(static_cast<std::size_t>(draws), Matrix(n, h));
    for (Index step = 0; step < h; ++step) {
        const Matrix& x = per_step[static_cast<std::size_t>(step)];
        for (Index s = 0; s < draws; ++s) {
            out.samples[static_cast<std::size_t>(s)].col(step) = x.col(s);
        }
    }
    out.bands = quantile_bands(out.samples, levels);
    return out;
}

}  // namespace hierfc
