#include "hierfc/synth.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <set>
#include <cmath>
#include <istream>
#include <numbers>

#include "json.hpp"

#include "hierfc/rng.hpp"

namespace hierfc {

namespace {

void validate(const ScenarioSpec& spec) {
    for (int c : spec.children) {
        if (c < 1) {
            throw Error(ErrorCode::BadSpec, "children per depth must be positive");
        }
    }
    for (int g : spec.groups) {
        if (g < 1) {
            throw Error(ErrorCode::BadSpec, "group sizes must be positive");
        }
    }
    if (spec.groups.size() > 16) {
        throw Error(ErrorCode::BadSpec, "at most 16 group dimensions");
    }
    if (spec.periods < 2 || spec.horizon < 1 || spec.season < 1) {
        throw Error(ErrorCode::BadSpec, "periods >= 2, horizon >= 1 and season >= 1 are required");
    }
    if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
        throw Error(ErrorCode::BadSpec, "sigma must be non-negative");
    }
}

struct Layout {
    std::vector<Index> nodes_per_depth;  // depth 0 has 1 node
    std::vector<Index> leaves_below;     // leaves under one node at each depth
    Index depth = 0;

    explicit Layout(const std::vector<int>& children) {
        depth = static_cast<Index>(children.size());
        nodes_per_depth.push_back(1);
        for (int c : children) {
            nodes_per_depth.push_back(nodes_per_depth.back() * c);
        }
        leaves_below.assign(static_cast<std::size_t>(depth + 1), 1);
        for (Index d = depth - 1; d >= 0; --d) {
            leaves_below[static_cast<std::size_t>(d)] =
                leaves_below[static_cast<std::size_t>(d + 1)] * children[static_cast<std::size_t>(d)];
        }
    }
};

std::string node_id(const std::vector<int>& children, Index depth, Index node) {
    std::vector<Index> path;
    for (Index d = depth; d > 0; --d) {
        const int fan = children[static_cast<std::size_t>(d - 1)];
        path.push_back(node % fan);
        node /= fan;
    }
    std::string id = "T";
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        id += "/" + std::to_string(*it);
    }
    return id;
}

char dim_letter(std::size_t d) { return static_cast<char>('a' + d); }

struct SeriesKey {
    Index depth;
    Index node;
    std::vector<int> combo;  // -1 = all categories
};

}  // namespace

HierarchyStructure scenario_structure(const ScenarioSpec& spec) {
    validate(spec);
    const Layout layout(spec.children);
    const std::size_t dims = spec.groups.size();
    const unsigned full_mask = (1u << dims) - 1u;

    struct LevelKey {
        unsigned mask;
        Index depth;
    };
    std::vector<LevelKey> levels;
    for (unsigned mask = 0; mask <= full_mask; ++mask) {
        for (Index d = 0; d <= layout.depth; ++d) {
            levels.push_back({mask, d});
        }
    }
    std::stable_sort(levels.begin(), levels.end(), [](const LevelKey& a, const LevelKey& b) {
        const int pa = std::popcount(a.mask);
        const int pb = std::popcount(b.mask);
        if (pa != pb) {
            return pa < pb;
        }
        if (a.mask != b.mask) {
            return a.mask < b.mask;
        }
        return a.depth < b.depth;
    });
    Tags tags;
    std::vector<SeriesKey> keys;
    for (const auto& lv : levels) {
        std::string name = lv.depth == 0 ? "total" : "depth" + std::to_string(lv.depth);
        for (std::size_t d = 0; d < dims; ++d) {
            if (lv.mask & (1u << d)) {
                name += "/";
                name += dim_letter(d);
            }
        }
        std::vector<std::string> ids;
        // all category combinations for the dims in the mask
        std::vector<int> combo(dims, -1);
        std::vector<std::vector<int>> combos;
        std::function<void(std::size_t)> enumerate = [&](std::size_t d) {
            if (d == dims) {
                combos.push_back(combo);
                return;
            }
            if (lv.mask & (1u << d)) {
                for (int c = 0; c < spec.groups[d]; ++c) {
                    combo[d] = c;
                    enumerate(d + 1);
                }
                combo[d] = -1;
            } else {
                enumerate(d + 1);
            }
        };
        enumerate(0);
        for (Index node = 0; node < layout.nodes_per_depth[static_cast<std::size_t>(lv.depth)]; ++node) {
            for (const auto& c : combos) {
                std::string id = node_id(spec.children, lv.depth, node);
                for (std::size_t d = 0; d < dims; ++d) {
                    if (c[d] >= 0) {
                        id += "/";
                        id += dim_letter(d);
                        id += std::to_string(c[d]);
                    }
                }
                ids.push_back(id);
                keys.push_back({lv.depth, node, c});
            }
        }
        tags.emplace_back(std::move(name), std::move(ids));
    }
    // With neither tree nor groups, the total is the only series.
    if (tags.size() == 1) {
        const auto& only = tags.front().second;
        Matrix s = Matrix::Ones(1, 1);
        return HierarchyStructure::from_matrix(only, only, s, tags);
    }

    const auto& bottom_ids = tags.back().second;
    const std::size_t first_bottom = keys.size() - bottom_ids.size();
    Matrix s = Matrix::Zero(static_cast<Index>(keys.size()), static_cast<Index>(bottom_ids.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto& key = keys[i];
        const Index span = layout.leaves_below[static_cast<std::size_t>(key.depth)];
        for (std::size_t b = 0; b < bottom_ids.size(); ++b) {
            const auto& leaf = keys[first_bottom + b];
            if (leaf.node / span != key.node) {
                continue;
            }
            bool match = true;
            for (std::size_t d = 0; d < dims && match; ++d) {
                match = key.combo[d] < 0 || key.combo[d] == leaf.combo[d];
            }
            if (match) {
                s(static_cast<Index>(i), static_cast<Index>(b)) = 1.0;
            }
        }
    }
    std::vector<std::string> all_ids;
    for (const auto& [level, ids] : tags) {
        all_ids.insert(all_ids.end(), ids.begin(), ids.end());
    }
    return HierarchyStructure::from_matrix(all_ids, bottom_ids, s, tags);
}

Scenario generate(const ScenarioSpec& spec) {
    HierarchyStructure structure = scenario_structure(spec);
    const Index nb = structure.n_bottom();
    const double lower = nb > 1 ? -1.0 / static_cast<double>(nb - 1) : -1.0;
    if (!(spec.rho >= lower - 1e-15 && spec.rho <= 1.0)) {
        throw Error(ErrorCode::BadCorrelation, "rho must lie in [" + std::to_string(lower) + ", 1] for " +
                                                   std::to_string(nb) + " bottom series");
    }
    const Index total = spec.periods + spec.horizon;

    // Equicorrelated unit-variance noise. For rho >= 0 a common factor:
    // sqrt(rho) z_t + sqrt(1 - rho) e_bt. For rho < 0 the cross-sectional mean
    // of the idiosyncratic draws is used instead:
    // a e_bt + g mean_b(e_bt) with a = sqrt(1 - rho), g = -a + sqrt(a^2 + nb rho).
    Matrix noise(nb, total);
    std::vector<CounterRng> idio;
    for (Index b = 0; b < nb; ++b) {
        idio.emplace_back(spec.seed, CounterRng::kSynth ^ (0x1000ULL + static_cast<std::uint64_t>(b)));
    }
    CounterRng common(spec.seed, CounterRng::kSynth ^ 0x2ULL);
    for (Index t = 0; t < total; ++t) {
        for (Index b = 0; b < nb; ++b) {
            noise(b, t) = idio[static_cast<std::size_t>(b)].normal();
        }
        if (spec.rho >= 0.0) {
            const double z = common.normal();
            noise.col(t) = std::sqrt(spec.rho) * Vector::Constant(nb, z) + std::sqrt(1.0 - spec.rho) * noise.col(t);
        } else {
            const double a = std::sqrt(1.0 - spec.rho);
            const double g = -a + std::sqrt(std::max(0.0, a * a + static_cast<double>(nb) * spec.rho));
            const double mean = noise.col(t).mean();
            noise.col(t) = a * noise.col(t) + Vector::Constant(nb, g * mean);
        }
    }

    CounterRng params(spec.seed, CounterRng::kSynth ^ 0x1ULL);
    Matrix bottom(nb, total);
    for (Index b = 0; b < nb; ++b) {
        const double base = spec.level * (0.5 + params.uniform());
        const double slope = spec.trend * (0.5 + params.uniform());
        const double amplitude = spec.seasonal * (0.5 + params.uniform());
        const double phase = 2.0 * std::numbers::pi * params.uniform();
        for (Index t = 0; t < total; ++t) {
            const double season = amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                                                           static_cast<double>(spec.season) + phase);
            bottom(b, t) = base + slope * static_cast<double>(t) + season + spec.sigma * noise(b, t);
        }
    }

    SeriesPanel panel;
    panel.values = structure.s() * bottom;
    panel.series_ids = structure.series_ids();
    panel.frequency = spec.season;
    for (Index t = 1; t <= total; ++t) {
        panel.timestamps.push_back(std::to_string(t));
    }
    return {std::move(structure), std::move(panel)};
}

ScenarioSpec ScenarioSpec::from_json(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("scenario spec: ") + e.what());
    }
    if (!doc.is_object()) {
        throw Error(ErrorCode::ParseError, "scenario spec must be a JSON object");
    }
    static const std::set<std::string> known = {"children", "groups", "periods", "horizon", "season", "sigma",
                                                "rho",      "level",  "trend",   "seasonal", "seed"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) {
            throw Error(ErrorCode::ParseError, "scenario spec: unknown field '" + key + "'");
        }
    }
    ScenarioSpec spec;
    try {
        spec.children = doc.value("children", spec.children);
        spec.groups = doc.value("groups", spec.groups);
        spec.periods = doc.value("periods", spec.periods);
        spec.horizon = doc.value("horizon", spec.horizon);
        spec.season = doc.value("season", spec.season);
        spec.sigma = doc.value("sigma", spec.sigma);
        spec.rho = doc.value("rho", spec.rho);
        spec.level = doc.value("level", spec.level);
        spec.trend = doc.value("trend", spec.trend);
        spec.seasonal = doc.value("seasonal", spec.seasonal);
        spec.seed = doc.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("scenario spec: ") + e.what());
    }
    return spec;
}

std::string ScenarioSpec::to_json() const {
    nlohmann::ordered_json doc;
    doc["children"] = children;
    doc["groups"] = groups;
    doc["periods"] = periods;
    doc["horizon"] = horizon;
    doc["season"] = season;
    doc["sigma"] = sigma;
    doc["rho"] = rho;
    doc["level"] = level;
    doc["trend"] = trend;
    doc["seasonal"] = seasonal;
    doc["seed"] = seed;
    return doc.dump(2);
}

}  // namespace hierfc
