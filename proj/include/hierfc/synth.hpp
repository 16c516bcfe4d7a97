#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hierfc/hierarchy.hpp"
#include "hierfc/panel.hpp"

namespace hierfc {

/**
 * Synthetic hierarchical scenario.
 *
 * `children` gives the fan-out per tree depth below the total (empty for no
 * tree); `groups` gives the category count of each crossed grouping
 * dimension. Every series is a (tree node, category-or-all per group) pair,
 * so any non-empty `groups` yields a grouped structure.
 */
struct ScenarioSpec {
    std::vector<int> children;
    std::vector<int> groups;
    int periods = 48;        // T
    int horizon = 12;        // h
    int season = 12;         // m
    double sigma = 1.0;      // bottom noise scale
    double rho = 0.0;        // bottom noise equicorrelation
    double level = 100.0;    // mean bottom level
    double trend = 0.0;      // mean bottom slope per period
    double seasonal = 0.0;   // bottom seasonal amplitude
    std::uint64_t seed = 0;

    static ScenarioSpec from_json(std::istream& in);
    std::string to_json() const;
};

struct Scenario {
    HierarchyStructure structure;
    SeriesPanel panel;  // T + h columns, integer timestamps 1..T+h
};

/// Deterministic per seed. Aggregates are exactly S * bottom.
Scenario generate(const ScenarioSpec& spec);

/// Tags and memberships of the scenario's hierarchy without any data.
HierarchyStructure scenario_structure(const ScenarioSpec& spec);

}  // namespace hierfc
