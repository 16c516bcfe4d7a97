#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hierfc/hierarchy.hpp"

namespace hierfc {

/// Rectangular history: one row per series, one column per period.
struct SeriesPanel {
    Matrix values;                        // n x T
    std::vector<std::string> timestamps;  // T labels, strictly increasing
    std::vector<std::string> series_ids;  // n ids
    int frequency = 1;                    // seasonal period m

    Index n() const noexcept { return values.rows(); }
    Index periods() const noexcept { return values.cols(); }
};

struct Band {
    Matrix lo;
    Matrix hi;
};

/// Point forecasts over a horizon with optional prediction bands keyed by
/// coverage level in (0, 100).
struct ForecastFrame {
    Matrix point;                             // n x h
    std::vector<std::string> horizon_labels;  // h labels
    std::vector<std::string> series_ids;
    std::map<double, Band> bands;

    Index n() const noexcept { return point.rows(); }
    Index horizon() const noexcept { return point.cols(); }
};

/// Orders timestamp labels: integers numerically, anything else as text.
bool timestamp_less(const std::string& a, const std::string& b);

/**
 * Reads a long-format `unique_id,ds,y` file into a rectangular panel.
 * With a structure, rows follow its series order and unknown ids are
 * rejected; otherwise rows are in lexicographic id order.
 */
SeriesPanel load_long(std::istream& in, const HierarchyStructure* structure = nullptr, int frequency = 1);
SeriesPanel load_long_file(const std::string& path, const HierarchyStructure* structure = nullptr,
                           int frequency = 1);

void write_long(std::ostream& out, const SeriesPanel& panel);

/// Train keeps the first T - h columns, test the last h.
std::pair<SeriesPanel, SeriesPanel> split_holdout(const SeriesPanel& panel, Index h);

/// Labels for the h periods after the panel: integer labels continue with the
/// last step, YYYY-MM-DD labels continue by month or by day, anything else
/// becomes "+1", "+2", ...
std::vector<std::string> future_labels(const std::vector<std::string>& timestamps, Index h);

/// Formats a band level the way it appears in column names (80, 97.5).
std::string level_label(double level);

/// Forecast output: `unique_id,ds,method,mean[,lo-L,hi-L...]`, one block per
/// method. Band columns appear when any frame carries bands.
void write_forecasts(std::ostream& out, const std::vector<std::pair<std::string, ForecastFrame>>& frames);

/// Reads a forecast file back, one frame per method in first-seen order.
/// Series follow the structure when given, otherwise first-seen order.
std::vector<std::pair<std::string, ForecastFrame>> read_forecasts(std::istream& in,
                                                                  const HierarchyStructure* structure = nullptr);

}  // namespace hierfc
