#include "hierfc/panel.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hierfc/csv.hpp"

namespace hierfc {

namespace {

std::optional<long long> as_integer(const std::string& s) {
    long long v = 0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || s.empty()) {
        return std::nullopt;
    }
    return v;
}

std::optional<std::chrono::year_month_day> as_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        return std::nullopt;
    }
    auto y = as_integer(s.substr(0, 4));
    auto m = as_integer(s.substr(5, 2));
    auto d = as_integer(s.substr(8, 2));
    if (!y || !m || !d) {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(*y)),
                                    std::chrono::month(static_cast<unsigned>(*m)),
                                    std::chrono::day(static_cast<unsigned>(*d))};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return ymd;
}

std::string format_date(const std::chrono::year_month_day& ymd) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

struct TimestampLess {
    bool operator()(const std::string& a, const std::string& b) const { return timestamp_less(a, b); }
};

}  // namespace

bool timestamp_less(const std::string& a, const std::string& b) {
    const auto ia = as_integer(a);
    const auto ib = as_integer(b);
    if (ia && ib) {
        return *ia < *ib;
    }
    return a < b;
}

SeriesPanel load_long(std::istream& in, const HierarchyStructure* structure, int frequency) {
    if (frequency < 1) {
        throw Error(ErrorCode::BadSpec, "frequency must be a positive integer");
    }
    std::string line;
    std::size_t line_no = 0;
    if (!csv::next_line(in, line, line_no)) {
        throw Error(ErrorCode::ParseError, "panel file is empty");
    }
    const auto header = csv::split_line(line);
    auto column = [&](std::string_view name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error(ErrorCode::ParseError, "panel header must contain unique_id,ds,y");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = column("unique_id");
    const std::size_t ds_col = column("ds");
    const std::size_t y_col = column("y");

    std::map<std::string, std::map<std::string, double, TimestampLess>> cells;
    while (csv::next_line(in, line, line_no)) {
        const auto fields = csv::split_line(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::ParseError, "panel row " + std::to_string(line_no) + " has " +
                                                   std::to_string(fields.size()) + " fields");
        }
        const auto& id = fields[id_col];
        if (structure != nullptr && !structure->index_of(id)) {
            throw Error(ErrorCode::UnknownSeries,
                        "panel row " + std::to_string(line_no) + ": series '" + id + "' is not in the hierarchy");
        }
        const auto& y_text = fields[y_col];
        if (y_text.empty() || y_text == "NA" || y_text == "nan" || y_text == "NaN") {
            throw Error(ErrorCode::RaggedPanel,
                        "panel row " + std::to_string(line_no) + ": missing value for '" + id + "'");
        }
        const double y = csv::parse_double(y_text, "panel row " + std::to_string(line_no));
        if (!std::isfinite(y)) {
            throw Error(ErrorCode::RaggedPanel,
                        "panel row " + std::to_string(line_no) + ": non-finite value for '" + id + "'");
        }
        if (!cells[id].emplace(fields[ds_col], y).second) {
            throw Error(ErrorCode::ParseError, "panel row " + std::to_string(line_no) + ": duplicate (" + id +
                                                   ", " + fields[ds_col] + ")");
        }
    }
    if (cells.empty()) {
        throw Error(ErrorCode::ParseError, "panel file has no observations");
    }

    SeriesPanel panel;
    panel.frequency = frequency;
    if (structure != nullptr) {
        for (const auto& id : structure->series_ids()) {
            if (!cells.contains(id)) {
                throw Error(ErrorCode::RaggedPanel, "series '" + id + "' has no observations");
            }
        }
        panel.series_ids = structure->series_ids();
    } else {
        for (const auto& [id, obs] : cells) {
            panel.series_ids.push_back(id);
        }
    }

    const auto& reference = cells.at(panel.series_ids.front());
    for (const auto& [ds, y] : reference) {
        panel.timestamps.push_back(ds);
    }
    if (panel.timestamps.size() < 2) {
        throw Error(ErrorCode::TooShort, "panel needs at least 2 timestamps");
    }
    const auto n = static_cast<Index>(panel.series_ids.size());
    const auto t = static_cast<Index>(panel.timestamps.size());
    panel.values.resize(n, t);
    for (Index i = 0; i < n; ++i) {
        const auto& id = panel.series_ids[static_cast<std::size_t>(i)];
        const auto& obs = cells.at(id);
        if (obs.size() != reference.size()) {
            throw Error(ErrorCode::RaggedPanel, "series '" + id + "' has " + std::to_string(obs.size()) +
                                                    " timestamps, expected " + std::to_string(reference.size()));
        }
        Index col = 0;
        for (const auto& [ds, y] : obs) {
            if (ds != panel.timestamps[static_cast<std::size_t>(col)]) {
                throw Error(ErrorCode::RaggedPanel, "series '" + id + "' has timestamp '" + ds +
                                                        "' not shared by '" + panel.series_ids.front() + "'");
            }
            panel.values(i, col++) = y;
        }
    }
    return panel;
}

SeriesPanel load_long_file(const std::string& path, const HierarchyStructure* structure, int frequency) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ParseError, "cannot open panel file '" + path + "'");
    }
    try {
        return load_long(in, structure, frequency);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + std::string(e.what()).substr(to_string(e.code()).size() + 2));
    }
}

void write_long(std::ostream& out, const SeriesPanel& panel) {
    out << "unique_id,ds,y\n";
    for (Index i = 0; i < panel.n(); ++i) {
        const auto id = csv::escape(panel.series_ids[static_cast<std::size_t>(i)]);
        for (Index t = 0; t < panel.periods(); ++t) {
            out << id << ',' << csv::escape(panel.timestamps[static_cast<std::size_t>(t)]) << ','
                << csv::format_double(panel.values(i, t)) << '\n';
        }
    }
}

std::pair<SeriesPanel, SeriesPanel> split_holdout(const SeriesPanel& panel, Index h) {
    if (h < 1) {
        throw Error(ErrorCode::HorizonTooLarge, "holdout horizon must be positive");
    }
    const Index t = panel.periods();
    if (h >= t) {
        throw Error(ErrorCode::HorizonTooLarge,
                    "holdout of " + std::to_string(h) + " leaves no training data from " + std::to_string(t) + " periods");
    }
    SeriesPanel train = panel;
    SeriesPanel test = panel;
    train.values = panel.values.leftCols(t - h);
    test.values = panel.values.rightCols(h);
    train.timestamps.assign(panel.timestamps.begin(), panel.timestamps.end() - h);
    test.timestamps.assign(panel.timestamps.end() - h, panel.timestamps.end());
    return {std::move(train), std::move(test)};
}

std::vector<std::string> future_labels(const std::vector<std::string>& timestamps, Index h) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(h));
    if (timestamps.size() >= 2) {
        const auto& a = timestamps[timestamps.size() - 2];
        const auto& b = timestamps.back();
        if (auto ia = as_integer(a), ib = as_integer(b); ia && ib) {
            for (Index k = 1; k <= h; ++k) {
                out.push_back(std::to_string(*ib + k * (*ib - *ia)));
            }
            return out;
        }
        if (auto da = as_date(a), db = as_date(b); da && db) {
            using namespace std::chrono;
            const int months = (static_cast<int>(db->year()) - static_cast<int>(da->year())) * 12 +
                               (static_cast<int>(static_cast<unsigned>(db->month())) -
                                static_cast<int>(static_cast<unsigned>(da->month())));
            if (da->day() == db->day() && months > 0) {
                for (Index k = 1; k <= h; ++k) {
                    year_month_day next = *db + std::chrono::months(months * k);
                    if (!next.ok()) {
                        next = year_month_day_last(next.year(), month_day_last(next.month()));
                    }
                    out.push_back(format_date(next));
                }
                return out;
            }
            const auto step = sys_days(*db) - sys_days(*da);
            if (step.count() > 0) {
                for (Index k = 1; k <= h; ++k) {
                    out.push_back(format_date(year_month_day(sys_days(*db) + step * k)));
                }
                return out;
            }
        }
    }
    for (Index k = 1; k <= h; ++k) {
        out.push_back("+" + std::to_string(k));
    }
    return out;
}

std::string level_label(double level) { return csv::format_double(level); }

void write_forecasts(std::ostream& out, const std::vector<std::pair<std::string, ForecastFrame>>& frames) {
    std::set<double> levels;
    for (const auto& [method, frame] : frames) {
        for (const auto& [level, band] : frame.bands) {
            levels.insert(level);
        }
    }
    out << "unique_id,ds,method,mean";
    for (double level : levels) {
        out << ",lo-" << level_label(level) << ",hi-" << level_label(level);
    }
    out << '\n';
    for (const auto& [method, frame] : frames) {
        const auto m = csv::escape(method);
        for (Index i = 0; i < frame.n(); ++i) {
            const auto id = csv::escape(frame.series_ids[static_cast<std::size_t>(i)]);
            for (Index t = 0; t < frame.horizon(); ++t) {
                out << id << ',' << csv::escape(frame.horizon_labels[static_cast<std::size_t>(t)]) << ',' << m
                    << ',' << csv::format_double(frame.point(i, t));
                for (double level : levels) {
                    const auto it = frame.bands.find(level);
                    if (it == frame.bands.end()) {
                        out << ",,";
                    } else {
                        out << ',' << csv::format_double(it->second.lo(i, t)) << ','
                            << csv::format_double(it->second.hi(i, t));
                    }
                }
                out << '\n';
            }
        }
    }
}

std::vector<std::pair<std::string, ForecastFrame>> read_forecasts(std::istream& in,
                                                                  const HierarchyStructure* structure) {
    std::string line;
    std::size_t line_no = 0;
    if (!csv::next_line(in, line, line_no)) {
        throw Error(ErrorCode::ParseError, "forecast file is empty");
    }
    const auto header = csv::split_line(line);
    if (header.size() < 4 || header[0] != "unique_id" || header[1] != "ds" || header[2] != "method" ||
        header[3] != "mean") {
        throw Error(ErrorCode::ParseError, "forecast header must start with unique_id,ds,method,mean");
    }
    std::vector<double> levels;
    for (std::size_t c = 4; c < header.size(); c += 2) {
        if (c + 1 >= header.size() || header[c].rfind("lo-", 0) != 0 || header[c + 1].rfind("hi-", 0) != 0 ||
            header[c].substr(3) != header[c + 1].substr(3)) {
            throw Error(ErrorCode::ParseError, "forecast header band columns must come in lo-L,hi-L pairs");
        }
        levels.push_back(csv::parse_double(header[c].substr(3), "forecast header"));
    }

    struct Cell {
        double mean;
        std::vector<std::optional<std::pair<double, double>>> bands;
    };
    std::vector<std::string> method_order;
    std::map<std::string, std::map<std::string, std::map<std::string, Cell, TimestampLess>>> data;
    std::vector<std::string> id_order;
    std::set<std::string> ids_seen;
    while (csv::next_line(in, line, line_no)) {
        const auto f = csv::split_line(line);
        const auto where = "forecast row " + std::to_string(line_no);
        if (f.size() != header.size()) {
            throw Error(ErrorCode::ParseError, where + " has " + std::to_string(f.size()) + " fields");
        }
        if (structure != nullptr && !structure->index_of(f[0])) {
            throw Error(ErrorCode::UnknownSeries, where + ": series '" + f[0] + "' is not in the hierarchy");
        }
        if (!data.contains(f[2])) {
            method_order.push_back(f[2]);
        }
        if (ids_seen.insert(f[0]).second) {
            id_order.push_back(f[0]);
        }
        Cell cell{csv::parse_double(f[3], where), {}};
        for (std::size_t k = 0; k < levels.size(); ++k) {
            const auto& lo = f[4 + 2 * k];
            const auto& hi = f[5 + 2 * k];
            if (lo.empty() && hi.empty()) {
                cell.bands.emplace_back(std::nullopt);
            } else {
                cell.bands.emplace_back(std::pair{csv::parse_double(lo, where), csv::parse_double(hi, where)});
            }
        }
        if (!data[f[2]][f[0]].emplace(f[1], std::move(cell)).second) {
            throw Error(ErrorCode::ParseError, where + ": duplicate row for (" + f[0] + ", " + f[1] + ", " + f[2] + ")");
        }
    }

    std::vector<std::pair<std::string, ForecastFrame>> out;
    for (const auto& method : method_order) {
        const auto& by_id = data.at(method);
        ForecastFrame frame;
        frame.series_ids = structure != nullptr ? structure->series_ids() : id_order;
        for (const auto& id : frame.series_ids) {
            if (!by_id.contains(id)) {
                throw Error(ErrorCode::ShapeMismatch, "method '" + method + "' has no rows for series '" + id + "'");
            }
        }
        const auto& first = by_id.at(frame.series_ids.front());
        for (const auto& [ds, cell] : first) {
            frame.horizon_labels.push_back(ds);
        }
        const auto n = static_cast<Index>(frame.series_ids.size());
        const auto h = static_cast<Index>(frame.horizon_labels.size());
        frame.point.resize(n, h);
        std::vector<bool> has_level(levels.size(), true);
        std::vector<Band> bands(levels.size(), Band{Matrix(n, h), Matrix(n, h)});
        for (Index i = 0; i < n; ++i) {
            const auto& id = frame.series_ids[static_cast<std::size_t>(i)];
            const auto& cells = by_id.at(id);
            if (cells.size() != frame.horizon_labels.size()) {
                throw Error(ErrorCode::ShapeMismatch, "method '" + method + "', series '" + id +
                                                          "' has a different number of periods");
            }
            Index t = 0;
            for (const auto& [ds, cell] : cells) {
                if (ds != frame.horizon_labels[static_cast<std::size_t>(t)]) {
                    throw Error(ErrorCode::ShapeMismatch, "method '" + method + "', series '" + id +
                                                              "' has period '" + ds + "' not shared by other series");
                }
                frame.point(i, t) = cell.mean;
                for (std::size_t k = 0; k < levels.size(); ++k) {
                    if (cell.bands[k]) {
                        bands[k].lo(i, t) = cell.bands[k]->first;
                        bands[k].hi(i, t) = cell.bands[k]->second;
                    } else {
                        has_level[k] = false;
                    }
                }
                ++t;
            }
        }
        for (std::size_t k = 0; k < levels.size(); ++k) {
            if (has_level[k]) {
                frame.bands.emplace(levels[k], std::move(bands[k]));
            }
        }
        out.emplace_back(method, std::move(frame));
    }
    return out;
}

}  // namespace hierfc
