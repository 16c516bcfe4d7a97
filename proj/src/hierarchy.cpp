#include "hierfc/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hierfc/csv.hpp"

namespace hierfc {

std::string_view to_string(StructureKind kind) noexcept {
    return kind == StructureKind::StrictTree ? "strict_tree" : "grouped";
}

HierarchyStructure HierarchyStructure::from_matrix(const std::vector<std::string>& series_ids,
                                                   const std::vector<std::string>& bottom_ids,
                                                   const Matrix& s, const Tags& tags) {
    if (s.rows() != static_cast<Index>(series_ids.size()) ||
        s.cols() != static_cast<Index>(bottom_ids.size())) {
        throw Error(ErrorCode::ShapeMismatch, "S is " + std::to_string(s.rows()) + "x" +
                                                  std::to_string(s.cols()) + " but " +
                                                  std::to_string(series_ids.size()) + " series and " +
                                                  std::to_string(bottom_ids.size()) + " bottom ids were given");
    }
    if (bottom_ids.empty()) {
        throw Error(ErrorCode::InvalidStructure, "no bottom series");
    }
    if (tags.empty()) {
        throw Error(ErrorCode::InvalidStructure, "no tag levels");
    }

    std::unordered_map<std::string, Index> source_row;
    for (std::size_t i = 0; i < series_ids.size(); ++i) {
        if (!source_row.emplace(series_ids[i], static_cast<Index>(i)).second) {
            throw Error(ErrorCode::DuplicateSeries, "series '" + series_ids[i] + "' appears twice in S");
        }
    }
    std::unordered_map<std::string, Index> source_col;
    for (std::size_t j = 0; j < bottom_ids.size(); ++j) {
        if (!source_col.emplace(bottom_ids[j], static_cast<Index>(j)).second) {
            throw Error(ErrorCode::DuplicateSeries, "bottom column '" + bottom_ids[j] + "' appears twice");
        }
    }

    HierarchyStructure out;
    out.tags_ = tags;
    for (const auto& [level, ids] : tags) {
        if (ids.empty()) {
            throw Error(ErrorCode::InvalidStructure, "tag level '" + level + "' is empty");
        }
        for (const auto& id : ids) {
            if (!source_row.contains(id)) {
                throw Error(ErrorCode::UnknownSeries, "tag level '" + level + "' names unknown series '" + id + "'");
            }
            if (!out.index_.emplace(id, static_cast<Index>(out.series_ids_.size())).second) {
                throw Error(ErrorCode::DuplicateSeries, "series '" + id + "' appears in more than one tag level");
            }
            out.series_ids_.push_back(id);
        }
    }
    if (out.series_ids_.size() != series_ids.size()) {
        for (const auto& id : series_ids) {
            if (!out.index_.contains(id)) {
                throw Error(ErrorCode::InvalidStructure, "series '" + id + "' is not in any tag level");
            }
        }
    }

    const auto& bottom_level = tags.back().second;
    if (bottom_level.size() != bottom_ids.size()) {
        throw Error(ErrorCode::InvalidStructure, "bottom level '" + tags.back().first + "' has " +
                                                     std::to_string(bottom_level.size()) + " series but S has " +
                                                     std::to_string(bottom_ids.size()) + " columns");
    }
    for (const auto& id : bottom_level) {
        if (!source_col.contains(id)) {
            throw Error(ErrorCode::InvalidStructure, "bottom series '" + id + "' has no column in S");
        }
    }
    out.bottom_ids_ = bottom_level;

    const Index n = s.rows();
    const Index nb = s.cols();
    out.s_.resize(n, nb);
    for (Index i = 0; i < n; ++i) {
        const Index src_i = source_row.at(out.series_ids_[i]);
        for (Index j = 0; j < nb; ++j) {
            out.s_(i, j) = s(src_i, source_col.at(out.bottom_ids_[j]));
        }
    }

    for (Index i = 0; i < n; ++i) {
        bool any = false;
        for (Index j = 0; j < nb; ++j) {
            const double v = out.s_(i, j);
            if (v != 0.0 && v != 1.0) {
                throw Error(ErrorCode::InvalidStructure, "S entry for '" + out.series_ids_[i] + "' is not 0 or 1");
            }
            any = any || v == 1.0;
        }
        if (!any) {
            throw Error(ErrorCode::EmptySupport, "series '" + out.series_ids_[i] + "' aggregates nothing");
        }
    }
    if ((out.s_.row(0).array() != 1.0).any()) {
        throw Error(ErrorCode::TopRowNotTotal, "first series '" + out.series_ids_[0] + "' is not the total");
    }
    if (!out.s_.bottomRows(nb).isIdentity(0.0)) {
        throw Error(ErrorCode::InvalidStructure, "bottom rows of S are not the identity");
    }
    return out;
}

std::optional<Index> HierarchyStructure::index_of(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

Index HierarchyStructure::require_index(std::string_view id) const {
    if (auto i = index_of(id)) {
        return *i;
    }
    throw Error(ErrorCode::UnknownSeries, "series '" + std::string(id) + "' is not in the hierarchy");
}

bool HierarchyStructure::has_level(std::string_view level) const {
    return std::any_of(tags_.begin(), tags_.end(), [&](const auto& t) { return t.first == level; });
}

std::vector<Index> HierarchyStructure::level_rows(std::string_view level) const {
    for (const auto& [name, ids] : tags_) {
        if (name == level) {
            std::vector<Index> rows;
            rows.reserve(ids.size());
            for (const auto& id : ids) {
                rows.push_back(index_.at(id));
            }
            return rows;
        }
    }
    throw Error(ErrorCode::UnknownLevel, "no level named '" + std::string(level) + "'");
}

std::vector<Index> HierarchyStructure::support(Index row) const {
    std::vector<Index> cols;
    for (Index j = 0; j < s_.cols(); ++j) {
        if (s_(row, j) != 0.0) {
            cols.push_back(j);
        }
    }
    return cols;
}

HierarchyStructure build_structure(const Tags& tags, const Memberships& memberships) {
    if (tags.empty()) {
        throw Error(ErrorCode::InvalidStructure, "no tag levels");
    }
    std::vector<std::string> series;
    std::set<std::string> seen;
    for (const auto& [level, ids] : tags) {
        for (const auto& id : ids) {
            if (!seen.insert(id).second) {
                throw Error(ErrorCode::DuplicateSeries, "series '" + id + "' is declared twice");
            }
            series.push_back(id);
        }
    }
    const auto& bottom = tags.back().second;
    if (bottom.empty()) {
        throw Error(ErrorCode::InvalidStructure, "bottom level is empty");
    }
    std::unordered_map<std::string, Index> bottom_col;
    for (std::size_t j = 0; j < bottom.size(); ++j) {
        bottom_col.emplace(bottom[j], static_cast<Index>(j));
    }
    for (const auto& id : bottom) {
        const auto it = memberships.find(id);
        if (it != memberships.end() && !(it->second.size() == 1 && it->second.front() == id)) {
            throw Error(ErrorCode::InvalidStructure, "bottom series '" + id + "' must aggregate only itself");
        }
    }
    for (const auto& [id, members] : memberships) {
        if (!seen.contains(id)) {
            throw Error(ErrorCode::UnknownSeries, "membership given for undeclared series '" + id + "'");
        }
    }

    const Index nb = static_cast<Index>(bottom.size());
    std::unordered_map<std::string, Eigen::RowVectorXd> memo;
    std::set<std::string> visiting;
    std::function<Eigen::RowVectorXd(const std::string&)> expand = [&](const std::string& id) {
        if (auto b = bottom_col.find(id); b != bottom_col.end()) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nb);
            row(b->second) = 1.0;
            return row;
        }
        if (auto m = memo.find(id); m != memo.end()) {
            return m->second;
        }
        if (!seen.contains(id)) {
            throw Error(ErrorCode::UnknownSeries, "membership refers to undeclared series '" + id + "'");
        }
        const auto it = memberships.find(id);
        if (it == memberships.end() || it->second.empty()) {
            throw Error(ErrorCode::EmptySupport, "aggregate '" + id + "' has no members");
        }
        if (!visiting.insert(id).second) {
            throw Error(ErrorCode::InvalidStructure, "membership cycle through '" + id + "'");
        }
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nb);
        for (const auto& member : it->second) {
            row = row.cwiseMax(expand(member));
        }
        visiting.erase(id);
        memo.emplace(id, row);
        return row;
    };

    Matrix s(static_cast<Index>(series.size()), nb);
    for (std::size_t i = 0; i < series.size(); ++i) {
        s.row(static_cast<Index>(i)) = expand(series[i]);
    }
    return HierarchyStructure::from_matrix(series, bottom, s, tags);
}

StructureKind classify(const HierarchyStructure& structure) {
    const Matrix& s = structure.s();
    const Matrix overlap = s * s.transpose();
    const Vector sizes = structure.row_sums();
    for (Index i = 0; i < s.rows(); ++i) {
        for (Index j = i + 1; j < s.rows(); ++j) {
            const double inter = overlap(i, j);
            if (inter != 0.0 && inter != std::min(sizes(i), sizes(j))) {
                return StructureKind::Grouped;
            }
        }
    }
    return StructureKind::StrictTree;
}

std::vector<CoherenceViolation> validate_coherence(const HierarchyStructure& structure,
                                                   const Matrix& values, double rel_tol) {
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    if (values.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "values have " + std::to_string(values.rows()) +
                                                  " rows, hierarchy has " + std::to_string(n));
    }
    const Matrix implied = structure.s() * values.bottomRows(nb);
    std::vector<CoherenceViolation> out;
    for (Index i = 0; i < n - nb; ++i) {
        for (Index t = 0; t < values.cols(); ++t) {
            const double y = values(i, t);
            const double r = y - implied(i, t);
            if (!(std::abs(r) <= rel_tol * std::max(1.0, std::abs(y)))) {
                out.push_back({structure.series_ids()[static_cast<std::size_t>(i)], t, r});
            }
        }
    }
    return out;
}

TreeLinks tree_links(const HierarchyStructure& structure) {
    if (classify(structure) != StructureKind::StrictTree) {
        throw Error(ErrorCode::GroupedStructure, "operation requires a strict tree; structure is grouped");
    }
    const Matrix& s = structure.s();
    const Index n = s.rows();
    const Matrix overlap = s * s.transpose();
    const Vector sizes = structure.row_sums();

    TreeLinks links;
    links.parent.assign(static_cast<std::size_t>(n), std::nullopt);
    links.children.assign(static_cast<std::size_t>(n), {});
    for (Index i = 0; i < n; ++i) {
        std::optional<Index> best;
        for (Index j = 0; j < n; ++j) {
            if (j == i || overlap(i, j) != sizes(i)) {
                continue;
            }
            const bool larger = sizes(j) > sizes(i);
            const bool earlier_twin = sizes(j) == sizes(i) && j < i;
            if (!larger && !earlier_twin) {
                continue;
            }
            if (!best || sizes(j) < sizes(*best) || (sizes(j) == sizes(*best) && j > *best)) {
                best = j;
            }
        }
        links.parent[static_cast<std::size_t>(i)] = best;
        if (best) {
            links.children[static_cast<std::size_t>(*best)].push_back(i);
        }
    }
    links.bottom_up_order.resize(static_cast<std::size_t>(n));
    std::iota(links.bottom_up_order.begin(), links.bottom_up_order.end(), Index{0});
    std::sort(links.bottom_up_order.begin(), links.bottom_up_order.end(), [&](Index a, Index b) {
        if (sizes(a) != sizes(b)) {
            return sizes(a) < sizes(b);
        }
        return a > b;
    });
    return links;
}

MiddleOutSplit middle_out_split(const HierarchyStructure& structure, std::string_view middle_level) {
    if (classify(structure) != StructureKind::StrictTree) {
        throw Error(ErrorCode::GroupedStructure, "middle-out requires a strict tree; structure is grouped");
    }
    const auto& tags = structure.tags();
    std::size_t mid = tags.size();
    for (std::size_t k = 0; k < tags.size(); ++k) {
        if (tags[k].first == middle_level) {
            mid = k;
        }
    }
    if (mid == tags.size()) {
        throw Error(ErrorCode::UnknownLevel, "no level named '" + std::string(middle_level) + "'");
    }

    const Matrix& s = structure.s();
    const Index nb = structure.n_bottom();
    const auto middle_rows = structure.level_rows(middle_level);
    const Index nm = static_cast<Index>(middle_rows.size());

    // Middle supports must partition the bottom series.
    Vector cover = Vector::Zero(nb);
    for (Index m : middle_rows) {
        cover += s.row(m).transpose();
    }
    if ((cover.array() != 1.0).any()) {
        throw Error(ErrorCode::InvalidSplit,
                    "level '" + std::string(middle_level) + "' does not partition the bottom series");
    }

    // owner(b) = middle position covering bottom column b
    std::vector<Index> owner(static_cast<std::size_t>(nb));
    for (Index k = 0; k < nm; ++k) {
        for (Index b = 0; b < nb; ++b) {
            if (s(middle_rows[static_cast<std::size_t>(k)], b) != 0.0) {
                owner[static_cast<std::size_t>(b)] = k;
            }
        }
    }

    const auto& ids = structure.series_ids();
    auto contains = [&](Index outer, Index inner) {
        return ((s.row(outer).array() - s.row(inner).array()) >= 0.0).all();
    };

    // Upper: levels up to and including the middle, aggregating middle series.
    Tags upper_tags;
    std::vector<std::string> upper_ids;
    std::vector<Eigen::RowVectorXd> upper_rows;
    for (std::size_t k = 0; k <= mid; ++k) {
        upper_tags.emplace_back(tags[k].first, tags[k].second);
        for (const auto& id : tags[k].second) {
            const Index row = structure.require_index(id);
            Eigen::RowVectorXd urow = Eigen::RowVectorXd::Zero(nm);
            for (Index m = 0; m < nm; ++m) {
                const Index mrow = middle_rows[static_cast<std::size_t>(m)];
                if (contains(row, mrow)) {
                    urow(m) = 1.0;
                } else if (s.row(row).dot(s.row(mrow)) != 0.0) {
                    throw Error(ErrorCode::InvalidSplit, "series '" + id + "' above level '" +
                                                             std::string(middle_level) +
                                                             "' splits a middle-level series");
                }
            }
            upper_ids.push_back(id);
            upper_rows.push_back(urow);
        }
    }
    Matrix upper_s(static_cast<Index>(upper_rows.size()), nm);
    for (std::size_t i = 0; i < upper_rows.size(); ++i) {
        upper_s.row(static_cast<Index>(i)) = upper_rows[i];
    }
    std::vector<std::string> middle_ids;
    for (Index m : middle_rows) {
        middle_ids.push_back(ids[static_cast<std::size_t>(m)]);
    }

    MiddleOutSplit out{HierarchyStructure::from_matrix(upper_ids, middle_ids, upper_s, upper_tags), {}};

    for (Index m = 0; m < nm; ++m) {
        const Index mrow = middle_rows[static_cast<std::size_t>(m)];
        std::vector<Index> cols;
        for (Index b = 0; b < nb; ++b) {
            if (owner[static_cast<std::size_t>(b)] == m) {
                cols.push_back(b);
            }
        }
        Tags sub_tags;
        std::vector<std::string> sub_ids;
        std::vector<Index> sub_rows;
        for (std::size_t k = mid; k < tags.size(); ++k) {
            std::vector<std::string> level_ids;
            for (const auto& id : tags[k].second) {
                const Index row = structure.require_index(id);
                if (contains(mrow, row)) {
                    level_ids.push_back(id);
                    sub_ids.push_back(id);
                    sub_rows.push_back(row);
                } else if (k > mid && s.row(row).dot(s.row(mrow)) != 0.0) {
                    throw Error(ErrorCode::InvalidSplit, "series '" + id + "' below level '" +
                                                             std::string(middle_level) +
                                                             "' spans several middle-level series");
                }
            }
            if (!level_ids.empty()) {
                sub_tags.emplace_back(tags[k].first, std::move(level_ids));
            }
        }
        // The bottom level of the subtree must be the original bottom level.
        if (sub_tags.back().first != tags.back().first) {
            throw Error(ErrorCode::InvalidSplit, "subtree of '" + ids[static_cast<std::size_t>(mrow)] +
                                                     "' does not reach the bottom level");
        }
        Matrix sub_s(static_cast<Index>(sub_rows.size()), static_cast<Index>(cols.size()));
        std::vector<std::string> sub_bottom;
        for (std::size_t c = 0; c < cols.size(); ++c) {
            sub_bottom.push_back(structure.bottom_ids()[static_cast<std::size_t>(cols[c])]);
            for (std::size_t r = 0; r < sub_rows.size(); ++r) {
                sub_s(static_cast<Index>(r), static_cast<Index>(c)) = s(sub_rows[r], cols[c]);
            }
        }
        out.lower.push_back(HierarchyStructure::from_matrix(sub_ids, sub_bottom, sub_s, sub_tags));
    }
    return out;
}

Tags parse_tags(std::istream& in) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("tags: ") + e.what());
    }
    if (!doc.is_object()) {
        throw Error(ErrorCode::ParseError, "tags: expected an object of level -> [ids]");
    }
    Tags tags;
    for (const auto& [level, ids] : doc.items()) {
        if (!ids.is_array()) {
            throw Error(ErrorCode::ParseError, "tags: level '" + level + "' is not an array");
        }
        std::vector<std::string> list;
        for (const auto& id : ids) {
            if (!id.is_string()) {
                throw Error(ErrorCode::ParseError, "tags: level '" + level + "' has a non-string id");
            }
            list.push_back(id.get<std::string>());
        }
        tags.emplace_back(level, std::move(list));
    }
    return tags;
}

HierarchyStructure read_structure(std::istream& s_file, std::istream& tags_file) {
    std::string line;
    std::size_t line_no = 0;
    if (!csv::next_line(s_file, line, line_no)) {
        throw Error(ErrorCode::ParseError, "S file is empty");
    }
    auto header = csv::split_line(line);
    if (header.size() < 2 || header.front() != "unique_id") {
        throw Error(ErrorCode::ParseError, "S file header must be unique_id,<bottom ids...>");
    }
    std::vector<std::string> bottom(header.begin() + 1, header.end());
    std::vector<std::string> series;
    std::vector<std::vector<double>> rows;
    while (csv::next_line(s_file, line, line_no)) {
        auto fields = csv::split_line(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorCode::ParseError, "S file row " + std::to_string(line_no) + " has " +
                                                   std::to_string(fields.size()) + " fields, expected " +
                                                   std::to_string(header.size()));
        }
        series.push_back(fields.front());
        std::vector<double> row;
        for (std::size_t j = 1; j < fields.size(); ++j) {
            row.push_back(csv::parse_double(fields[j], "S file row " + std::to_string(line_no)));
        }
        rows.push_back(std::move(row));
    }
    Matrix s(static_cast<Index>(rows.size()), static_cast<Index>(bottom.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < bottom.size(); ++j) {
            s(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return HierarchyStructure::from_matrix(series, bottom, s, parse_tags(tags_file));
}

HierarchyStructure read_structure_files(const std::string& s_path, const std::string& tags_path) {
    std::ifstream s_file(s_path);
    if (!s_file) {
        throw Error(ErrorCode::ParseError, "cannot open S file '" + s_path + "'");
    }
    std::ifstream tags_file(tags_path);
    if (!tags_file) {
        throw Error(ErrorCode::ParseError, "cannot open tags file '" + tags_path + "'");
    }
    return read_structure(s_file, tags_file);
}

void write_s_matrix(std::ostream& out, const HierarchyStructure& structure) {
    out << "unique_id";
    for (const auto& b : structure.bottom_ids()) {
        out << ',' << csv::escape(b);
    }
    out << '\n';
    const Matrix& s = structure.s();
    for (Index i = 0; i < s.rows(); ++i) {
        out << csv::escape(structure.series_ids()[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < s.cols(); ++j) {
            out << ',' << (s(i, j) != 0.0 ? '1' : '0');
        }
        out << '\n';
    }
}

void write_tags(std::ostream& out, const HierarchyStructure& structure) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const auto& [level, ids] : structure.tags()) {
        doc[level] = ids;
    }
    out << doc.dump(2) << '\n';
}

}  // namespace hierfc
