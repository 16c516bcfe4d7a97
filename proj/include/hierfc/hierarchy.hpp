#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hierfc/linalg.hpp"

namespace hierfc {

using Index = Eigen::Index;

/// Level name -> series ids, in declaration order. The last level is the bottom.
using Tags = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// Series id -> the series (bottom or aggregate) it is the sum of.
using Memberships = std::map<std::string, std::vector<std::string>>;

enum class StructureKind { StrictTree, Grouped };

std::string_view to_string(StructureKind kind) noexcept;

/**
 * Summing matrix S together with its series ids and level tags.
 *
 * Rows are in canonical order: levels in tag order, series within a level in
 * declaration order, bottom level last. The last n_b rows of S are the
 * identity and the first row is all ones. Immutable after construction.
 */
class HierarchyStructure {
public:
    /// Validates and canonicalizes. Rows of `s` follow `series_ids` and its
    /// columns follow `bottom_ids`; both are reordered to match `tags`.
    static HierarchyStructure from_matrix(const std::vector<std::string>& series_ids,
                                          const std::vector<std::string>& bottom_ids,
                                          const Matrix& s, const Tags& tags);

    const std::vector<std::string>& series_ids() const noexcept { return series_ids_; }
    const std::vector<std::string>& bottom_ids() const noexcept { return bottom_ids_; }
    const Matrix& s() const noexcept { return s_; }
    const Tags& tags() const noexcept { return tags_; }

    Index n() const noexcept { return s_.rows(); }
    Index n_bottom() const noexcept { return s_.cols(); }
    Index n_aggregate() const noexcept { return n() - n_bottom(); }

    std::optional<Index> index_of(std::string_view id) const;
    Index require_index(std::string_view id) const;

    /// Row indices of a level; throws UnknownLevel.
    std::vector<Index> level_rows(std::string_view level) const;
    bool has_level(std::string_view level) const;

    /// Number of bottom descendants per row (S * 1).
    Vector row_sums() const { return s_.rowwise().sum(); }

    /// Bottom column indices aggregated by row i.
    std::vector<Index> support(Index row) const;

private:
    HierarchyStructure() = default;

    std::vector<std::string> series_ids_;
    std::vector<std::string> bottom_ids_;
    Matrix s_;
    Tags tags_;
    std::unordered_map<std::string, Index> index_;
};

HierarchyStructure build_structure(const Tags& tags, const Memberships& memberships);

StructureKind classify(const HierarchyStructure& structure);

struct CoherenceViolation {
    std::string series;
    Index time = 0;
    double residual = 0.0;  // y_it minus the sum of its bottom members
};

/// One record per (aggregate, column) where
/// |y_it - sum_b y_bt| > rel_tol * max(1, |y_it|). `values` is n x T.
std::vector<CoherenceViolation> validate_coherence(const HierarchyStructure& structure,
                                                   const Matrix& values, double rel_tol);

/// Parent/child links of a strict tree. Parent of a row is the smallest
/// strict superset; among identical supports the earlier row is the parent.
struct TreeLinks {
    std::vector<std::optional<Index>> parent;
    std::vector<std::vector<Index>> children;
    /// Every row after all of its descendants.
    std::vector<Index> bottom_up_order;
};

/// Throws GroupedStructure when the structure is not a strict tree.
TreeLinks tree_links(const HierarchyStructure& structure);

struct MiddleOutSplit {
    /// Levels down to the middle level, with the middle series as its bottom.
    HierarchyStructure upper;
    /// One subtree per middle-level series, in middle-level order.
    std::vector<HierarchyStructure> lower;
};

MiddleOutSplit middle_out_split(const HierarchyStructure& structure, std::string_view middle_level);

// File formats: S as `unique_id,<bottom ids...>` delimited text, tags as a
// JSON object of level -> array of ids (key order is level order).

HierarchyStructure read_structure(std::istream& s_file, std::istream& tags_file);
HierarchyStructure read_structure_files(const std::string& s_path, const std::string& tags_path);
void write_s_matrix(std::ostream& out, const HierarchyStructure& structure);
void write_tags(std::ostream& out, const HierarchyStructure& structure);
Tags parse_tags(std::istream& in);

}  // namespace hierfc
