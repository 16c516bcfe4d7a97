#include "hierfc/reconcile_point.hpp"

#include <cmath>
#include <sstream>

#include "hierfc/csv.hpp"

namespace hierfc {

std::string_view to_string(Method method) noexcept {
    switch (method) {
        case Method::BottomUp: return "bottom_up";
        case Method::TopDownF: return "top_down_f";
        case Method::TopDownA: return "top_down_a";
        case Method::TopDownP: return "top_down_p";
        case Method::MiddleOut: return "middle_out";
        case Method::CombOls: return "comb_ols";
        case Method::CombWls: return "comb_wls";
        case Method::MinTraceOls: return "mintrace_ols";
        case Method::MinTraceWlsStruct: return "mintrace_wls_struct";
        case Method::MinTraceWlsVar: return "mintrace_wls_var";
        case Method::MinTraceShrink: return "mintrace_shrink";
        case Method::ErmCf: return "erm_cf";
        case Method::ErmLasso: return "erm_lasso";
    }
    return "unknown";
}

bool is_top_down_family(Method method) noexcept {
    return method == Method::TopDownF || method == Method::TopDownA || method == Method::TopDownP ||
           method == Method::MiddleOut;
}

bool is_projection(Method method) noexcept {
    switch (method) {
        case Method::BottomUp:
        case Method::CombOls:
        case Method::CombWls:
        case Method::MinTraceOls:
        case Method::MinTraceWlsStruct:
        case Method::MinTraceWlsVar:
        case Method::MinTraceShrink:
            return true;
        default:
            return false;
    }
}

MethodSpec MethodSpec::parse(std::string_view text) {
    MethodSpec spec;
    spec.selector = std::string(text);
    const auto colon = text.find(':');
    const auto head = text.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    auto bad = [&] {
        return Error(ErrorCode::BadSpec, "unknown method '" + std::string(text) + "'");
    };
    if (head == "bottom_up" && arg.empty()) {
        spec.method = Method::BottomUp;
    } else if (head == "top_down") {
        if (arg == "f") {
            spec.method = Method::TopDownF;
        } else if (arg == "a") {
            spec.method = Method::TopDownA;
        } else if (arg == "p") {
            spec.method = Method::TopDownP;
        } else {
            throw bad();
        }
    } else if (head == "middle_out") {
        if (arg.empty()) {
            throw Error(ErrorCode::BadSpec, "middle_out needs a level: middle_out:<level>");
        }
        spec.method = Method::MiddleOut;
        spec.middle_level = std::string(arg);
    } else if (head == "comb") {
        if (arg == "ols") {
            spec.method = Method::CombOls;
        } else if (arg == "wls") {
            spec.method = Method::CombWls;
        } else {
            throw bad();
        }
    } else if (head == "min_trace") {
        if (arg == "ols") {
            spec.method = Method::MinTraceOls;
        } else if (arg == "wls_struct") {
            spec.method = Method::MinTraceWlsStruct;
        } else if (arg == "wls_var") {
            spec.method = Method::MinTraceWlsVar;
        } else if (arg == "shrink") {
            spec.method = Method::MinTraceShrink;
        } else {
            throw bad();
        }
    } else if (head == "erm") {
        if (arg == "cf") {
            spec.method = Method::ErmCf;
        } else if (arg.rfind("lasso", 0) == 0) {
            spec.method = Method::ErmLasso;
            const auto rest = arg.substr(5);
            if (rest.size() < 2 || rest.front() != ':') {
                throw Error(ErrorCode::BadLambda, "erm:lasso needs a penalty: erm:lasso:<lambda>");
            }
            spec.lambda = csv::parse_double(rest.substr(1), "erm lasso lambda");
            if (!(spec.lambda > 0.0) || !std::isfinite(spec.lambda)) {
                throw Error(ErrorCode::BadLambda, "erm lasso lambda must be positive");
            }
        } else {
            throw bad();
        }
    } else {
        throw bad();
    }
    return spec;
}

const Matrix& ReconciliationMap::p_at(Index step) const {
    if (p) {
        return *p;
    }
    if (step < 0 || step >= static_cast<Index>(horizon_p.size())) {
        throw Error(ErrorCode::ShapeMismatch, "map has no P for horizon step " + std::to_string(step));
    }
    return horizon_p[static_cast<std::size_t>(step)];
}

ReconciliationMap bottom_up(const HierarchyStructure& structure) {
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    Matrix p = Matrix::Zero(nb, n);
    p.rightCols(nb).setIdentity();
    ReconciliationMap map;
    map.method = Method::BottomUp;
    map.p = std::move(p);
    return map;
}

namespace {

/// Bottom shares of every node's forecast under forecast proportions,
/// walking down from `root`. Returns shares indexed by bottom column.
Vector forecast_shares(const HierarchyStructure& structure, const TreeLinks& links, const Vector& base,
                       Index root, Diagnostics* diag, Index step) {
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    Vector share = Vector::Zero(n);
    share(root) = 1.0;
    for (auto it = links.bottom_up_order.rbegin(); it != links.bottom_up_order.rend(); ++it) {
        const Index node = *it;
        const auto& kids = links.children[static_cast<std::size_t>(node)];
        if (kids.empty() || share(node) == 0.0) {
            continue;
        }
        double total = 0.0;
        for (Index c : kids) {
            total += base(c);
        }
        if (total == 0.0) {
            std::ostringstream msg;
            msg << "children of '" << structure.series_ids()[static_cast<std::size_t>(node)]
                << "' sum to zero at horizon step " << step + 1 << "; splitting equally";
            warn(diag, "top_down", msg.str());
            for (Index c : kids) {
                share(c) = share(node) / static_cast<double>(kids.size());
            }
        } else {
            for (Index c : kids) {
                share(c) = share(node) * base(c) / total;
            }
        }
    }
    return share.tail(nb);
}

}  // namespace

ReconciliationMap top_down(const HierarchyStructure& structure, TopDownVariant variant, const Matrix& history,
                           const Matrix& base_point, Diagnostics* diag) {
    const TreeLinks links = tree_links(structure);
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    ReconciliationMap map;

    if (variant == TopDownVariant::ForecastProportions) {
        if (base_point.rows() != n) {
            throw Error(ErrorCode::ShapeMismatch, "base forecasts do not match the hierarchy");
        }
        map.method = Method::TopDownF;
        for (Index h = 0; h < base_point.cols(); ++h) {
            Matrix p = Matrix::Zero(nb, n);
            p.col(0) = forecast_shares(structure, links, base_point.col(h), 0, diag, h);
            map.horizon_p.push_back(std::move(p));
        }
        return map;
    }

    if (history.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "history does not match the hierarchy");
    }
    if (history.cols() < 1) {
        throw Error(ErrorCode::InsufficientHistory, "top_down needs history");
    }
    const Vector top = history.row(0).transpose();
    const Matrix bottom = history.bottomRows(nb);
    Vector shares;
    if (variant == TopDownVariant::AverageHistoricalProportions) {
        map.method = Method::TopDownA;
        for (Index t = 0; t < top.size(); ++t) {
            if (top(t) == 0.0) {
                throw Error(ErrorCode::ZeroDenominator, "top series is zero at period " + std::to_string(t + 1));
            }
        }
        shares = (bottom.array().rowwise() / top.transpose().array()).rowwise().mean();
    } else {
        map.method = Method::TopDownP;
        const double top_mean = top.mean();
        if (top_mean == 0.0) {
            throw Error(ErrorCode::ZeroDenominator, "top series has zero mean");
        }
        shares = bottom.rowwise().mean() / top_mean;
    }
    Matrix p = Matrix::Zero(nb, n);
    p.col(0) = shares;
    map.p = std::move(p);
    return map;
}

ReconciliationMap middle_out(const HierarchyStructure& structure, std::string_view middle_level,
                             const Matrix& base_point, Diagnostics* diag) {
    const MiddleOutSplit split = middle_out_split(structure, middle_level);
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    if (base_point.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "base forecasts do not match the hierarchy");
    }

    struct Subtree {
        Index middle_row;
        std::vector<Index> rows;     // original row of each subtree row
        std::vector<Index> bottoms;  // original bottom column of each subtree bottom
        TreeLinks links;
    };
    std::vector<Subtree> subtrees;
    for (const auto& lower : split.lower) {
        Subtree sub{structure.require_index(lower.series_ids().front()), {}, {}, tree_links(lower)};
        for (const auto& id : lower.series_ids()) {
            sub.rows.push_back(structure.require_index(id));
        }
        for (const auto& id : lower.bottom_ids()) {
            sub.bottoms.push_back(structure.require_index(id) - (n - nb));
        }
        subtrees.push_back(std::move(sub));
    }

    ReconciliationMap map;
    map.method = Method::MiddleOut;
    for (Index h = 0; h < base_point.cols(); ++h) {
        Matrix p = Matrix::Zero(nb, n);
        for (std::size_t k = 0; k < subtrees.size(); ++k) {
            const auto& sub = subtrees[k];
            const auto& lower = split.lower[k];
            Vector local(static_cast<Index>(sub.rows.size()));
            for (std::size_t r = 0; r < sub.rows.size(); ++r) {
                local(static_cast<Index>(r)) = base_point(sub.rows[r], h);
            }
            const Vector shares = forecast_shares(lower, sub.links, local, 0, diag, h);
            for (std::size_t b = 0; b < sub.bottoms.size(); ++b) {
                p(sub.bottoms[b], sub.middle_row) = shares(static_cast<Index>(b));
            }
        }
        map.horizon_p.push_back(std::move(p));
    }
    return map;
}

ReconciliationMap mintrace(const HierarchyStructure& structure, const Matrix& w, Method tag, Diagnostics* diag) {
    const Index n = structure.n();
    if (w.rows() != n || w.cols() != n) {
        throw Error(ErrorCode::ShapeMismatch, "W must be " + std::to_string(n) + "x" + std::to_string(n));
    }
    const Matrix& s = structure.s();
    const SpdFactor w_factor(w, "W", diag);
    const Matrix winv_s = w_factor.solve(s);                   // n x n_b
    const Matrix gram = s.transpose() * winv_s;                // n_b x n_b
    const SpdFactor gram_factor(gram, "S'W^-1 S", diag);
    ReconciliationMap map;
    map.method = tag;
    map.p = gram_factor.solve(Matrix(winv_s.transpose()));  // n_b x n
    map.w = w;
    return map;
}

Matrix reconcile_point(const ReconciliationMap& map, const HierarchyStructure& structure, const Matrix& base_point) {
    const Index n = structure.n();
    const Index nb = structure.n_bottom();
    if (base_point.rows() != n) {
        throw Error(ErrorCode::ShapeMismatch, "base forecasts have " + std::to_string(base_point.rows()) +
                                                  " rows, hierarchy has " + std::to_string(n));
    }
    if (map.p) {
        if (map.p->rows() != nb || map.p->cols() != n) {
            throw Error(ErrorCode::ShapeMismatch, "P does not match the hierarchy");
        }
        return structure.s() * (*map.p * base_point);
    }
    if (static_cast<Index>(map.horizon_p.size()) < base_point.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "map covers " + std::to_string(map.horizon_p.size()) +
                                                  " horizon steps, forecasts have " +
                                                  std::to_string(base_point.cols()));
    }
    Matrix out(n, base_point.cols());
    for (Index h = 0; h < base_point.cols(); ++h) {
        const Matrix& p = map.horizon_p[static_cast<std::size_t>(h)];
        if (p.rows() != nb || p.cols() != n) {
            throw Error(ErrorCode::ShapeMismatch, "P does not match the hierarchy");
        }
        out.col(h) = structure.s() * (p * base_point.col(h));
    }
    return out;
}

ForecastFrame reconcile(const ReconciliationMap& map, const HierarchyStructure& structure, const ForecastFrame& base) {
    ForecastFrame out;
    out.point = reconcile_point(map, structure, base.point);
    out.horizon_labels = base.horizon_labels;
    out.series_ids = structure.series_ids();
    return out;
}

ReconciliationMap build_map(const MethodSpec& spec, const HierarchyStructure& structure, const SeriesPanel& history,
                            const BaseForecast& base, Diagnostics* diag) {
    auto with_w = [&](CovarianceVariant variant, Method tag) {
        auto estimate = estimate_w(variant, structure, base.residuals, &base.available);
        auto map = mintrace(structure, estimate.w, tag, diag);
        map.shrink_lambda = estimate.shrink_lambda;
        return map;
    };
    switch (spec.method) {
        case Method::BottomUp: return bottom_up(structure);
        case Method::TopDownF:
            return top_down(structure, TopDownVariant::ForecastProportions, history.values, base.forecast.point, diag);
        case Method::TopDownA:
            return top_down(structure, TopDownVariant::AverageHistoricalProportions, history.values,
                            base.forecast.point, diag);
        case Method::TopDownP:
            return top_down(structure, TopDownVariant::ProportionsOfHistoricalAverages, history.values,
                            base.forecast.point, diag);
        case Method::MiddleOut: return middle_out(structure, spec.middle_level, base.forecast.point, diag);
        case Method::CombOls:
        case Method::MinTraceOls: return with_w(CovarianceVariant::Ols, spec.method);
        case Method::CombWls:
        case Method::MinTraceWlsStruct: return with_w(CovarianceVariant::WlsStruct, spec.method);
        case Method::MinTraceWlsVar: return with_w(CovarianceVariant::WlsVar, spec.method);
        case Method::MinTraceShrink: return with_w(CovarianceVariant::Shrink, spec.method);
        case Method::ErmCf:
        case Method::ErmLasso: return erm(structure, base.fitted, history.values, spec.method, spec.lambda, diag);
    }
    throw Error(ErrorCode::BadSpec, "unhandled method");
}

}  // namespace hierfc
