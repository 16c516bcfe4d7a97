#include <random>

#include "doctest.h"
#include "hierfc/reconcile_prob.hpp"
#include "oracles.hpp"

using namespace hierfc;

namespace {

HierarchyStructure two_leaf() {
    return build_structure({{"total", {"T"}}, {"bottom", {"A", "B"}}}, {{"T", {"A", "B"}}});
}

HierarchyStructure chain() {
    Tags tags{{"total", {"T"}}, {"mid", {"M1", "M2"}}, {"bottom", {"A", "B", "C", "D"}}};
    Memberships m{{"T", {"M1", "M2"}}, {"M1", {"A", "B"}}, {"M2", {"C", "D"}}};
    return build_structure(tags, m);
}

Matrix col(std::initializer_list<double> v) {
    Matrix m(static_cast<Index>(v.size()), 1);
    Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::ParseError;
}

}  // namespace

TEST_CASE("type 7 quantiles") {
    std::vector<double> xs;
    for (int i = 1; i <= 100; ++i) xs.push_back(i);
    CHECK(quantile_sorted(xs, 0.1) == doctest::Approx(10.9).epsilon(1e-14));
    CHECK(quantile_sorted(xs, 0.9) == doctest::Approx(90.1).epsilon(1e-14));

    std::vector<Matrix> samples;
    for (int i = 100; i >= 1; --i) samples.push_back(Matrix::Constant(1, 1, i));
    const auto bands = quantile_bands(samples, {80, 0});
    CHECK(bands.at(80).lo(0, 0) == doctest::Approx(10.9));
    CHECK(bands.at(80).hi(0, 0) == doctest::Approx(90.1));
    CHECK(bands.at(0).lo(0, 0) == doctest::Approx(50.5));
    CHECK(bands.at(0).hi(0, 0) == doctest::Approx(50.5));

    std::mt19937_64 gen(1);
    std::vector<double> r(37);
    for (auto& x : r) x = std::normal_distribution<double>()(gen);
    auto sorted = r;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.0, 0.05, 0.333, 0.5, 0.95, 1.0}) CHECK(quantile_sorted(sorted, p) == doctest::Approx(oracle::quantile7(r, p)));

    const std::vector<Matrix> same(5, Matrix::Constant(2, 2, 3.5));
    for (const auto& [level, band] : quantile_bands(same, {50, 80, 99})) {
        CHECK(band.lo == same[0]);
        CHECK(band.hi == same[0]);
    }
    CHECK(code_of([&] { quantile_bands(same, {}); }) == ErrorCode::EmptyLevels);
    CHECK(code_of([&] { quantile_bands(same, {100}); }) == ErrorCode::BadLevel);
    CHECK(code_of([&] { quantile_bands(same, {-5}); }) == ErrorCode::BadLevel);
}

TEST_CASE("normality bands") {
    const auto h = two_leaf();
    const auto map = bottom_up(h);
    const Matrix base = col({12, 5, 4});
    const auto f = normality_bands(map, h, Matrix::Identity(3, 3), base, {80, 90});
    const double z90 = 1.6448536269514722;
    CHECK(f.bands.at(90).hi(0, 0) - f.mean(0, 0) == doctest::Approx(z90 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(f.bands.at(90).hi(1, 0) - f.mean(1, 0) == doctest::Approx(z90).epsilon(1e-12));
    CHECK(f.mean(0, 0) == doctest::Approx(9));
    for (Index i = 0; i < 3; ++i) {
        CHECK(f.bands.at(90).lo(i, 0) <= f.bands.at(80).lo(i, 0));
        CHECK(f.bands.at(80).hi(i, 0) <= f.bands.at(90).hi(i, 0));
    }
    const auto zero = normality_bands(map, h, Matrix::Zero(3, 3), base, {80});
    CHECK(zero.bands.at(80).lo == zero.mean);
    CHECK(zero.bands.at(80).hi == zero.mean);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054));

    const auto td = top_down(h, TopDownVariant::ForecastProportions, Matrix(), base);
    CHECK(code_of([&] { normality_bands(td, h, Matrix::Identity(3, 3), base, {80}); }) == ErrorCode::NoExplicitP);
    CHECK_NOTHROW(normality_bands(td, h, Matrix::Identity(3, 3), base, {80}, true));
}

TEST_CASE("bootstrap") {
    const auto h = two_leaf();
    const auto map = mintrace(h, Matrix::Identity(3, 3));
    const Matrix base(3, 2);
    Matrix b = base;
    b << 12, 13, 5, 6, 4, 4;
    SamplingOptions opt;
    opt.samples = 50;
    opt.seed = 4;

    const Matrix one = col({1, -2, 0.5});
    const auto single = bootstrap_samples(map, h, b, one, {80}, opt);
    Matrix shifted = b;
    shifted.colwise() += one.col(0);
    const Matrix centre = reconcile_point(map, h, shifted);
    for (const auto& s : single.samples) CHECK(oracle::max_abs(s - centre) < 1e-12);
    CHECK(oracle::max_abs(single.bands.at(80).hi - single.bands.at(80).lo) < 1e-12);

    std::mt19937_64 gen(3);
    const Matrix res = oracle::gaussian(gen, 3, 30);
    const auto a = bootstrap_samples(map, h, b, res, {80, 90}, opt);
    const auto again = bootstrap_samples(map, h, b, res, {80, 90}, opt);
    opt.threads = 5;
    const auto threaded = bootstrap_samples(map, h, b, res, {80, 90}, opt);
    REQUIRE(a.samples.size() == 50);
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        CHECK(a.samples[k] == again.samples[k]);
        CHECK(a.samples[k] == threaded.samples[k]);
        CHECK(validate_coherence(h, a.samples[k], 1e-10).empty());
    }
    CHECK(a.bands.at(90).lo == threaded.bands.at(90).lo);
    opt.block_len = 2;
    const auto blocks = bootstrap_samples(map, h, b, res, {80}, opt);
    // a block keeps consecutive residual columns together
    for (const auto& s : blocks.samples) {
        const Vector e0 = s.col(0) - reconcile_point(map, h, b).col(0);
        const Vector e1 = s.col(1) - reconcile_point(map, h, b).col(1);
        bool found = false;
        for (Index t = 0; t + 1 < res.cols(); ++t) {
            const Matrix p = map.p->operator*(res.middleCols(t, 2));
            if ((h.s() * p.col(0) - e0).norm() < 1e-9 && (h.s() * p.col(1) - e1).norm() < 1e-9) found = true;
        }
        CHECK(found);
    }

    const auto td = top_down(h, TopDownVariant::ForecastProportions, Matrix(), b);
    opt.block_len = 1;
    CHECK(code_of([&] { bootstrap_samples(td, h, b, res, {80}, opt); }) == ErrorCode::NoExplicitP);
    opt.allow_experimental = true;
    CHECK_NOTHROW(bootstrap_samples(td, h, b, res, {80}, opt));
}

TEST_CASE("stable ranks") {
    Vector v(5);
    v << 3, 1, 3, 0, 2;
    CHECK(stable_ranks(v) == std::vector<Index>{3, 1, 4, 0, 2});
}

TEST_CASE("permbu") {
    const auto h = two_leaf();
    const auto map = bottom_up(h);
    const Matrix base = col({0, 0, 0});
    std::mt19937_64 gen(9);
    const Matrix e = oracle::gaussian(gen, 1, 400);
    Matrix res(3, 400);
    res.row(1) = e;
    res.row(2) = -e;
    res.row(0) = res.row(1) + res.row(2);

    SamplingOptions opt;
    opt.samples = 400;
    opt.seed = 1;
    const auto f = permbu_samples(map, h, base, res, {80}, opt);
    Vector top(400);
    Vector a(400);
    Vector b(400);
    for (Index k = 0; k < 400; ++k) {
        const Matrix& s = f.samples[static_cast<std::size_t>(k)];
        CHECK(s(0, 0) == doctest::Approx(s(1, 0) + s(2, 0)).epsilon(1e-12));
        top(k) = s(0, 0);
        a(k) = s(1, 0);
        b(k) = s(2, 0);
    }
    auto var = [](const Vector& x) { return (x.array() - x.mean()).square().mean(); };
    CHECK(var(top) < 0.2 * (var(a) + var(b)));

    // positively dependent residuals give a wider parent than independent ones
    res.row(2) = e;
    res.row(0) = 2 * e;
    const auto pos = permbu_samples(map, h, base, res, {80}, opt);
    Vector top2(400);
    for (Index k = 0; k < 400; ++k) top2(k) = pos.samples[static_cast<std::size_t>(k)](0, 0);
    CHECK(var(top2) > 1.5 * (var(a) + var(b)));

    opt.samples = 1;
    const auto one = permbu_samples(map, h, base, res, {0}, opt);
    REQUIRE(one.samples.size() == 1);
    CHECK(one.samples[0](0, 0) == doctest::Approx(one.samples[0](1, 0) + one.samples[0](2, 0)));
}

TEST_CASE("permbu marginals follow the bottom forecasts") {
    const auto c = chain();
    std::mt19937_64 gen(12);
    const Matrix res = c.s() * oracle::gaussian(gen, 4, 200);
    Matrix base(7, 2);
    base << 100, 100, 30, 31, 10, 11, 1, 2, 2, 3, 3, 4, 4, 5;
    const auto map = bottom_up(c);
    SamplingOptions opt;
    opt.samples = 4000;
    opt.seed = 5;
    for (auto kind : {MarginalKind::Gaussian, MarginalKind::Empirical}) {
        const auto f = permbu_samples(map, c, base, res, {80, 90}, opt, kind);
        Matrix mean = Matrix::Zero(7, 2);
        for (const auto& s : f.samples) {
            CHECK(validate_coherence(c, s, 1e-10).empty());
            mean += s / static_cast<double>(f.samples.size());
        }
        Matrix centre = base.bottomRows(4);
        if (kind == MarginalKind::Empirical) centre.colwise() += res.bottomRows(4).rowwise().mean();
        CHECK(oracle::max_abs(mean.bottomRows(4) - centre) < 0.1);
        for (Index i = 0; i < 7; ++i)
            for (Index t = 0; t < 2; ++t) {
                CHECK(f.bands.at(90).lo(i, t) <= f.bands.at(80).lo(i, t));
                CHECK(f.bands.at(80).hi(i, t) <= f.bands.at(90).hi(i, t));
            }
        opt.threads = 3;
        const auto g = permbu_samples(map, c, base, res, {80}, opt, kind);
        CHECK(g.samples.back() == f.samples.back());
        opt.threads = 1;
    }

    std::mt19937_64 gen2(2);
    const auto grouped = oracle::random_grouped(gen2, 40).build();
    const Matrix gb = Matrix::Ones(grouped.n(), 1);
    CHECK(code_of([&] {
              permbu_samples(bottom_up(grouped), grouped, gb, Matrix::Ones(grouped.n(), 4), {80}, opt);
          }) == ErrorCode::GroupedStructure);
}

TEST_CASE("permbu keeps bottom marginals when only the dependence changes") {
    const auto c = chain();
    std::mt19937_64 gen(21);
    const Matrix e = oracle::gaussian(gen, 4, 60);
    Matrix flipped = e;
    flipped.row(1) *= -1.0;
    flipped.row(3) *= -1.0;
    Matrix base(7, 1);
    base << 0, 0, 0, 1, 2, 3, 4;
    SamplingOptions opt;
    opt.samples = 300;
    opt.seed = 8;
    const auto a = permbu_samples(bottom_up(c), c, base, c.s() * e, {80}, opt);
    const auto b = permbu_samples(bottom_up(c), c, base, c.s() * flipped, {80}, opt);
    bool some_parent_differs = false;
    for (Index i = 3; i < 7; ++i) {
        std::vector<double> xa;
        std::vector<double> xb;
        for (std::size_t k = 0; k < a.samples.size(); ++k) {
            xa.push_back(a.samples[k](i, 0));
            xb.push_back(b.samples[k](i, 0));
        }
        std::sort(xa.begin(), xa.end());
        std::sort(xb.begin(), xb.end());
        CHECK(xa == xb);
    }
    for (std::size_t k = 0; k < a.samples.size(); ++k) some_parent_differs |= a.samples[k](1, 0) != b.samples[k](1, 0);
    CHECK(some_parent_differs);
}

TEST_CASE("normality widths scale with the residuals") {
    const auto c = chain();
    std::mt19937_64 gen(6);
    const Matrix res = oracle::gaussian(gen, 7, 40);
    const auto map = mintrace(c, estimate_w(CovarianceVariant::Shrink, c, res).w, Method::MinTraceShrink);
    const Matrix base = oracle::gaussian(gen, 7, 3, 10.0);
    const auto one = normality_bands(map, c, normality_covariance(map, res), base, {90});
    for (double scale : {0.01, 7.0}) {
        const auto s = normality_bands(map, c, normality_covariance(map, scale * res), base, {90});
        const Matrix w1 = one.bands.at(90).hi - one.mean;
        const Matrix ws = s.bands.at(90).hi - s.mean;
        CHECK(oracle::max_abs(ws - scale * w1) < 1e-10 * std::max(1.0, scale));
        CHECK(validate_coherence(c, s.mean, 1e-8).empty());
    }
}
