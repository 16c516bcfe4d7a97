#include <random>

#include "doctest.h"
#include "hierfc/reconcile_point.hpp"
#include "oracles.hpp"

using namespace hierfc;

namespace {

HierarchyStructure two_leaf() {
    return build_structure({{"total", {"T"}}, {"bottom", {"A", "B"}}}, {{"T", {"A", "B"}}});
}

}  // namespace

TEST_CASE("identity and structural weights") {
    const auto h = two_leaf();
    const Matrix r = Matrix::Zero(3, 4);
    CHECK(estimate_w(CovarianceVariant::Ols, h, r).w == Matrix::Identity(3, 3));
    Matrix ws = Matrix::Zero(3, 3);
    ws.diagonal() << 2, 1, 1;
    CHECK(estimate_w(CovarianceVariant::WlsStruct, h, r).w == ws);
}

TEST_CASE("variance weights") {
    const auto h = two_leaf();
    Matrix r(3, 2);
    r << 1, -1, 2, 0, 1, 1;
    Matrix expected = Matrix::Zero(3, 3);
    expected.diagonal() << 1, 2, 1;
    CHECK(estimate_w(CovarianceVariant::WlsVar, h, r).w == expected);
}

TEST_CASE("shrinkage degenerate point") {
    const auto h = two_leaf();
    // constant-magnitude residuals, one row proportional to another
    Matrix r(3, 4);
    r << 3, -3, 3, -3, 1, -1, 1, -1, 2, -2, 2, -2;
    const auto est = estimate_w(CovarianceVariant::Shrink, h, r);
    REQUIRE(est.shrink_lambda);
    CHECK(*est.shrink_lambda == doctest::Approx(0.0));
    CHECK(oracle::max_abs(est.w - oracle::w_sample(r)) < 1e-12);
}

TEST_CASE("shrinkage matches the reference on random residuals") {
    std::mt19937_64 gen(3);
    for (int k = 0; k < 50; ++k) {
        const auto s = oracle::random_structure(gen, 30);
        const auto h = s.build();
        const Index T = 3 + k % 20;
        const Matrix r = h.s() * oracle::gaussian(gen, h.n_bottom(), T) + 0.3 * oracle::gaussian(gen, h.n(), T);
        double lambda = 0;
        const Matrix expected = oracle::w_shrink(r, &lambda);
        const auto est = estimate_w(CovarianceVariant::Shrink, h, r);
        CHECK(*est.shrink_lambda == doctest::Approx(lambda).epsilon(1e-10));
        CHECK(oracle::max_abs(est.w - expected) < 1e-10 * expected.cwiseAbs().maxCoeff());
        CHECK(oracle::max_abs(estimate_w(CovarianceVariant::WlsVar, h, r).w - oracle::w_variance(r)) < 1e-12);
        CHECK(oracle::max_abs(estimate_w(CovarianceVariant::Full, h, r).w - oracle::w_sample(r)) < 1e-12);
    }
}

TEST_CASE("missing cells are skipped pairwise") {
    const auto h = two_leaf();
    Matrix r(3, 4);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r << nan, 1, 2, 3, nan, 1, 1, 1, 5, 1, 1, 1;
    const auto w = estimate_w(CovarianceVariant::Full, h, r).w;
    CHECK(w(0, 0) == doctest::Approx((1 + 4 + 9) / 3.0));
    CHECK(w(2, 2) == doctest::Approx((25 + 3) / 4.0));
    CHECK(w(0, 2) == doctest::Approx((1 + 2 + 3) / 3.0));
}

TEST_CASE("covariance errors") {
    const auto h = two_leaf();
    Matrix r(3, 1);
    r << 1, 2, 3;
    CHECK_THROWS_AS(estimate_w(CovarianceVariant::Shrink, h, r), Error);
    Matrix inf(3, 3);
    inf << 1, 2, std::numeric_limits<double>::infinity(), 1, 1, 1, 1, 1, 1;
    try {
        estimate_w(CovarianceVariant::WlsVar, h, inf);
        FAIL("expected NonFiniteResiduals");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteResiduals);
    }
    CHECK_THROWS_AS(estimate_w(CovarianceVariant::Full, h, Matrix::Ones(2, 5)), Error);
}
