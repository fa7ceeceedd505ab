#include <cmath>
#include <memory>

#include "doctest.h"
#include "ddp/sieve.hpp"

using namespace ddp;

TEST_CASE("Chebyshev basis values") {
    const Vector at_min = chebyshev_basis(0.0, 3, 0.0, 1000.0);
    CHECK(at_min(0) == doctest::Approx(1.0));
    CHECK(at_min(1) == doctest::Approx(-1.0));
    CHECK(at_min(2) == doctest::Approx(1.0));

    const Vector at_mid = chebyshev_basis(500.0, 3, 0.0, 1000.0);
    CHECK(at_mid(0) == doctest::Approx(1.0));
    CHECK(std::abs(at_mid(1)) < 1e-15);
    CHECK(at_mid(2) == doctest::Approx(-1.0));

    // continuation above the domain: continuity at T = 1
    const Vector above = chebyshev_basis(1200.0, 3, 0.0, 1000.0);
    CHECK(above(0) == doctest::Approx(1.0));
    CHECK(above(1) == doctest::Approx(1.0));
    CHECK(above(2) == doctest::Approx(1.0));
    const Vector below = chebyshev_basis(-50.0, 4, 0.0, 1000.0);
    CHECK(below(3) == doctest::Approx(-1.0));
}

TEST_CASE("Chebyshev nodes") {
    const auto one = chebyshev_nodes(1, -1.0, 1.0);
    CHECK(std::abs(one[0]) < 1e-12);

    const auto two = chebyshev_nodes(2, -1.0, 1.0);
    CHECK(two[0] == doctest::Approx(-std::sqrt(2.0) / 2.0));
    CHECK(two[1] == doctest::Approx(std::sqrt(2.0) / 2.0));

    const auto many = chebyshev_nodes(17, 0.0, 1000.0);
    for (std::size_t i = 0; i < many.size(); ++i) {
        CHECK(many[i] > 0.0);
        CHECK(many[i] < 1000.0);
        if (i > 0) CHECK(many[i] > many[i - 1]);
    }
}

TEST_CASE("B-spline basis") {
    SUBCASE("order 0 is an indicator partition") {
        const Vector b = bspline_basis(0.3, 4, 0, 0.0, 1.0);
        CHECK(b.sum() == doctest::Approx(1.0));
        CHECK(b.maxCoeff() == doctest::Approx(1.0));
        CHECK(b(1) == doctest::Approx(1.0));  // 0.3 lies in [0.25, 0.5)
    }

    SUBCASE("partition of unity for cubic-like order") {
        for (double z : {0.05, 0.31, 0.5, 0.77, 0.99}) {
            const Vector b = bspline_basis(z, 7, 2, 0.0, 1.0);
            CHECK(b.sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(b.minCoeff() >= 0.0);
        }
    }

    SUBCASE("linear hats peak at interior knots") {
        // J=5, k=1: interior knots at 0.25, 0.5, 0.75
        const Vector b = bspline_basis(0.5, 5, 1, 0.0, 1.0);
        CHECK(b(2) == doctest::Approx(1.0));
    }

    SUBCASE("clamping outside the domain") {
        const Vector lo = bspline_basis(-3.0, 5, 1, 0.0, 1.0);
        CHECK(lo(0) == doctest::Approx(1.0));
        const Vector hi = bspline_basis(4.0, 5, 1, 0.0, 1.0);
        CHECK(hi(4) == doctest::Approx(1.0));
    }
}

TEST_CASE("universal basis nodes") {
    SUBCASE("order 0 takes the first J knots") {
        const auto n = universal_nodes(4, 0);
        CHECK(std::abs(n[0]) < 1e-12);
        CHECK(n[1] == doctest::Approx(0.25));
        CHECK(n[2] == doctest::Approx(0.5));
        CHECK(n[3] == doctest::Approx(0.75));
    }

    SUBCASE("order 1 peaks at the knots") {
        const auto n = universal_nodes(5, 1);
        const double expect[] = {0.0, 0.25, 0.5, 0.75, 1.0};
        for (int i = 0; i < 5; ++i) CHECK(n[i] == doctest::Approx(expect[i]).epsilon(1e-3).scale(1.0));
    }

    SUBCASE("sorted and inside the unit interval") {
        const auto n = universal_nodes(8, 2);
        for (std::size_t i = 0; i < n.size(); ++i) {
            CHECK(n[i] >= 0.0);
            CHECK(n[i] <= 1.0);
            if (i > 0) CHECK(n[i] > n[i - 1]);
        }
    }
}

TEST_CASE("tensor-product basis") {
    SieveSpace uni{BasisFamily::Chebyshev, 0, 4, 1, 0.0, 1000.0};
    CHECK(uni.K() == 4);
    CHECK((uni.basis(make_state(300.0)) - chebyshev_basis(300.0, 4, 0.0, 1000.0)).cwiseAbs().maxCoeff() ==
          0.0);

    SieveSpace biv{BasisFamily::Chebyshev, 0, 3, 2, 0.0, 1000.0};
    CHECK(biv.K() == 9);
    const Vector b = biv.basis(make_state(0.0, 0.0));
    for (int j1 = 0; j1 < 3; ++j1)
        for (int j2 = 0; j2 < 3; ++j2)
            CHECK(b(j1 * 3 + j2) == doctest::Approx(((j1 + j2) % 2 == 0) ? 1.0 : -1.0));
    // constant basis entry is 1 everywhere
    CHECK(biv.basis(make_state(412.0, 77.0))(0) == doctest::Approx(1.0));
}

TEST_CASE("least-squares projector") {
    SieveSpace space{BasisFamily::Chebyshev, 0, 3, 1, 0.0, 1.0};

    SUBCASE("reproduces a basis function") {
        std::vector<State> pts;
        for (double z : chebyshev_nodes(8, 0.0, 1.0)) pts.push_back(make_state(z));
        Projector proj(space, pts);
        Vector values(8);
        for (int i = 0; i < 8; ++i) values(i) = space.basis(pts[i])(1);
        const Vector alpha = proj.project(values);
        CHECK(std::abs(alpha(0)) < 1e-10);
        CHECK(alpha(1) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(std::abs(alpha(2)) < 1e-10);
    }

    SUBCASE("square system interpolates") {
        std::vector<State> pts;
        for (double z : chebyshev_nodes(3, 0.0, 1.0)) pts.push_back(make_state(z));
        Projector proj(space, pts);
        Vector values(3);
        values << 0.3, -1.2, 4.0;
        const Vector alpha = proj.project(values);
        for (int i = 0; i < 3; ++i) CHECK(proj.evaluate(alpha, pts[i]) == doctest::Approx(values(i)).epsilon(1e-10));
    }

    SUBCASE("quadratics are exact with three Chebyshev functions") {
        std::vector<State> pts;
        for (double z : chebyshev_nodes(3, 0.0, 1.0)) pts.push_back(make_state(z));
        Projector proj(space, pts);
        Vector values(3);
        for (int i = 0; i < 3; ++i) values(i) = pts[i](0) * pts[i](0);
        const Vector alpha = proj.project(values);
        for (double z : {0.0, 0.17, 0.62, 1.0})
            CHECK(proj.evaluate(alpha, make_state(z)) == doctest::Approx(z * z).epsilon(1e-12));
    }

    SUBCASE("too few design points") {
        CHECK_THROWS_AS(Projector(space, {make_state(0.1), make_state(0.9)}), SingularProjection);
    }
}

TEST_CASE("projection operator sup norm") {
    SUBCASE("square interpolation gives the identity") {
        SieveSpace space{BasisFamily::Chebyshev, 0, 4, 1, 0.0, 1000.0};
        std::vector<State> pts;
        for (double z : chebyshev_nodes(4, 0.0, 1000.0)) pts.push_back(make_state(z));
        Projector proj(space, pts);
        CHECK(proj.sup_operator_norm() == doctest::Approx(1.0).epsilon(1e-10));
    }

    SUBCASE("constant basis is non-expansive") {
        SieveSpace space{BasisFamily::Chebyshev, 0, 1, 1, 0.0, 1000.0};
        std::vector<State> pts;
        for (double z : chebyshev_nodes(64, 0.0, 1000.0)) pts.push_back(make_state(z));
        Projector proj(space, pts);
        CHECK(proj.sup_operator_norm() == doctest::Approx(1.0).epsilon(1e-14));
    }

    SUBCASE("four Chebyshev functions over 64 equally spaced points can expand") {
        SieveSpace space{BasisFamily::Chebyshev, 0, 4, 1, 0.0, 1000.0};
        std::vector<State> pts;
        for (int i = 0; i < 64; ++i) pts.push_back(make_state(1000.0 * i / 63.0));
        Projector proj(space, pts);
        CHECK(proj.sup_operator_norm() > 1.78);
    }
}
