#include <doctest.h>

#include <cmath>
#include <sstream>

#include "affinefrac/fields.hpp"
#include "affinefrac/hypergeom.hpp"

using namespace affinefrac;

TEST_CASE("bubble profile values") {
    Params p2(2, 0.5);
    const RadialProfile u2 = bubble_profile(p2);
    CHECK(u2(0.0) == doctest::Approx(1.0));
    CHECK(u2(1.0) == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-14));
    Params p3(3, 0.5);
    const RadialProfile u3 = bubble_profile(p3);
    for (double r : {0.3, 1.7, 9.0})
        CHECK(u3(r) == doctest::Approx(1.0 / (1.0 + r * r)).epsilon(1e-14));
}

TEST_CASE("kernel field profiles") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        const auto gens = kernel_fields(p);
        const auto& U = gens[0];
        const auto& Z0 = gens[1];
        const auto& dU = gens[2];
        const auto& z = gens[3];
        const double m = n - 2.0 * s;

        CHECK(Z0.profile(0.0) == doctest::Approx(0.5 * m));
        CHECK(Z0.profile(1.0) == doctest::Approx(0.0));
        CHECK(z.profile(1.0) == doctest::Approx(-0.5 * m * U.profile(1.0)).epsilon(1e-14));

        // Z0 = (n-2s)/2 U + r U' pointwise, with U' from a central difference
        for (double r : {0.2, 0.9, 2.3, 7.0}) {
            const double dh = 1e-6;
            const double up = (U.profile(r + dh) - U.profile(r - dh)) / (2 * dh);
            CHECK(Z0.profile(r) ==
                  doctest::Approx(0.5 * m * U.profile(r) + r * up).epsilon(1e-7));
            CHECK(dU.profile(r) == doctest::Approx(up).epsilon(1e-7));
        }
    }
    Params p(2, 0.5);
    CHECK(kernel_fields(p)[3].profile(1.0) ==
          doctest::Approx(-std::pow(2.0, -0.5) / 2.0).epsilon(1e-13));
}

TEST_CASE("degree-two test profile") {
    for (int n : {2, 3}) {
        Params p(n, 0.5);
        const RadialProfile rho = degree_two_test_profile(p);
        CHECK(rho(1.0) == doctest::Approx(-1.0 / (n + 1.0)).epsilon(1e-14));
        const double nu = 0.5 * (n - 2.0 * 0.5);
        CHECK(rho(0.0) ==
              doctest::Approx(std::pow(2.0, nu) * n / (n + 1.0)).epsilon(1e-14));
        // the sign change sits where ((1-r^2)/(1+r^2))^2 = 1/(n+1)
        const double c = 1.0 / std::sqrt(n + 1.0);
        const double rstar = std::sqrt((1.0 - c) / (1.0 + c));
        CHECK(rho(rstar - 1e-4) * rho(rstar + 1e-4) < 0.0);
        CHECK(std::abs(rho(rstar)) < 1e-4);
    }
    Params p(2, 0.5);
    CHECK(degree_two_test_profile(p)(0.0) == doctest::Approx(0.94281).epsilon(1e-4));
}

TEST_CASE("sector basis: kernel lifts are single modes") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}}) {
        Params p(n, s);
        SectorBasis b0(p, 0, 20);
        const auto gens = kernel_fields(p);

        const SphereCoeffs cu = b0.project(gens[0].profile);
        for (std::size_t k = 1; k < cu.coeffs.size(); ++k)
            CHECK(std::abs(cu.coeffs[k]) < 1e-10 * std::abs(cu.coeffs[0]));

        const SphereCoeffs cz0 = b0.project(gens[1].profile);
        for (std::size_t k = 0; k < cz0.coeffs.size(); ++k)
            if (k != 1) CHECK(std::abs(cz0.coeffs[k]) < 1e-10 * std::abs(cz0.coeffs[1]));

        const SphereCoeffs crho = b0.project(degree_two_test_profile(p));
        for (std::size_t k = 0; k < crho.coeffs.size(); ++k)
            if (k != 2) CHECK(std::abs(crho.coeffs[k]) < 1e-10 * std::abs(crho.coeffs[2]));

        SectorBasis b1(p, 1, 20);
        const SphereCoeffs cdu = b1.project(gens[2].profile);
        for (std::size_t k = 1; k < cdu.coeffs.size(); ++k)
            CHECK(std::abs(cdu.coeffs[k]) < 1e-10 * std::abs(cdu.coeffs[0]));
    }
}

TEST_CASE("sector basis: round trip and Parseval") {
    Params p(2, 0.5);
    SectorBasis b0(p, 0, 30);
    const RadialProfile rho = degree_two_test_profile(p);
    const SphereCoeffs c = b0.project(rho);
    // Parseval for a finitely-supported lift
    CHECK(c.sum_sq() == doctest::Approx(c.norm_sq).epsilon(1e-12));
    // pointwise synthesis reproduces the lift
    const double nu = 0.5 * (p.n - 2.0 * p.s);
    for (double theta : {0.3, 1.0, 2.0, 2.8}) {
        const double r = std::tan(0.5 * theta);
        const double g = std::pow(0.5 * (1.0 + r * r), nu) * rho(r);
        CHECK(b0.synth(c, theta) == doctest::Approx(g).epsilon(1e-8));
    }
    // mode profiles lift back to unit coefficient vectors
    SectorBasis b2(p, 2, 12);
    const SphereCoeffs cm = b2.project(b2.mode_profile(4));
    for (std::size_t k = 0; k < cm.coeffs.size(); ++k)
        CHECK(cm.coeffs[k] == doctest::Approx(k == 2 ? 1.0 : 0.0).epsilon(1e-9));
}

TEST_CASE("truncation error triggers on slowly-converging sectors") {
    Params p(2, 0.5);
    SectorBasis b2(p, 2, 24);
    const RadialProfile z = kernel_fields(p)[3].profile;
    CHECK_THROWS_AS(b2.project(z, true, 1e-8), TruncationError);
    CHECK_NOTHROW(b2.project(z, true, 1e-2));
}

TEST_CASE("grid realization basics") {
    Params p(2, 0.5);
    const auto gens = kernel_fields(p);
    const GridField u = realize_on_grid(gens[0], p, 12.0, 64);
    CHECK(u.at2(32, 32) == doctest::Approx(1.0));  // x = 0 at N/2

    // odd-parity of an ell=1 field
    const GridField d = realize_on_grid(gens[2], p, 12.0, 64);
    for (int i = 1; i < 64; ++i)
        for (int j = 1; j < 64; ++j)
            CHECK(d.at2(i, j) == doctest::Approx(-d.at2(64 - i, 64 - j)).epsilon(1e-12));

    // ell=2 with Y ∝ (w1²-w2²) vanishes on both diagonals
    const GridField z = realize_on_grid(gens[3], p, 12.0, 64);
    for (int i = 1; i < 64; ++i) {
        CHECK(std::abs(z.at2(i, i)) < 1e-13);
        if (64 - i < 64) CHECK(std::abs(z.at2(i, 64 - i)) < 1e-13);
    }
}

TEST_CASE("grid field io round trip") {
    Params p(2, 0.5);
    const GridField u = realize_on_grid(kernel_fields(p)[0], p, 8.0, 32);
    std::stringstream ss;
    write_grid_field(ss, u, "bubble");
    std::string name;
    const GridField v = read_grid_field(ss, &name);
    CHECK(name == "bubble");
    CHECK(v.N == u.N);
    CHECK(v.L == doctest::Approx(u.L));
    for (std::size_t i = 0; i < u.values.size(); ++i)
        CHECK(v.values[i] == doctest::Approx(u.values[i]));
}

TEST_CASE("grid interpolator accuracy and tail extension") {
    Params p(2, 0.5);
    const RadialProfile U = bubble_profile(p);
    const GridField u = realize_on_grid(kernel_fields(p)[0], p, 12.0, 192);
    const GridInterpolator interp(u, p.tail_exponent());
    for (auto [x, y] : {std::pair{0.13, -0.77}, {3.21, 2.02}, {-7.5, 0.33}}) {
        const double r = std::hypot(x, y);
        CHECK(interp({x, y, 0.0}) == doctest::Approx(U(r)).epsilon(1e-4));
    }
    // outside the box: homogeneous-tail extension stays within ~1% of truth
    const double v = interp({14.0, 6.0, 0.0});
    CHECK(v == doctest::Approx(U(std::hypot(14.0, 6.0))).epsilon(2e-2));
    CHECK_THROWS_AS(interp({25.0, 0.0, 0.0}), OutOfBoxError);
}

TEST_CASE("tail envelopes: closed forms and asymptotics") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        // j=0, ell=0 is a multiple of the bubble
        const RadialProfile U = bubble_profile(p);
        const double ratio0 = tail_envelope(p, 0, 0, 1.3) / U(1.3);
        for (double r : {0.2, 2.5, 8.0})
            CHECK(tail_envelope(p, 0, 0, r) == doctest::Approx(ratio0 * U(r)).epsilon(1e-12));
        // j=1, ell=0 is a multiple of (1+r^2)^{-(nu+1)}
        const double nu = 0.5 * (n - 2.0 * s);
        const double ratio1 =
            tail_envelope(p, 0, 1, 1.3) / std::pow(1.0 + 1.3 * 1.3, -nu - 1.0);
        for (double r : {0.2, 2.5, 8.0})
            CHECK(tail_envelope(p, 0, 1, r) ==
                  doctest::Approx(ratio1 * std::pow(1.0 + r * r, -nu - 1.0)).epsilon(1e-12));
        // leading tail coefficient; the approach is O(r^{-2s}), so test the
        // rate rather than a fixed tolerance
        for (int ell : {0, 1, 2, 3, 4}) {
            const double cinf = tail_envelope_infinity(p, ell);
            const double R = 4000.0;
            const double e1 =
                std::abs(tail_envelope(p, ell, 0, R) * std::pow(R, n - 2.0 * s) - cinf);
            const double e2 = std::abs(tail_envelope(p, ell, 0, 4.0 * R) *
                                           std::pow(4.0 * R, n - 2.0 * s) -
                                       cinf);
            CHECK(e1 < 10.0 * std::pow(R, -2.0 * s) * cinf);
            CHECK(e2 < (std::pow(4.0, -2.0 * s) + 0.15) * e1 + 1e-12);
        }
    }
}
