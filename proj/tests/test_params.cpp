#include <doctest.h>

#include <cmath>
#include <vector>

#include "affinefrac/params.hpp"

using namespace affinefrac;

namespace {
const std::vector<double> kSGrid = {0.1, 0.25, 0.5, 0.75, 0.9};
}

TEST_CASE("Params validates and derives exponents") {
    Params p(2, 0.5);
    CHECK(p.q() == doctest::Approx(4.0));
    CHECK(p.r() == doctest::Approx(2.0));
    CHECK(p.a() == doctest::Approx(1.0));
    CHECK(p.gamma_s() == doctest::Approx(0.4));
    CHECK_THROWS_AS(Params(1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(Params(2, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(Params(2, -0.1), std::invalid_argument);
    for (int n = 2; n <= 6; ++n)
        for (double s : kSGrid) {
            Params q(n, s);
            CHECK(q.q() > 2.0);
            CHECK(q.r() > 1.0);
            CHECK(q.gamma_s() > 0.0);
            CHECK(q.gamma_s() < 1.0);
        }
}

TEST_CASE("lambda_k half-integer and integer Gamma identities") {
    Params p2(2, 0.5);
    // Gamma(1.5)/Gamma(0.5) = 1/2, Gamma(2.5)/Gamma(1.5) = 3/2
    CHECK(lambda_k(p2, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(lambda_k(p2, 1) == doctest::Approx(1.5).epsilon(1e-14));
    Params p3(3, 0.5);
    for (int k = 0; k <= 4; ++k)
        CHECK(lambda_k(p3, k) == doctest::Approx(k + 1.0).epsilon(1e-14));
}

TEST_CASE("lambda_k is strictly increasing") {
    for (int n = 2; n <= 6; ++n)
        for (double s : kSGrid) {
            Params p(n, s);
            double prev = lambda_k(p, 0);
            for (int k = 1; k <= 24; ++k) {
                const double cur = lambda_k(p, k);
                CHECK(cur > prev);
                prev = cur;
            }
        }
}

TEST_CASE("gap identity 1 - L1/L2 = 2s/(a+s+1) to 1e-12") {
    CHECK(gamma_gap(Params(2, 0.5)) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(gamma_gap(Params(3, 0.5)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    for (int n = 2; n <= 6; ++n)
        for (double s : kSGrid) {
            Params p(n, s);
            const double viaLambda = 1.0 - lambda_k(p, 1) / lambda_k(p, 2);
            CHECK(std::abs(viaLambda - p.gamma_s()) < 1e-12);
        }
}

TEST_CASE("gegenbauer recurrence basics") {
    // C_2^1(t) = 4t^2 - 1, so C_2^1(1) = 3
    CHECK(gegenbauer(2, 1.0, 1.0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(gegenbauer(0, 0.7, -0.3) == doctest::Approx(1.0));
    // odd parity: C_3(-t) = -C_3(t)
    for (double t : {0.1, 0.37, 0.92})
        CHECK(gegenbauer(3, 1.5, -t) == doctest::Approx(-gegenbauer(3, 1.5, t)));
}

TEST_CASE("pochhammer") {
    CHECK(pochhammer(3.7, 0) == doctest::Approx(1.0));
    CHECK(pochhammer(1.0, 4) == doctest::Approx(24.0));
    CHECK(pochhammer(0.5, 2) == doctest::Approx(0.75));
}

TEST_CASE("beta quadrature: symmetry means and odd vanishing") {
    // <|xi.theta|> on S^2 is 1/2; on S^1 it is 2/pi
    CHECK(beta_funk_hecke_numeric(Params(3, 0.5), 0) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(beta_funk_hecke_numeric(Params(2, 0.5), 0) ==
          doctest::Approx(2.0 / std::acos(-1.0)).epsilon(1e-12));
    for (int n = 2; n <= 4; ++n)
        for (double s : kSGrid) {
            Params p(n, s);
            for (int ell = 1; ell <= 13; ell += 2)
                CHECK(std::abs(beta_funk_hecke_numeric(p, ell)) < 1e-12);
        }
}

TEST_CASE("beta quadrature matches rho closed form to 1e-10, even ell <= 12") {
    for (int n = 2; n <= 6; ++n)
        for (double s : kSGrid) {
            Params p(n, s);
            const double b0 = beta_funk_hecke_numeric(p, 0);
            CHECK(b0 == doctest::Approx(beta0_closed_form(p)).epsilon(1e-12));
            for (int ell = 2; ell <= 12; ell += 2) {
                const double ratio = beta_funk_hecke_numeric(p, ell) / b0;
                CHECK(std::abs(ratio - rho_closed_form(p, ell)) < 1e-10);
            }
        }
}

TEST_CASE("rho closed form values and ratio law") {
    Params p(2, 0.5);
    CHECK(rho_closed_form(p, 0) == doctest::Approx(1.0));
    CHECK(rho_closed_form(p, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(rho_closed_form(p, 4) == doctest::Approx(-1.0 / 15.0).epsilon(1e-14));
    for (int n = 2; n <= 6; ++n)
        for (double s : kSGrid) {
            Params q(n, s);
            for (int m = 1; m <= 5; ++m) {
                const double r1 = std::abs(rho_closed_form(q, 2 * m + 2));
                const double r0 = std::abs(rho_closed_form(q, 2 * m));
                const double law = (m - s) / (m + 0.5 * n + s);
                CHECK(std::abs(r1 / r0 - law) < 1e-12);
                CHECK(r1 / r0 < 1.0);
            }
        }
}

TEST_CASE("eta4 margin: (3,0.5) oracle and positivity grid") {
    // arithmetic oracle at n=3, s=0.5: Lambda_k = k+1, rho_4 = -1/24,
    // correction (n+2s)/s * rho_4^2 = 1/72
    const double eta4_oracle = 1.0 - 2.0 / 5.0 - 1.0 / 72.0;
    const double margin_oracle = eta4_oracle - 1.0 / 3.0;
    const Eta4Result r3 = eta4_margin(Params(3, 0.5));
    CHECK(std::abs(r3.eta4 - eta4_oracle) < 1e-10);
    CHECK(std::abs(r3.margin - margin_oracle) < 1e-10);
    CHECK(r3.eta4 == doctest::Approx(0.58611).epsilon(1e-4));
    CHECK(r3.margin == doctest::Approx(0.25278).epsilon(1e-4));

    // n=2, s=0.5: Lambda_k = k + 1/2 exactly
    const Eta4Result r2 = eta4_margin(Params(2, 0.5));
    const double eta2 = 1.0 - 1.5 / 4.5 - 2.0 * 0.5 * 0.25 / (1.5 * 2.5 * 2.5);
    CHECK(std::abs(r2.eta4 - eta2) < 1e-12);
    CHECK(r2.margin > 0.0);

    for (int n = 2; n <= 10; ++n)
        for (double s : kSGrid) CHECK(eta4_margin(Params(n, s)).margin > 0.0);
}
