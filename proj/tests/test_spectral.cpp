#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "affinefrac/fields.hpp"
#include "affinefrac/hypergeom.hpp"
#include "affinefrac/spectral.hpp"

using namespace affinefrac;

TEST_CASE("seminorm of single modes") {
    Params p(2, 0.5);
    SphereCoeffs c;
    c.ell = 0;
    c.coeffs = {0.0, 0.0, 1.0};  // a_2 = 1
    CHECK(seminorm_sq(p, c) == doctest::Approx(2.5).epsilon(1e-14));  // Λ_2 = 2.5
    SphereCoeffs zero;
    zero.ell = 0;
    zero.coeffs = {0.0, 0.0, 0.0};
    CHECK(seminorm_sq(p, zero) == doctest::Approx(0.0));
}

TEST_CASE("q_frac_sector on kernel and low modes") {
    Params p(2, 0.5);
    SphereCoeffs a1;
    a1.ell = 0;
    a1.coeffs = {0.0, 1.0};
    CHECK(q_frac_sector(p, a1) == doctest::Approx(0.0).epsilon(1e-14));
    SphereCoeffs a2;
    a2.ell = 0;
    a2.coeffs = {0.0, 0.0, 1.0};
    CHECK(q_frac_sector(p, a2) == doctest::Approx(1.0).epsilon(1e-13));  // Λ2-Λ1 = 1
    // Rayleigh quotient of the pure k=2 mode equals the gap
    CHECK(q_frac_sector(p, a2) / seminorm_sq(p, a2) ==
          doctest::Approx(p.gamma_s()).epsilon(1e-13));
    // k=0 enters with a negative coefficient
    SphereCoeffs a0;
    a0.ell = 0;
    a0.coeffs = {1.0};
    CHECK(q_frac_sector(p, a0) < 0.0);
}

TEST_CASE("seminorm vs physical Gagliardo double integral (n=2)") {
    // The diagonal form is the multiplier normalization of the seminorm;
    // the Gagliardo double integral equals it times c_s beta_0 |S^1|, with
    // c_s = 2∫(1-cos t)/t^{1+2s} = pi at s = 1/2.  Oracle: the directional
    // representation [u]²_gag = |S^1| ∫_0^∞ t^{-1-2s} ||u(.+te)-u||² dt.
    Params p(2, 0.5);
    SpectralEngine eng(p, 16);
    const double diag = seminorm_sq(p, eng.project(bubble_profile(p)));

    const double Lbox = 160.0;
    const int N = 1280;
    const double h = 2.0 * Lbox / N;
    std::vector<double> xs(N);
    for (int i = 0; i < N; ++i) xs[i] = -Lbox + i * h;
    auto U = [](double x, double y) { return 1.0 / std::sqrt(1.0 + x * x + y * y); };
    auto shifted_norm_sq = [&](double t) {
        double acc = 0.0;
#pragma omp parallel for reduction(+ : acc) schedule(static)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const double d = U(xs[i] + t, xs[j]) - U(xs[i], xs[j]);
                acc += d * d;
            }
        return acc * h * h;
    };
    const Rule1D gl = gauss_legendre(20);
    double acc = 0.0;
    const double panels[][2] = {{0.0, 0.5}, {0.5, 2.0}, {2.0, 8.0}, {8.0, 30.0}, {30.0, 80.0}};
    for (auto [a, b] : panels) {
        const Rule1D r = gl.mapped(a, b);
        for (std::size_t i = 0; i < r.nodes.size(); ++i)
            acc += r.weights[i] * std::pow(r.nodes[i], -2.0) * shifted_norm_sq(r.nodes[i]);
    }
    // log-model tail beyond t = 80
    const double f1 = shifted_norm_sq(70.0), f2 = shifted_norm_sq(80.0);
    const double A = (f2 - f1) / std::log(80.0 / 70.0), B = f1 - A * std::log(70.0);
    // ∫_T^∞ t^{-2}(A ln t + B) dt = (A(ln T + 1) + B)/T
    acc += (A * (std::log(80.0) + 1.0) + B) / 80.0;
    const double gag = 2.0 * std::numbers::pi * acc;

    const double cs = std::numbers::pi;  // c_{1/2}
    const double beta0 = beta0_closed_form(p);
    const double constant = cs * beta0 * sphere_surface(2);
    CHECK(gag / constant == doctest::Approx(diag).epsilon(0.01));
}

TEST_CASE("lq_norm: bubble mass, homogeneity, zero, divergence guard") {
    Params p(2, 0.5);
    SpectralEngine eng(p);
    const RadialProfile U = bubble_profile(p);
    // ||U||_4^4 = 2 pi ∫ r (1+r²)^{-2} dr = pi
    const double l4 = eng.lq_norm(U);
    CHECK(std::pow(l4, 4.0) == doctest::Approx(std::numbers::pi).epsilon(1e-10));
    RadialProfile cu{[&U](double r) { return -3.0 * U(r); }, U.decay_exponent};
    CHECK(eng.lq_norm(cu) == doctest::Approx(3.0 * l4).epsilon(1e-12));
    RadialProfile zero{[](double) { return 0.0; }, 5.0};
    CHECK(eng.lq_norm(zero) == doctest::Approx(0.0));
    RadialProfile slow{[](double r) { return 1.0 / (1.0 + r); }, 0.4};
    CHECK_THROWS_AS(eng.lq_norm(slow), std::domain_error);

    // grid-sum cross check of the bubble mass within 1%
    const double Lb = 60.0;
    const int N = 600;
    const double h = 2.0 * Lb / N;
    double qsum = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double x = -Lb + i * h, y = -Lb + j * h;
            const double u = 1.0 / std::sqrt(1.0 + x * x + y * y);
            qsum += u * u * u * u;
        }
    qsum *= h * h;
    CHECK(qsum == doctest::Approx(std::pow(l4, 4.0)).epsilon(0.01));
}

TEST_CASE("sharp constant and radial deficits") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        SpectralEngine eng(p);
        CHECK(eng.sharp_constant() > 0.0);
        const RadialProfile U = bubble_profile(p);
        CHECK(std::abs(eng.deficit_radial(U)) < 1e-10);
        RadialProfile cu{[&U](double r) { return 2.5 * U(r); }, U.decay_exponent};
        CHECK(std::abs(eng.deficit_radial(cu)) < 1e-9);
    }
    // n=2, s=1/2 closed values: [U]² = pi, ||U||_4² = pi^{1/2}, S = pi^{1/2}
    Params p(2, 0.5);
    SpectralEngine eng(p);
    CHECK(eng.sharp_constant() ==
          doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-10));
}

TEST_CASE("deficit along the dilation direction is o(eps^2)") {
    Params p(2, 0.5);
    SpectralEngine eng(p);
    const auto gens = kernel_fields(p);
    const RadialProfile U = gens[0].profile;
    const RadialProfile Z0 = gens[1].profile;
    double prev_ratio = 0.0;
    for (double eps : {4e-2, 2e-2, 1e-2}) {
        RadialProfile u{[&, eps](double r) { return U(r) + eps * Z0(r); },
                        p.tail_exponent()};
        const double ratio = eng.deficit_radial(u) / (eps * eps);
        if (prev_ratio != 0.0) CHECK(std::abs(ratio) < 0.6 * std::abs(prev_ratio));
        prev_ratio = ratio;
    }
}

TEST_CASE("deficit along the degree-two direction: gamma_s eps^2 [rho]^2 + O(eps^3)") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}}) {
        Params p(n, s);
        SpectralEngine eng(p);
        const RadialProfile U = bubble_profile(p);
        const RadialProfile rho = degree_two_test_profile(p);
        const double sem_rho = seminorm_sq(p, eng.project(rho));
        for (double eps : {1e-2, 3e-2}) {
            RadialProfile u{[&, eps](double r) { return U(r) + eps * rho(r); },
                            p.tail_exponent()};
            const double deficit = eng.deficit_radial(u);
            const double lead = p.gamma_s() * eps * eps * sem_rho;
            CHECK(std::abs(deficit - lead) < 0.5 * eps * lead);
        }
    }
}

TEST_CASE("second variation by finite differences matches the k=2 Hessian") {
    Params p(2, 0.5);
    SpectralEngine eng(p);
    const RadialProfile U = bubble_profile(p);
    const RadialProfile rho = degree_two_test_profile(p);
    const SphereCoeffs crho = eng.project(rho);
    const double q_rho = q_frac_sector(p, crho);  // true radial Hessian of rho
    double err_prev = 1e9;
    for (double t : {2e-2, 1e-2, 5e-3}) {
        RadialProfile up{[&, t](double r) { return U(r) + t * rho(r); }, p.tail_exponent()};
        RadialProfile um{[&, t](double r) { return U(r) - t * rho(r); }, p.tail_exponent()};
        const double fd = (eng.deficit_radial(up) + eng.deficit_radial(um)) / (2.0 * t * t);
        const double err = std::abs(fd - q_rho);
        CHECK(err < 0.3 * err_prev);  // quadratic-in-t convergence
        err_prev = err;
    }
}

TEST_CASE("degree-two affine Hessian: kernel flatness and projection form") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        SpectralEngine eng(p);
        const SectorField z = kernel_fields(p)[3];
        const auto hz = eng.q_aff_degree2(z);
        const double semz = seminorm_sq(p, eng.basis(2).project(z.profile));
        CHECK(std::abs(hz.value) < 1e-10 * semz);

        // orthogonal case: pure k=3 mode has Q_frac(f,z) small only if z has no
        // k=3 part (it does), so use a z-orthogonalized random field instead.
        std::mt19937_64 rng(7);
        std::normal_distribution<double> gauss;
        const SphereCoeffs cz = eng.basis(2).project(z.profile);
        SphereCoeffs f;
        f.ell = 2;
        f.coeffs.resize(cz.coeffs.size());
        for (auto& c : f.coeffs) c = gauss(rng);
        // remove the z-component in the Q_frac inner product -> correction = 0
        const double alpha = q_frac_inner(p, f, cz) / q_frac_sector(p, cz);
        for (std::size_t k = 0; k < f.coeffs.size(); ++k)
            f.coeffs[k] -= alpha * cz.coeffs[k];
        const double qf = q_frac_sector(p, f);
        const double corr = std::pow(q_frac_inner(p, f, cz), 2) / q_frac_sector(p, cz);
        CHECK(corr < 1e-16 * qf);

        // random fields: after projecting z out in the Hs product, the affine
        // quotient stays above gamma_s.
        for (int trial = 0; trial < 5; ++trial) {
            SphereCoeffs g;
            g.ell = 2;
            g.coeffs.resize(cz.coeffs.size());
            for (auto& c : g.coeffs) c = gauss(rng);
            const double beta = inner_hs(p, g, cz) / inner_hs(p, cz, cz);
            for (std::size_t k = 0; k < g.coeffs.size(); ++k)
                g.coeffs[k] -= beta * cz.coeffs[k];
            const double qaff = q_frac_sector(p, g) -
                                std::pow(q_frac_inner(p, g, cz), 2) / q_frac_sector(p, cz);
            CHECK(qaff / seminorm_sq(p, g) >= p.gamma_s() - 1e-8);
        }
    }
}

TEST_CASE("affine correction representer matches the z-projection identity") {
    // The rank-one representer W (Bessel-pair envelope) must satisfy
    // W_k ∝ (1 - Λ_1/Λ_k) z_k coefficientwise in the ell = 2 sector, which
    // makes the calibrated correction reproduce Q_frac(f,z)²/Q_frac(z,z).
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        SpectralEngine eng(p, 40);
        const auto rc = eng.affine_correction(2);
        const SphereCoeffs cz = eng.basis(2).project(kernel_fields(p)[3].profile);
        const double l1 = lambda_k(p, 1);
        const double ref = rc.w_coeffs[0] / ((1.0 - l1 / lambda_k(p, 2)) * cz.coeffs[0]);
        for (std::size_t k = 0; k < rc.w_coeffs.size(); ++k) {
            const double lk = lambda_k(p, 2 + static_cast<int>(k));
            CHECK(rc.w_coeffs[k] ==
                  doctest::Approx(ref * (1.0 - l1 / lk) * cz.coeffs[k]).epsilon(1e-8));
        }
        // the calibrated rank-one form equals the projection form on random f
        std::mt19937_64 rng(11);
        std::normal_distribution<double> gauss;
        for (int trial = 0; trial < 4; ++trial) {
            SphereCoeffs f;
            f.ell = 2;
            f.coeffs.resize(rc.w_coeffs.size());
            for (auto& c : f.coeffs) c = gauss(rng);
            double pairing = 0.0;
            for (std::size_t k = 0; k < f.coeffs.size(); ++k)
                pairing += lambda_k(p, 2 + static_cast<int>(k)) * rc.w_coeffs[k] * f.coeffs[k];
            const double via_representer = rc.factor * pairing * pairing;
            const double via_projection =
                std::pow(q_frac_inner(p, f, cz), 2) / q_frac_sector(p, cz);
            CHECK(via_representer == doctest::Approx(via_projection).epsilon(1e-8));
        }
    }
}

TEST_CASE("rayleigh gaps per sector") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        SpectralEngine eng(p, 40);
        const double gamma = p.gamma_s();
        CHECK(eng.rayleigh_gap(0) == doctest::Approx(gamma).epsilon(1e-8));
        CHECK(eng.rayleigh_gap(1) == doctest::Approx(gamma).epsilon(1e-8));
        const double gap2 = eng.rayleigh_gap(2);
        CHECK(gap2 >= gamma - 1e-8);
        const double gap3 = eng.rayleigh_gap(3);
        CHECK(gap3 ==
              doctest::Approx(1.0 - lambda_k(p, 1) / lambda_k(p, 3)).epsilon(1e-8));
        // even sectors >= 4: above gamma_s and above the closed-form bound
        for (int ell : {4, 6}) {
            const double gap = eng.rayleigh_gap(ell);
            const double rho = rho_closed_form(p, ell);
            const double bound =
                1.0 - lambda_k(p, 1) / lambda_k(p, ell) - (n + 2.0 * s) / s * rho * rho;
            CHECK(gap > gamma);
            CHECK(gap >= bound - 1e-10);
        }
        // truncation insensitivity of the minimum
        RayleighOptions hi;
        hi.kmax = 60;
        CHECK(eng.rayleigh_gap(0, hi) == doctest::Approx(eng.rayleigh_gap(0)).epsilon(1e-9));
        CHECK(std::abs(eng.rayleigh_gap(2, hi) - eng.rayleigh_gap(2)) < 5e-3);
    }
}

TEST_CASE("konig sweep: quotient below gamma, extrapolation, positive slope") {
    for (auto [n, s] : {std::pair{2, 0.5}, {3, 0.5}, {3, 0.25}}) {
        Params p(n, s);
        SpectralEngine eng(p);
        const auto sweep = eng.konig_sweep({0.01, 0.02, 0.04, 0.06, 0.08, 0.1});
        for (const auto& row : sweep.rows) CHECK(row.quotient < p.gamma_s());
        CHECK(sweep.kappa_hat > 0.0);
        CHECK(std::abs(sweep.gamma_extrapolated - p.gamma_s()) < 1e-3);
        CHECK(sweep.fit_ok);
    }
}
