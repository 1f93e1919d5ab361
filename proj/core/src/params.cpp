#include "affinefrac/params.hpp"

#include <cmath>
#include <numbers>

#include "affinefrac/quadrature.hpp"

namespace affinefrac {

double lambda_k(const Params& p, int k) {
    if (k < 0) throw std::invalid_argument("lambda_k: k >= 0");
    const double a = p.a();
    return std::exp(std::lgamma(k + a + p.s) - std::lgamma(k + a - p.s));
}

double gamma_gap(const Params& p) { return p.gamma_s(); }

double gegenbauer(int ell, double lam, double t) {
    if (ell < 0) throw std::invalid_argument("gegenbauer: ell >= 0");
    if (ell == 0) return 1.0;
    double cm2 = 1.0;
    double cm1 = 2.0 * lam * t;
    if (ell == 1) return cm1;
    double c = 0.0;
    for (int k = 2; k <= ell; ++k) {
        c = (2.0 * t * (k + lam - 1.0) * cm1 - (k + 2.0 * lam - 2.0) * cm2) / k;
        cm2 = cm1;
        cm1 = c;
    }
    return c;
}

double pochhammer(double x, int k) {
    if (k < 0) throw std::invalid_argument("pochhammer: k >= 0");
    double acc = 1.0;
    for (int i = 0; i < k; ++i) acc *= x + i;
    return acc;
}

double sphere_surface(int n) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

namespace {

// ∫_0^1 u^{s-1} (1-u)^{(n-3)/2} C_ell(sqrt(u)) du by Gauss–Jacobi, one
// sign of t at a time.  `sign` = +1 evaluates C_ell(+sqrt u), -1 the
// mirror half; for odd ell the two cancel to roundoff.
double half_integral(const Params& p, int ell, int order, double sign) {
    const double lam = 0.5 * (p.n - 2.0);
    const Rule1D gj = gauss_jacobi(order, 0.5 * (p.n - 3.0), p.s - 0.5);
    // map x in [-1,1] -> u in [0,1]: u = (x+1)/2, weight scale 2^{-(alpha+beta+1)}
    const double scale = std::pow(2.0, -(0.5 * (p.n - 3.0) + (p.s - 0.5) + 1.0));
    double acc = 0.0;
    for (std::size_t i = 0; i < gj.nodes.size(); ++i) {
        const double u = 0.5 * (gj.nodes[i] + 1.0);
        acc += gj.weights[i] * gegenbauer(ell, lam, sign * std::sqrt(u));
    }
    return scale * acc * 0.5;  // the u = t² substitution contributes the 1/2
}

}  // namespace

double beta0_closed_form(const Params& p) {
    if (p.n == 2)
        return std::exp(std::lgamma(1.0 + 2.0 * p.s) - 2.0 * p.s * std::numbers::ln2 -
                        2.0 * std::lgamma(1.0 + p.s));
    // <|t|^{2s}> with density proportional to (1-t^2)^{(n-3)/2} on [-1,1]:
    // B(s+1/2, (n-1)/2) / B(1/2, (n-1)/2)
    auto logbeta = [](double x, double y) {
        return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
    };
    return std::exp(logbeta(p.s + 0.5, 0.5 * (p.n - 1.0)) -
                    logbeta(0.5, 0.5 * (p.n - 1.0)));
}

double beta_funk_hecke_numeric(const Params& p, int ell) {
    if (ell < 0) throw std::invalid_argument("beta: ell >= 0");
    const double lam = 0.5 * (p.n - 2.0);
    // For n = 2 the Gegenbauer weight degenerates (lam = 0); the Chebyshev
    // normalization C_ell^0(1) vanishes.  Use cos(ell*phi) directly, which is
    // the n = 2 zonal harmonic, and the same u = t² Jacobi handling.
    auto front = [&](double cl1) {
        return sphere_surface(p.n - 1) / (sphere_surface(p.n) * cl1);
    };
    auto eval = [&](int order) {
        if (p.n == 2) {
            // (1/2pi) ∫_0^{2pi} |cos phi|^{2s} cos(ell phi) dphi
            //   = (1/pi) ∫_{-1}^{1} |t|^{2s} T_ell(t) / sqrt(1-t²) dt
            const Rule1D gj = gauss_jacobi(order, -0.5, p.s - 0.5);
            const double scale = std::pow(2.0, -(-0.5 + (p.s - 0.5) + 1.0));
            double acc_pos = 0.0, acc_neg = 0.0;
            for (std::size_t i = 0; i < gj.nodes.size(); ++i) {
                const double u = 0.5 * (gj.nodes[i] + 1.0);
                const double t = std::sqrt(u);
                acc_pos += gj.weights[i] * std::cos(ell * std::acos(std::min(1.0, t)));
                acc_neg += gj.weights[i] * std::cos(ell * std::acos(std::max(-1.0, -t)));
            }
            return scale * 0.5 * (acc_pos + acc_neg) / std::numbers::pi;
        }
        const double cl1 = std::exp(std::lgamma(2.0 * lam + ell) - std::lgamma(2.0 * lam) -
                                    std::lgamma(ell + 1.0));
        return front(cl1) *
               (half_integral(p, ell, order, +1.0) + half_integral(p, ell, order, -1.0));
    };
    // The integrand after substitution is polynomial (even ell), so low
    // orders are already exact; refine once to certify.
    int order = std::max(16, ell + 8);
    double prev = eval(order);
    for (int k = 0; k < 4; ++k) {
        order *= 2;
        const double cur = eval(order);
        if (std::abs(cur - prev) <= 1e-13 * (1.0 + std::abs(cur))) return cur;
        prev = cur;
    }
    throw QuadratureError("beta_funk_hecke_numeric did not stabilize", prev, eval(order * 2));
}

double rho_closed_form(const Params& p, int ell) {
    if (ell < 0) throw std::invalid_argument("rho: ell >= 0");
    if (ell % 2 == 1) return 0.0;
    if (ell == 0) return 1.0;
    const int m = ell / 2;
    const double sign = (m % 2 == 0) ? -1.0 : 1.0;  // (-1)^{m+1}
    return sign * p.s * pochhammer(1.0 - p.s, m - 1) / pochhammer(p.a() + p.s, m);
}

Eta4Result eta4_margin(const Params& p) {
    const double a = p.a(), s = p.s;
    Eta4Result out;
    out.eta4 = 1.0 - lambda_k(p, 1) / lambda_k(p, 4) -
               2.0 * s * (1.0 - s) * (1.0 - s) / ((a + s) * (a + s + 1.0) * (a + s + 1.0));
    out.margin = out.eta4 - p.gamma_s();
    return out;
}

}  // namespace affinefrac
