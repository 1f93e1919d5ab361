#include "affinefrac/hypergeom.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace affinefrac {

namespace {

// Plain power series; requires |x| < 1 and converges fast for |x| <= 0.6.
double series_2f1(double a, double b, double c, double x) {
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < 600; ++k) {
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * x;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) return sum;
    }
    throw std::runtime_error("hyp2f1: series did not converge");
}

double gamma_ratio(double num1, double num2, double den1, double den2) {
    // tgamma keeps the sign of Gamma at negative arguments; magnitudes on
    // the parameter ranges used here stay far from overflow.
    return std::tgamma(num1) * std::tgamma(num2) / (std::tgamma(den1) * std::tgamma(den2));
}

}  // namespace

double hyp2f1(double a, double b, double c, double x) {
    if (x >= 1.0) throw std::invalid_argument("hyp2f1: x < 1 required");
    if (x < 0.0) {
        // Pfaff: 2F1(a,b;c;x) = (1-x)^{-a} 2F1(a, c-b; c; x/(x-1)), maps
        // x in (-inf,0) to (0,1).
        const double y = x / (x - 1.0);
        return std::pow(1.0 - x, -a) * hyp2f1(a, c - b, c, y);
    }
    if (x <= 0.6) return series_2f1(a, b, c, x);
    // Connection at 1 (15.3.6); c-a-b non-integer on our parameter ranges.
    const double cab = c - a - b;
    const double f1 = gamma_ratio(c, cab, c - a, c - b) * series_2f1(a, b, 1.0 - cab, 1.0 - x);
    const double f2 = gamma_ratio(c, -cab, a, b) * std::pow(1.0 - x, cab) *
                      series_2f1(c - a, c - b, 1.0 + cab, 1.0 - x);
    return f1 + f2;
}

double tail_envelope(const Params& p, int ell, int j, double r) {
    if (j != 0 && j != 1) throw std::invalid_argument("tail_envelope: j in {0,1}");
    const double a = 0.5 * (ell + p.n);
    const double b = 0.5 * (ell + p.n - 2.0 * p.s) + j;
    const double c = ell + 0.5 * p.n;
    const double logG = std::lgamma(a) + std::lgamma(b) - std::lgamma(c) -
                        (p.s - 0.5 * p.n + 1.0 - j) * std::numbers::ln2;
    const double G = std::exp(logG);
    if (r == 0.0) return ell == 0 ? G : 0.0;
    return G * std::pow(r, ell) * hyp2f1(a, b, c, -r * r);
}

double tail_envelope_infinity(const Params& p, int ell) {
    // Dominant term of the x -> -inf expansion: coefficient of r^{-(n-2s)}.
    const double a = 0.5 * (ell + p.n);
    const double b = 0.5 * (ell + p.n - 2.0 * p.s);
    const double c = ell + 0.5 * p.n;
    const double logG = std::lgamma(a) + std::lgamma(b) - std::lgamma(c) -
                        (p.s - 0.5 * p.n + 1.0) * std::numbers::ln2;
    // G * Gamma(c)Gamma(a-b) / (Gamma(a)Gamma(c-b))
    return std::exp(logG + std::lgamma(c) + std::lgamma(a - b) - std::lgamma(a) -
                    std::lgamma(c - b));
}

}  // namespace affinefrac
