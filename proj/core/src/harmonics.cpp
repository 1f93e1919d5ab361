#include "affinefrac/harmonics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace affinefrac {

int harmonic_count(int n, int ell) {
    if (ell == 0) return 1;
    if (n == 2) return 2;
    if (n == 3) return 2 * ell + 1;
    throw std::invalid_argument("harmonic_count: n in {2,3}");
}

double assoc_legendre(int ell, int m, double x) {
    // P_m^m = (2m-1)!! (1-x^2)^{m/2}, then upward recurrence in degree.
    double pmm = 1.0;
    if (m > 0) {
        const double somx2 = std::sqrt(std::max(0.0, 1.0 - x * x));
        double fact = 1.0;
        for (int i = 0; i < m; ++i) {
            pmm *= fact * somx2;
            fact += 2.0;
        }
    }
    if (ell == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (ell == m + 1) return pmmp1;
    double pll = 0.0;
    for (int l = m + 2; l <= ell; ++l) {
        pll = (x * (2.0 * l - 1.0) * pmmp1 - (l + m - 1.0) * pmm) / (l - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

int harmonic_count_upto(int n, int ell_max) {
    int total = 0;
    for (int ell = 0; ell <= ell_max; ++ell) total += harmonic_count(n, ell);
    return total;
}

void eval_harmonics_upto(int n, int ell_max, const std::array<double, 3>& w,
                         double* out) {
    if (n == 2) {
        const double c1 = w[0], s1 = w[1];  // cos/sin of phi for a unit vector
        out[0] = 1.0;
        double ck = 1.0, sk = 0.0;
        int pos = 1;
        const double r2 = std::sqrt(2.0);
        for (int ell = 1; ell <= ell_max; ++ell) {
            const double cn = ck * c1 - sk * s1;
            const double sn = sk * c1 + ck * s1;
            ck = cn;
            sk = sn;
            out[pos++] = r2 * ck;
            out[pos++] = r2 * sk;
        }
        return;
    }
    // n = 3: shared P_ell^m and azimuth recurrences.
    const double z = w[2];
    const double rho = std::hypot(w[0], w[1]);
    const double cphi = rho > 0 ? w[0] / rho : 1.0;
    const double sphi = rho > 0 ? w[1] / rho : 0.0;
    int pos = 0;
    std::vector<double> cm(ell_max + 1), sm(ell_max + 1);
    cm[0] = 1.0;
    sm[0] = 0.0;
    for (int m = 1; m <= ell_max; ++m) {
        cm[m] = cm[m - 1] * cphi - sm[m - 1] * sphi;
        sm[m] = sm[m - 1] * cphi + cm[m - 1] * sphi;
    }
    for (int ell = 0; ell <= ell_max; ++ell) {
        out[pos++] = ell == 0 ? 1.0
                              : std::sqrt(2.0 * ell + 1.0) * assoc_legendre(ell, 0, z);
        for (int m = 1; m <= ell; ++m) {
            const double norm = std::sqrt(2.0 * (2.0 * ell + 1.0) *
                                          std::exp(std::lgamma(ell - m + 1.0) -
                                                   std::lgamma(ell + m + 1.0)));
            const double plm = assoc_legendre(ell, m, z);
            out[pos++] = norm * plm * cm[m];
            out[pos++] = norm * plm * sm[m];
        }
    }
}

double eval_harmonic(int n, int ell, int idx, const std::array<double, 3>& w) {
    if (ell == 0) return 1.0;
    if (n == 2) {
        const double phi = std::atan2(w[1], w[0]);
        const double c = std::sqrt(2.0);
        return idx == 0 ? c * std::cos(ell * phi) : c * std::sin(ell * phi);
    }
    if (n != 3) throw std::invalid_argument("eval_harmonic: n in {2,3}");
    const double z = w[2];
    if (idx == 0)  // zonal: <P_ell^2> = 1/(2 ell + 1) on S^2
        return std::sqrt(2.0 * ell + 1.0) * assoc_legendre(ell, 0, z);
    const int m = (idx + 1) / 2;
    if (m > ell) throw std::invalid_argument("eval_harmonic: idx out of range");
    const double phi = std::atan2(w[1], w[0]);
    const double norm = std::sqrt(2.0 * (2.0 * ell + 1.0) *
                                  std::exp(std::lgamma(ell - m + 1.0) -
                                           std::lgamma(ell + m + 1.0)));
    const double plm = assoc_legendre(ell, m, z);
    return (idx % 2 == 1) ? norm * plm * std::cos(m * phi)
                          : norm * plm * std::sin(m * phi);
}

}  // namespace affinefrac
