// Problem parameters and the closed-form scalar coefficients of the
// sharp affine fractional Sobolev theory: conformal eigenvalues Λ_k,
// the spectral gap γ_s, Funk–Hecke coefficients β_{ℓ,s} and their
// normalized ratios ρ_{ℓ,s}, and the even-sector margin η_{4,s}.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace affinefrac {

// Fractional order s ∈ (0,1) on R^n, n > 2s.  Derived scalars:
//   q = 2n/(n-2s)   critical Lebesgue exponent
//   r = n/(2s)      power-mean exponent of the affine energy
//   a = n/2
//   gamma_s = 2s/(a+s+1)   sharp local spectral gap
struct Params {
    int n = 2;
    double s = 0.5;

    Params() = default;
    Params(int n_, double s_) : n(n_), s(s_) {
        if (n < 2) throw std::invalid_argument("Params: n must be >= 2");
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("Params: s must lie in (0,1)");
        if (!(n > 2.0 * s)) throw std::invalid_argument("Params: need n > 2s");
    }

    double q() const { return 2.0 * n / (n - 2.0 * s); }
    double r() const { return n / (2.0 * s); }
    double a() const { return 0.5 * n; }
    double gamma_s() const { return 2.0 * s / (a() + s + 1.0); }
    // decay exponent of the bubble, (n-2s)
    double tail_exponent() const { return n - 2.0 * s; }
};

// Λ_k = Γ(k+a+s)/Γ(k+a-s), evaluated through log-Gamma differences.
double lambda_k(const Params& p, int k);

// The sharp gap 2s/(a+s+1); equals 1 - Λ_1/Λ_2 as an algebraic identity.
double gamma_gap(const Params& p);

// Gegenbauer polynomial C_ell^lam(t) by the three-term recurrence.
double gegenbauer(int ell, double lam, double t);

// Pochhammer symbol (x)_k = x(x+1)...(x+k-1), with (x)_0 = 1.
double pochhammer(double x, int k);

// Surface measure |S^{n-1}|.
double sphere_surface(int n);

// Funk–Hecke coefficient of the kernel |ξ·θ|^{2s} on degree-ℓ spherical
// harmonics of S^{n-1}, evaluated by quadrature:
//   β_{ℓ,s} = |S^{n-2}| / (|S^{n-1}| C_ℓ^{(n-2)/2}(1))
//             ∫_{-1}^{1} |t|^{2s} C_ℓ^{(n-2)/2}(t) (1-t²)^{(n-3)/2} dt.
// The integral is split at t = 0 and substituted u = t², which turns the
// weight into u^{s-1}(1-u)^{(n-3)/2}; both endpoint singularities are
// handled by Gauss–Jacobi nodes.  n = 2 has weight exponent -1/2 at u = 1.
double beta_funk_hecke_numeric(const Params& p, int ell);

// Closed form of ρ_{ℓ,s} = β_{ℓ,s}/β_{0,s}:
//   ρ = 0 for odd ℓ, ρ_0 = 1,
//   ρ_{2m,s} = (-1)^{m+1} s (1-s)_{m-1} / ((n/2+s)_m).
double rho_closed_form(const Params& p, int ell);

// β_{0,s} in closed form (used to cross-check the quadrature):
//   n = 2: Γ(1+2s) / (2^{2s} Γ(1+s)²),  n >= 3: via the Beta function.
double beta0_closed_form(const Params& p);

// Even-sector coercivity constant and its margin over γ_s:
//   η_{4,s} = 1 - Λ_1/Λ_4 - 2s(1-s)²/((a+s)(a+s+1)²),
//   margin  = η_{4,s} - γ_s  (strictly positive for all valid Params).
struct Eta4Result {
    double eta4 = 0.0;
    double margin = 0.0;
};
Eta4Result eta4_margin(const Params& p);

// Quadrature failed to stabilize; carries the last two refinement estimates.
class QuadratureError : public std::runtime_error {
  public:
    QuadratureError(const std::string& what, double prev, double last)
        : std::runtime_error(what + " (estimates " + std::to_string(prev) +
                             " -> " + std::to_string(last) + ")"),
          previous_estimate(prev), last_estimate(last) {}
    double previous_estimate;
    double last_estimate;
};

}  // namespace affinefrac
