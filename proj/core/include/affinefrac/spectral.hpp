// Sphere-side (quadrature-exact) evaluation of fractional seminorms,
// sector Hessians, the degree-two affine Hessian, radial deficits, the
// degree-two perturbation sweep, and constrained sector Rayleigh minima.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "affinefrac/fields.hpp"
#include "affinefrac/params.hpp"

namespace affinefrac {

// Coefficient-level forms. Both SphereCoeffs must live in the same sector.
double seminorm_sq(const Params& p, const SphereCoeffs& c);
double inner_hs(const Params& p, const SphereCoeffs& a, const SphereCoeffs& b);
// Q_frac^(ell) = sum_k (Λ_k - Λ_1) a_k²  (k = 0 term enters with Λ_0-Λ_1 < 0).
double q_frac_sector(const Params& p, const SphereCoeffs& c);
double q_frac_inner(const Params& p, const SphereCoeffs& a, const SphereCoeffs& b);

class DegenerateFormError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SpectralReport {
    double seminorm_sq = 0.0;
    double lq_norm = 0.0;
    double deficit = 0.0;
    std::vector<double> mode_energies;  // Λ_k a_k²
};

struct SweepRow {
    double eps, deficit, eps2_rho2, quotient;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double kappa_hat = 0.0;        // fitted slope: quotient ≈ gamma_fit - kappa_hat * eps
    double gamma_fit = 0.0;        // intercept of the linear fit
    double gamma_extrapolated = 0.0;  // Richardson from the two smallest eps
    double fit_residual = 0.0;     // max |fit - data|
    bool fit_ok = true;
};

struct RayleighOptions {
    int kmax = 40;
    bool include_affine_correction = true;
};

struct DegreeTwoHessian {
    double value = 0.0;       // Q_U^(2)(f)
    double correction = 0.0;  // R_s^(2)(f) = Q_frac(f,z)² / Q_frac(z,z)
};

class SpectralEngine {
  public:
    explicit SpectralEngine(const Params& p, int kmax = 40, int quad_order = 0);

    const Params& params() const { return p_; }
    int kmax() const { return kmax_; }

    const SectorBasis& basis(int ell) const;

    SphereCoeffs project(const RadialProfile& f, int ell = 0) const {
        return basis(ell).project(f);
    }

    // ||f Y_ell||_{L^q}:  (|S^{n-1}| <|Y|^q> ∫ |f|^q r^{n-1} dr)^{1/q}.
    double lq_norm(const SectorField& f) const;
    double lq_norm(const RadialProfile& f) const;

    // Sharp constant S_{n,s} = [U]² / ||U||_q², cached.
    double sharp_constant() const;

    // Radial affine deficit δ_aff(u) = δ_frac(u) = [u]² - S ||u||_q².
    double deficit_radial(const RadialProfile& u) const;
    SpectralReport report_radial(const RadialProfile& u) const;

    // Degree-two affine Hessian via the projection identity.
    DegreeTwoHessian q_aff_degree2(const SectorField& f) const;

    // Constrained sector Rayleigh minimum of Q_U^(ell) / [.]².
    double rayleigh_gap(int ell, const RayleighOptions& opt = {}) const;

    // δ_aff(U+ερ)/(ε²[ρ]²) over the given ε, with fit and extrapolation.
    SweepResult konig_sweep(const std::vector<double>& eps_list,
                            double fit_tolerance = 5e-3) const;

    // Rank-one data of the affine correction in sector ell (even, >= 2):
    // R_s^(ell)(f) = factor * (Σ_k Λ_k W_k a_k)².  W is the sector
    // projection of the Bessel-pair tail envelope; the overall constant is
    // calibrated once at ell = 2 against the closed projection identity.
    struct RankOneCorrection {
        std::vector<double> w_coeffs;  // W_k, k = ell..kmax
        double factor = 0.0;           // kappa * rho_{ell,s}²
    };
    RankOneCorrection affine_correction(int ell) const;

    // Q_frac(z,z) in the ell = 2 sector at this engine's truncation.
    double q_frac_zz() const;

  private:
    Params p_;
    int kmax_;
    int quad_order_;
    mutable std::map<int, std::unique_ptr<SectorBasis>> bases_;
    mutable std::optional<double> sharp_;
    mutable std::optional<double> kappa_;  // calibrated correction constant
    mutable std::optional<SphereCoeffs> z_coeffs_;

    const SphereCoeffs& z_in_sector2() const;
    double kappa() const;
};

void write_sweep_csv(const std::string& path, const SweepResult& r);

}  // namespace affinefrac
