// Physical-space backend: directional energies A_ξ, the bilinear pairing
// 𝔞_ξ, the variance correction R_s, the Φ power mean, affine energy,
// star-body geometry, and affine deficits for grid fields.
//
// Spectra are evaluated through a tail-split representation: bubble-type
// far fields (which are not summable, so their periodization pollutes a
// plain DFT) are fitted on radial shells against envelope profiles with
// closed-form Bessel-K Fourier transforms and handled analytically; the
// fast-decaying remainder is tapered and transformed by FFT.  Pairings
// combine an exact tail x tail block (Funk–Hecke angular factors times
// cached radial integrals), lattice sums for the mixed and remainder
// blocks, and an exactly-sampled fine patch around the frequency origin.
#pragma once

#include <array>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "affinefrac/fields.hpp"
#include "affinefrac/params.hpp"
#include "affinefrac/quadrature.hpp"

namespace affinefrac {

struct GridOptions {
    double L = 24.0;
    int N = 256;
    int sphere_res = 64;      // n=2: angles; n=3: polar count (azimuth = 2x)
    int tail_ell_max = 4;
    int patch_radius = 4;     // coarse cells covered by the fine patch
    int patch_refine = 8;     // fine cells per coarse cell and axis
    double taper_start = 0.70;  // fraction of L
    double taper_end = 0.92;
    double fit_shell_lo = 0.55;
    double fit_shell_hi = 0.95;
    int fit_shells = 12;
    double spread_tolerance = 1e-2;

    static GridOptions defaults(int n);
};

struct TailComponent {
    int ell = 0;
    int idx = 0;
    double c0 = 0.0;  // coefficient of the K_s envelope
    double c1 = 0.0;  // coefficient of the K_{1-s} envelope
};

// Tail-split spectrum of one grid field.
struct GridSpectrum {
    std::vector<TailComponent> tails;
    std::vector<std::complex<double>> tail_spec;  // analytic part on the lattice
    std::vector<std::complex<double>> rem;        // FFT of the tapered remainder
    std::vector<std::complex<double>> patch_tail;
    std::vector<std::complex<double>> patch_rem;
    double lq = 0.0;  // grid L^q norm of the field
};

struct Calibration {
    double c_cal = 1.0;   // directional-table constant
    double c_hs = 1.0;    // isotropic seminorm constant
    double A0 = 0.0;      // A_ξ(U) after calibration (= spectral [U]²)
    double S_grid = 0.0;  // grid sharp constant (deficit of U vanishes)
    double spread = 0.0;  // relative ξ-spread of A_ξ(U)
    double lq_u = 0.0;    // grid L^q norm of the bubble
};

struct DirectionalEnergyTable {
    std::vector<double> values;  // A_ξ over the engine's sphere grid
};

struct StarBody {
    std::vector<double> gauge;                    // p_u(ξ) on the sphere grid
    std::vector<std::array<double, 3>> boundary;  // p_u(ξ)^{-1} ξ
    double volume = 0.0;                          // |K_u|
};

class CalibrationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class GridEngine {
  public:
    GridEngine(const Params& p, GridOptions opt = {});
    // convenience: defaults for the dimension
    static GridEngine with_defaults(const Params& p);

    const Params& params() const { return p_; }
    const GridOptions& options() const { return opt_; }
    const SphereGrid& xi_grid() const { return xi_; }
    const Calibration& cal() const { return cal_; }
    const GridField& bubble_field() const { return u_field_; }
    const GridSpectrum& bubble() const { return u_spec_; }
    double spectral_seminorm_u() const { return sem_u_spectral_; }

    GridSpectrum analyze(const GridField& u) const;

    // Calibrated pairing  𝔞_ξ(u,v); A_ξ(u) = 𝔞_ξ(u,u).
    double a_xi_bilinear(const GridSpectrum& u, const GridSpectrum& v,
                         const std::array<double, 3>& xi) const;
    double a_xi(const GridSpectrum& u, const std::array<double, 3>& xi) const {
        return a_xi_bilinear(u, u, xi);
    }
    DirectionalEnergyTable axi_table(const GridSpectrum& u) const;
    std::vector<double> bilinear_table(const GridSpectrum& u, const GridSpectrum& v) const;

    // Calibrated discrete seminorm [u]² and its bilinear form <u,v>.
    double seminorm_sq(const GridSpectrum& u) const;
    double seminorm_inner(const GridSpectrum& u, const GridSpectrum& v) const;

    // Φ(a) = <a^{-r}>^{-1/r} over the ξ-grid; requires positive input.
    double phi_mean(const std::vector<double>& a) const;

    // Affine energy: Φ of the directional table, cross-checked against the
    // star-body volume route (the two agree by algebra; a mismatch beyond
    // 1e-12 aborts).
    double e_aff(const GridSpectrum& u) const;

    // L^q norm by grid sum is cached in the spectrum during analyze().
    double deficit_aff(const GridSpectrum& u) const;
    double deficit_frac(const GridSpectrum& u) const;

    // Variance correction of the directional linear form L_ξ(φ) = 𝔞_ξ(U,φ).
    struct VarianceCorrection {
        double variance = 0.0;
        double r_s = 0.0;
    };
    VarianceCorrection variance_correction(const GridSpectrum& phi) const;

    StarBody gauge_and_body(const GridSpectrum& u) const;
    void export_body_csv(const std::string& path, const StarBody& body) const;

    double lq_norm_grid(const GridField& u) const;

  private:
    Params p_;
    GridOptions opt_;
    SphereGrid xi_;
    int N_;
    double L_, h_;
    std::size_t lattice_size_;

    // lattice caches
    std::vector<double> zeta_axis_;     // frequency per axis index
    std::vector<double> phase_axis_;    // (-1)^{m} per axis index
    std::vector<float> in_patch_;       // 1 if node covered by the fine patch
    std::vector<double> k0_, k1_;       // envelope spectra on the lattice
    std::vector<double> fidx_;          // fine patch axis coordinates
    std::vector<double> fk0_, fk1_;     // envelope spectra on the patch
    std::vector<std::complex<double>> emat_;  // partial-DFT matrix (nf x N)
    int nf_ = 0;

    // tail machinery
    int n_harm_ = 0;
    std::vector<std::array<int, 2>> harm_index_;  // (ell, idx) per slot
    std::vector<std::vector<double>> tau_tables_;  // [ell*2+j] radial samples
    double tau_rmax_ = 0.0;
    std::vector<double> g0_table_, g1_table_;  // x^s K_s, x^{1-s} K_{1-s}
    double g_xmax_ = 0.0;

    // fit geometry (fixed per engine)
    std::vector<double> shell_radii_;
    std::vector<std::array<double, 3>> fit_dirs_;
    std::vector<double> fit_weights_;
    std::vector<double> fit_harm_;  // harmonics at fit dirs (dir-major)

    // tail x tail data
    double rad_tt_[2][2] = {{0, 0}, {0, 0}};  // ∫ ρ^{n-1+2s} k_j k_j' dρ
    struct AngularTerm {
        int k = 0;   // n=2: harmonic frequency; n=3: slot of Y_{L,M}
        double coef = 0.0;
        bool sine = false;  // n=2 only: cos vs sin of k*phi_xi
    };
    std::vector<std::vector<AngularTerm>> tt_angular_;  // per slot pair

    // bubble reference
    GridField u_field_;
    GridSpectrum u_spec_;
    double sem_u_spectral_ = 0.0;
    Calibration cal_;

    void build_lattice_caches();
    void build_tail_tables();
    void build_tt_angular();
    double tau_eval(int ell, int j, double r) const;
    double raw_pair(const GridSpectrum& u, const GridSpectrum& v,
                    const std::array<double, 3>& xi) const;
    double raw_seminorm(const GridSpectrum& u, const GridSpectrum& v) const;
    double tt_block(const GridSpectrum& u, const GridSpectrum& v,
                    const std::array<double, 3>& xi) const;
    double tt_block_iso(const GridSpectrum& u, const GridSpectrum& v) const;
    std::vector<double> raw_table(const GridSpectrum& u, const GridSpectrum& v) const;
};

// Linear combination of spectra (tails, lattice and patch arrays are all
// linear in the field; the cached L^q norm is not and is reset to 0).
GridSpectrum lin_comb(double a, const GridSpectrum& u, double b, const GridSpectrum& v);

}  // namespace affinefrac
