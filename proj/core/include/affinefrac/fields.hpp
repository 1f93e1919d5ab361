// Field representations: radial profiles, sector fields f(r)·Y_{ℓ,m},
// Gegenbauer coefficients on S^n, and Cartesian grid fields, together
// with the named fields of the theory (bubble U, kernel generators,
// degree-two test profile) and the sector <-> sphere transforms.
#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "affinefrac/harmonics.hpp"
#include "affinefrac/params.hpp"
#include "affinefrac/quadrature.hpp"

namespace affinefrac {

struct RadialProfile {
    std::function<double(double)> eval;
    double decay_exponent = 0.0;  // |f(r)| ~ r^{-decay_exponent}

    double operator()(double r) const { return eval(r); }
};

// f(r) Y_{ell,idx}(omega) with the concrete harmonic used for grid
// realization; harmonics are normalized with <Y^2> = 1.
struct SectorField {
    int ell = 0;
    RadialProfile profile;
    int harmonic_idx = 0;
    std::string name;
};

// Coefficients a_k, k = ell..kmax, in the orthonormalized basis
// Psi_{k,ell,m} on S^n.  norm_sq is the L²(S^n) norm of the lifted
// function (for Parseval/truncation accounting).
struct SphereCoeffs {
    int ell = 0;
    std::vector<double> coeffs;  // index k-ell
    double norm_sq = 0.0;

    int kmax() const { return ell + static_cast<int>(coeffs.size()) - 1; }
    double coeff(int k) const { return coeffs.at(static_cast<std::size_t>(k - ell)); }
    double sum_sq() const;
};

class TruncationError : public std::runtime_error {
  public:
    TruncationError(const std::string& w, double lost, double total)
        : std::runtime_error(w + " (lost " + std::to_string(lost) + " of " +
                             std::to_string(total) + ")"),
          lost_mass(lost), total_mass(total) {}
    double lost_mass, total_mass;
};

// Gegenbauer sector basis on S^n for one angular degree ell:
// raw functions (sin θ)^ell C_{k-ell}^{ell+(n-1)/2}(cos θ), orthonormalized
// numerically against |S^{n-1}| (sin θ)^{n-1} dθ via a Gram-matrix Cholesky.
class SectorBasis {
  public:
    SectorBasis(const Params& p, int ell, int kmax, int quad_order = 0);

    const Params& params() const { return p_; }
    int ell() const { return ell_; }
    int kmax() const { return kmax_; }

    // Lift f to g(θ) = ((1+r²)/2)^{(n-2s)/2} f(r), r = tan(θ/2), and expand.
    // If check_truncation, throws TruncationError when the discarded tail of
    // the expansion exceeds `tol` relative to the total mass.
    SphereCoeffs project(const RadialProfile& f, bool check_truncation = false,
                         double tol = 1e-6) const;

    // Pointwise synthesis of the lifted function at angle theta.
    double synth(const SphereCoeffs& c, double theta) const;
    // Value of the orthonormal basis element k at angle theta.
    double basis_value(int k, double theta) const;
    // Radial profile whose lift is the basis element k (a pure mode).
    RadialProfile mode_profile(int k) const;

    // Conformal eigenvalue Λ_k.
    double lam(int k) const { return lambda_[static_cast<std::size_t>(k - ell_)]; }
    const std::vector<double>& lambdas() const { return lambda_; }

  private:
    Params p_;
    int ell_, kmax_;
    std::vector<double> theta_, meas_;          // quadrature nodes, measure
    std::vector<std::vector<double>> basis_;    // orthonormal basis values
    std::vector<std::vector<double>> coef_raw_; // basis in terms of raw Gegenbauer
    std::vector<double> lambda_;
};

// ---------------------------------------------------------------------------
// Named fields

// U(r) = (1+r²)^{-(n-2s)/2}
RadialProfile bubble_profile(const Params& p);

// Kernel generators of the affine Hessian as sector fields:
//   ell=0: U                 amplitude direction
//   ell=0: Z_0 = (n-2s)/2 U + r U'       dilation
//   ell=1: U'(r)             translations (∂_i U = U'(r) ω_i)
//   ell=2: z(r) = -(n-2s) r²/(1+r²) U(r) trace-free affine stretch
std::vector<SectorField> kernel_fields(const Params& p);

// The degree-two equality direction: lift of v_2(Θ) = Θ_{n+1}² - 1/(n+1),
//   ρ(r) = (2/(1+r²))^{(n-2s)/2} ( ((1-r²)/(1+r²))² - 1/(n+1) ).
RadialProfile degree_two_test_profile(const Params& p);

// ---------------------------------------------------------------------------
// Grid fields

struct GridField {
    int n = 2;           // spatial dimension (2 or 3)
    int N = 0;           // points per axis (even)
    double L = 0.0;      // half-width, grid x_i = -L + i*(2L/N)
    std::vector<double> values;  // row-major
    bool truncation_warning = false;

    double h() const { return 2.0 * L / N; }
    std::size_t size() const { return values.size(); }
    double coord(int i) const { return -L + i * h(); }
    double& at2(int i, int j) { return values[static_cast<std::size_t>(i) * N + j]; }
    double at2(int i, int j) const { return values[static_cast<std::size_t>(i) * N + j]; }
    double& at3(int i, int j, int k) {
        return values[(static_cast<std::size_t>(i) * N + j) * N + k];
    }
    double at3(int i, int j, int k) const {
        return values[(static_cast<std::size_t>(i) * N + j) * N + k];
    }
    // Largest |value| on the outermost grid shell.
    double boundary_max() const;
};

GridField operator+(const GridField& a, const GridField& b);
GridField operator-(const GridField& a, const GridField& b);
GridField operator*(double c, const GridField& a);

// Sample an arbitrary function on the grid.
GridField make_grid_field(int n, double L, int N,
                          const std::function<double(const std::array<double, 3>&)>& f);

// Sample f(|x|) Y_{ell,m}(x/|x|); at x = 0 uses the limit (f(0) for ell = 0,
// otherwise 0).  Sets truncation_warning if the boundary shell exceeds
// `boundary_threshold`.
GridField realize_on_grid(const SectorField& f, const Params& p, double L, int N,
                          double boundary_threshold = 0.25);

// Separable Catmull–Rom interpolation with a homogeneous-tail extension:
// a query outside the box is pulled back radially onto the box and scaled
// by (|x_box|/|x|)^{tail_exponent}.  Queries further out than pad_factor
// times the box throw OutOfBoxError.
class OutOfBoxError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class GridInterpolator {
  public:
    GridInterpolator(const GridField& f, double tail_exponent, double pad_factor = 1.6);
    double operator()(std::array<double, 3> x) const;

  private:
    const GridField* f_;
    double tail_exp_, pad_;
    double inner_;  // interpolation-safe half width
};

// Single-file export: one JSON header line {n, L, N, name, count} followed
// by raw little-endian doubles.
void write_grid_field(std::ostream& os, const GridField& f, const std::string& name);
GridField read_grid_field(std::istream& is, std::string* name = nullptr);
void write_grid_field_file(const std::string& path, const GridField& f,
                           const std::string& name);
GridField read_grid_field_file(const std::string& path, std::string* name = nullptr);

}  // namespace affinefrac
