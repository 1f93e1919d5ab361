// Nearest-point machinery on the affine extremal cone: the local chart
// a = (c, y, λ, B) with T_a = T_{(1+λ)(I+B), y}, the chart residual
// F(a) = [T_a u - (1+c) U]², its derivative-free minimization, and the
// two-sided deficit/distance check.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>

#include "affinefrac/affine_geom.hpp"
#include "affinefrac/grid_energy.hpp"

namespace affinefrac {

struct AffineChartPoint {
    double c = 0.0;
    Eigen::VectorXd y;      // translation, size n
    double lambda = 0.0;    // additive scale offset
    Eigen::MatrixXd B;      // symmetric trace-free

    static AffineChartPoint zero(int n);
    // |a|^2 = c^2 + |y|^2 + lambda^2 + |B|_F^2
    double norm() const;
    // the affine map (1+lambda)(I+B); throws if not orientation-preserving
    Eigen::MatrixXd map() const;
    bool valid() const;
};

// Orthonormal basis of trace-free symmetric matrices (Frobenius).
std::vector<Eigen::MatrixXd> sym0_basis(int n);

// F(a) = [T_a u - (1+c) U]² in the calibrated discrete seminorm.
double chart_residual(const GridEngine& eng, const GridField& u,
                      const AffineChartPoint& a);

struct ModulationResult {
    AffineChartPoint chart;   // optimum, including the analytic amplitude
    double distance = 0.0;    // D = sqrt(F(a*))
    double residual_sq = 0.0; // F(a*)
    bool converged = false;   // simplex collapsed below tolerance
    bool first_order_ok = false;  // central-difference gradient below tol
    double grad_norm = 0.0;
    int evaluations = 0;
};

struct ModulationOptions {
    int restarts = 5;
    std::uint64_t seed = 2024;
    double simplex_scale = 0.02;
    double simplex_tol = 1e-6;
    int max_iterations = 0;   // 0: 400 * dimension
    double gradient_tol = 1e-4;  // relative first-order check
    double start_radius = 0.02;
};

// Local distance to the affine cone: minimizes F over (y, λ, B) by
// Nelder–Mead with random restarts; the amplitude c is optimal in closed
// form for each trial point.
ModulationResult d_aff_local(const GridEngine& eng, const GridField& u,
                             const ModulationOptions& opt = {});

// Same minimization restricted to B = 0 (ordinary conformal manifold).
ModulationResult d_frac_local(const GridEngine& eng, const GridField& u,
                              const ModulationOptions& opt = {});

struct TwoSidedCheck {
    double deficit = 0.0;
    double distance = 0.0;   // D_aff
    double ratio = 0.0;      // deficit / D^2
    bool upper_ok = false;   // deficit <= D^2 (with tolerance)
    bool lower_ok = false;   // deficit / D^2 >= floor
    ModulationResult modulation;
};

TwoSidedCheck two_sided_check(const GridEngine& eng, const GridField& u,
                              double upper_slack = 0.02, double lower_floor = 0.05,
                              const ModulationOptions& opt = {});

// Generic Nelder–Mead on R^d (shared with tests).
struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    bool converged = false;
    int evaluations = 0;
};
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, double scale, double tol,
                             int max_iter);

}  // namespace affinefrac
