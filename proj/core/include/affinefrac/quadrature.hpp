// 1D Gauss rules, half-line integration with a rational tail map, and
// product quadrature grids on S^{n-1} for n = 2, 3.
#pragma once

#include <array>
#include <functional>
#include <vector>

#include "affinefrac/params.hpp"

namespace affinefrac {

// Nodes and weights of a 1D rule on [a, b].
struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
    double a = -1.0;
    double b = 1.0;

    double integrate(const std::function<double(double)>& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
    // Affine image of the rule on [c, d].
    Rule1D mapped(double c, double d) const;
};

// Gauss–Legendre on [-1, 1]; exact for polynomials of degree ≤ 2·order-1.
Rule1D gauss_legendre(int order);

// Gauss–Jacobi on [-1, 1] with weight (1-x)^alpha (1+x)^beta, via
// Golub–Welsch on the Jacobi recurrence matrix.  The weight function is
// folded into the weights.
Rule1D gauss_jacobi(int order, double alpha, double beta);

// ∫_0^∞ f(r) dr for integrands with polynomial decay.  Composite
// Gauss–Legendre on the panels delimited by `splits`, plus a mapped tail
// r = R + t/(1-t) past the last split.  Panel counts double until two
// successive estimates agree to `tol`; throws QuadratureError otherwise.
double integrate_halfline(const std::function<double(double)>& f, int order,
                          std::vector<double> splits = {1.0, 10.0},
                          double tol = 1e-11, int max_refine = 8);

// Quadrature grid on S^{n-1} with weights summing to 1 (normalized
// spherical mean).  n = 2: uniform angles; n = 3: Gauss–Legendre in
// cos(polar) × uniform azimuth.
struct SphereGrid {
    int n = 2;
    std::vector<std::array<double, 3>> dirs;  // unit vectors (3rd comp 0 for n=2)
    std::vector<double> weights;              // sum to 1

    std::size_t size() const { return dirs.size(); }
};

// n = 2: `resolution` uniform angles.  n = 3: `resolution` polar nodes and
// 2·resolution azimuth angles.  Exact for spherical harmonics of degree
// up to about `resolution`.
SphereGrid sphere_grid(int n, int resolution);

// Normalized spherical mean ⟨F⟩ of values sampled on the grid.
double sphere_average(const SphereGrid& grid, const std::vector<double>& values);

}  // namespace affinefrac
