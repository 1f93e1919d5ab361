// Convex-geometric machinery: affine transforms of grid fields, the hull
// constant for the 2s < 1 star-body regime, inscribed John-type
// ellipsoids via minimum-volume enclosing ellipsoids, and the affine
// normalization map.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "affinefrac/grid_energy.hpp"

namespace affinefrac {

struct Ellipsoid {
    Eigen::MatrixXd shape;  // E = {x : x . M x <= 1}, symmetric positive definite
    double volume = 0.0;    // |B_1| / sqrt(det M)

    // gauge of a point: x . M x (inside iff <= 1)
    double gauge_sq(const Eigen::VectorXd& x) const {
        return x.dot(shape * x);
    }
};

class EllipsoidError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// (T_{A,x0} u)(x) = |det A|^{(n-2s)/(2n)} u(Ax + x0), resampled by
// separable cubic interpolation with the homogeneous-tail extension.
GridField transform_field(const GridField& u, const Eigen::MatrixXd& A,
                          const Eigen::VectorXd& x0, const Params& p);

// 1 for 2s >= 1, else (n+1)^{1/(2s)-1} (Caratheodory bound for the
// 2s-convex star body).
double hull_constant(const Params& p);

// Minimum-volume enclosing ellipsoid of the symmetrized sample set
// {±points}, by the Khachiyan multiplicative-weights iteration, then
// shrunk by 1/sqrt(n) so the result is contained in the convex hull.
// Returns the inscribed ellipsoid; `enclosing` receives the MVEE if
// non-null.
Ellipsoid inscribed_ellipsoid(const std::vector<std::array<double, 3>>& points,
                              const Params& p, double tol = 1e-9,
                              Ellipsoid* enclosing = nullptr);

struct NormalizationResult {
    Eigen::MatrixXd A;           // volume-normalized map, det A = 1
    std::optional<GridField> normalized;  // S u = T_{A,0} u when materialized
    double bound_ratio = 0.0;    // [Su]^2 / E_aff(u)
    double gauge_spread_before = 0.0;
    double gauge_spread_after = 0.0;
    Ellipsoid inscribed;
};

// John-type normalization: sample the star body K_u, divide by the hull
// constant, inscribe an ellipsoid, and map it to a ball with
// L = |det A|^{1/n} A^{-1}.  [Su]^2 and the gauge of the normalized body
// are evaluated through the exact covariance K_{Su} = L(K_u) (no
// resampling), so arbitrarily strong normalizing maps stay in range.
// When `field` is given and the map keeps resampling queries inside the
// interpolation padding, the transformed field S u is materialized too.
NormalizationResult normalize(const GridEngine& eng, const GridSpectrum& u,
                              const GridField* field = nullptr);

void write_normalization_json(const std::string& path, const NormalizationResult& r);

}  // namespace affinefrac
