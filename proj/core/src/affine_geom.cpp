#include "affinefrac/affine_geom.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

namespace affinefrac {

namespace {
double unit_ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}
}  // namespace

GridField transform_field(const GridField& u, const Eigen::MatrixXd& A,
                          const Eigen::VectorXd& x0, const Params& p) {
    const int n = p.n;
    if (A.rows() != n || A.cols() != n || x0.size() != n)
        throw std::invalid_argument("transform_field: dimension mismatch");
    if (A.determinant() <= 0.0)
        throw std::invalid_argument("transform_field: det A must be positive");
    const double amp = std::pow(A.determinant(), (n - 2.0 * p.s) / (2.0 * n));
    const GridInterpolator interp(u, p.tail_exponent());
    GridField out = u;
    const double h = u.h();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < u.N; ++i) {
        const double x = -u.L + i * h;
        for (int j = 0; j < u.N; ++j) {
            const double y = -u.L + j * h;
            if (n == 2) {
                const std::array<double, 3> q = {A(0, 0) * x + A(0, 1) * y + x0(0),
                                                 A(1, 0) * x + A(1, 1) * y + x0(1), 0.0};
                out.at2(i, j) = amp * interp(q);
            } else {
                for (int k = 0; k < u.N; ++k) {
                    const double z = -u.L + k * h;
                    const std::array<double, 3> q = {
                        A(0, 0) * x + A(0, 1) * y + A(0, 2) * z + x0(0),
                        A(1, 0) * x + A(1, 1) * y + A(1, 2) * z + x0(1),
                        A(2, 0) * x + A(2, 1) * y + A(2, 2) * z + x0(2)};
                    out.at3(i, j, k) = amp * interp(q);
                }
            }
        }
    }
    return out;
}

double hull_constant(const Params& p) {
    if (2.0 * p.s >= 1.0) return 1.0;
    return std::pow(p.n + 1.0, 1.0 / (2.0 * p.s) - 1.0);
}

Ellipsoid inscribed_ellipsoid(const std::vector<std::array<double, 3>>& points,
                              const Params& p, double tol, Ellipsoid* enclosing) {
    const int n = p.n;
    const std::size_t m = points.size();
    if (m < static_cast<std::size_t>(2 * n))
        throw EllipsoidError("inscribed_ellipsoid: need at least 2n sample points");
    // Khachiyan iteration on the symmetrized set; for centrally symmetric
    // data the MVEE is {x : x . Q^{-1} x <= n} with Q = sum_i u_i p_i p_i^T.
    Eigen::MatrixXd P(n, m);
    for (std::size_t i = 0; i < m; ++i)
        for (int d = 0; d < n; ++d) P(d, static_cast<Eigen::Index>(i)) = points[i][d];
    Eigen::VectorXd wts = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    Eigen::MatrixXd Q(n, n);
    const int max_iter = 200000;
    double kappa_max = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
        Q = P * wts.asDiagonal() * P.transpose();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw EllipsoidError("inscribed_ellipsoid: degenerate sample set");
        // kappa_i = p_i . Q^{-1} p_i
        const Eigen::MatrixXd QiP = ldlt.solve(P);
        Eigen::Index imax = 0;
        kappa_max = 0.0;
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
            const double k = P.col(i).dot(QiP.col(i));
            if (k > kappa_max) {
                kappa_max = k;
                imax = i;
            }
        }
        if (kappa_max <= n * (1.0 + tol)) break;
        const double step = (kappa_max - n) / (n * (kappa_max - 1.0));
        wts *= (1.0 - step);
        wts(imax) += step;
        if (iter == max_iter - 1)
            throw EllipsoidError("inscribed_ellipsoid: Khachiyan iteration did not converge");
    }
    Ellipsoid enc;
    enc.shape = Q.inverse() / static_cast<double>(n);
    enc.shape = 0.5 * (enc.shape + enc.shape.transpose());
    enc.volume = unit_ball_volume(n) / std::sqrt(enc.shape.determinant());
    if (enclosing) *enclosing = enc;
    Ellipsoid ins;
    ins.shape = enc.shape * static_cast<double>(n);  // shrink by 1/sqrt(n)
    ins.volume = unit_ball_volume(n) / std::sqrt(ins.shape.determinant());
    return ins;
}

NormalizationResult normalize(const GridEngine& eng, const GridSpectrum& u,
                              const GridField* field) {
    const Params& p = eng.params();
    const int n = p.n;
    const StarBody body = eng.gauge_and_body(u);
    NormalizationResult out;
    {
        const auto [mn, mx] = std::minmax_element(body.gauge.begin(), body.gauge.end());
        out.gauge_spread_before = (*mx - *mn) / *mn;
    }
    // points inside K_u: boundary samples divided by the hull constant
    const double C = hull_constant(p);
    std::vector<std::array<double, 3>> pts = body.boundary;
    for (auto& q : pts)
        for (int d = 0; d < 3; ++d) q[d] /= C;
    out.inscribed = inscribed_ellipsoid(pts, p);

    // L = det(M)^{1/(2n)} M^{-1/2} maps E = {x.Mx<=1} to a ball, det L = 1.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.inscribed.shape);
    if (es.info() != Eigen::Success)
        throw EllipsoidError("normalize: eigen decomposition failed");
    const Eigen::VectorXd ev = es.eigenvalues();
    const double detM = ev.prod();
    Eigen::MatrixXd Msqrt = es.eigenvectors() *
                            ev.cwiseSqrt().asDiagonal() *
                            es.eigenvectors().transpose();
    const Eigen::MatrixXd Lmap = std::pow(detM, -1.0 / (2.0 * n)) * Msqrt;
    // A with L = |det A|^{1/n} A^{-1} and det A = 1
    out.A = Lmap.inverse();

    // exact covariance: p_{Su}(xi) = p_u(L^{-1} xi) = |L^{-1} xi| p_u(dir);
    // hence A_xi(Su) = |L^{-1}xi|^{2s} A_dir(u) and
    // [Su]^2 = <A_xi(Su)>_xi evaluated on the xi-grid.
    const Eigen::MatrixXd Linv = out.A;  // L^{-1} = A (det A = 1)
    const SphereGrid& grid = eng.xi_grid();
    std::vector<double> a_su(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        Eigen::VectorXd v(n);
        for (int d = 0; d < n; ++d) v(d) = grid.dirs[i][d];
        Eigen::VectorXd w = Linv * v;
        const double norm = w.norm();
        std::array<double, 3> dir = {0.0, 0.0, 0.0};
        for (int d = 0; d < n; ++d) dir[d] = w(d) / norm;
        a_su[i] = std::pow(norm, 2.0 * p.s) * eng.a_xi(u, dir);
    }
    double sem_su = 0.0;
    double gmin = 1e300, gmax = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        sem_su += grid.weights[i] * a_su[i];
        const double g = std::pow(a_su[i], 1.0 / (2.0 * p.s));
        gmin = std::min(gmin, g);
        gmax = std::max(gmax, g);
    }
    out.gauge_spread_after = (gmax - gmin) / gmin;
    out.bound_ratio = sem_su / eng.e_aff(u);

    if (field) {
        // materialize Su only when the resampling stays inside the padded box
        const double padded = 1.55;
        if (out.A.operatorNorm() <= padded)
            out.normalized = transform_field(*field, out.A, Eigen::VectorXd::Zero(n), p);
    }
    return out;
}

void write_normalization_json(const std::string& path, const NormalizationResult& r) {
    nlohmann::json j;
    std::vector<std::vector<double>> A(static_cast<std::size_t>(r.A.rows()));
    for (Eigen::Index i = 0; i < r.A.rows(); ++i)
        for (Eigen::Index k = 0; k < r.A.cols(); ++k)
            A[static_cast<std::size_t>(i)].push_back(r.A(i, k));
    j["A"] = A;
    j["bound_ratio"] = r.bound_ratio;
    j["gauge_spread_before"] = r.gauge_spread_before;
    j["gauge_spread_after"] = r.gauge_spread_after;
    j["inscribed_volume"] = r.inscribed.volume;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << j.dump(2) << '\n';
}

}  // namespace affinefrac
