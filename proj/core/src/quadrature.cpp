#include "affinefrac/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace affinefrac {

Rule1D Rule1D::mapped(double c, double d) const {
    Rule1D out;
    out.a = c;
    out.b = d;
    const double mid = 0.5 * (c + d), half = 0.5 * (d - c);
    const double scale = half / (0.5 * (b - a));
    out.nodes.reserve(nodes.size());
    out.weights.reserve(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double t = (nodes[i] - 0.5 * (a + b)) / (0.5 * (b - a));
        out.nodes.push_back(mid + half * t);
        out.weights.push_back(weights[i] * scale);
    }
    return out;
}

Rule1D gauss_legendre(int order) {
    if (order < 1) throw std::invalid_argument("gauss_legendre: order >= 1");
    Rule1D rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev-style initial guess, then Newton on P_order.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            if (order == 1) { p1 = x; }
            for (int k = 2; k <= order; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            pp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order == 1) {
        rule.nodes[0] = 0.0;
        rule.weights[0] = 2.0;
    }
    return rule;
}

Rule1D gauss_jacobi(int order, double alpha, double beta) {
    if (order < 1) throw std::invalid_argument("gauss_jacobi: order >= 1");
    if (alpha <= -1.0 || beta <= -1.0)
        throw std::invalid_argument("gauss_jacobi: alpha, beta > -1 required");
    // Golub–Welsch: eigen-decompose the symmetric Jacobi matrix of the
    // monic recurrence x p_k = p_{k+1} + a_k p_k + b_k p_{k-1}.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
    const double ab = alpha + beta;
    for (int k = 0; k < order; ++k) {
        double ak;
        if (k == 0)
            ak = (beta - alpha) / (ab + 2.0);
        else
            ak = (beta * beta - alpha * alpha) /
                 ((2.0 * k + ab) * (2.0 * k + ab + 2.0));
        J(k, k) = ak;
        if (k >= 1) {
            double bk;
            if (k == 1)
                bk = 4.0 * (alpha + 1.0) * (beta + 1.0) /
                     ((ab + 2.0) * (ab + 2.0) * (ab + 3.0));
            else
                bk = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) /
                     ((2.0 * k + ab) * (2.0 * k + ab) * (2.0 * k + ab + 1.0) *
                      (2.0 * k + ab - 1.0));
            J(k, k - 1) = J(k - 1, k) = std::sqrt(bk);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    const double mu0 = std::exp((ab + 1.0) * std::numbers::ln2 +
                                std::lgamma(alpha + 1.0) + std::lgamma(beta + 1.0) -
                                std::lgamma(ab + 2.0));
    Rule1D rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

double integrate_halfline(const std::function<double(double)>& f, int order,
                          std::vector<double> splits, double tol, int max_refine) {
    if (splits.empty()) splits = {1.0};
    const double R = splits.back();
    auto evaluate = [&](int panels_per_split, int ord) {
        double total = 0.0;
        const Rule1D base = gauss_legendre(ord);
        double left = 0.0;
        for (double right : splits) {
            const double step = (right - left) / panels_per_split;
            for (int p = 0; p < panels_per_split; ++p) {
                const Rule1D r = base.mapped(left + p * step, left + (p + 1) * step);
                total += r.integrate(f);
            }
            left = right;
        }
        // tail: r = R + t/(1-t), dr = dt/(1-t)^2 on t in [0,1)
        const double step = 1.0 / panels_per_split;
        for (int p = 0; p < panels_per_split; ++p) {
            const Rule1D r = base.mapped(p * step, (p + 1) * step);
            for (std::size_t i = 0; i < r.nodes.size(); ++i) {
                const double t = r.nodes[i];
                const double om = 1.0 - t;
                total += r.weights[i] * f(R + t / om) / (om * om);
            }
        }
        return total;
    };
    double prev = evaluate(1, order);
    for (int k = 1; k <= max_refine; ++k) {
        const double cur = evaluate(1 << k, order);
        if (std::abs(cur - prev) <= tol * (1.0 + std::abs(cur))) return cur;
        prev = cur;
    }
    const double last = evaluate(1 << max_refine, order);
    throw QuadratureError("integrate_halfline did not converge", prev, last);
}

SphereGrid sphere_grid(int n, int resolution) {
    if (resolution < 4) throw std::invalid_argument("sphere_grid: resolution >= 4");
    SphereGrid grid;
    grid.n = n;
    if (n == 2) {
        grid.dirs.reserve(resolution);
        grid.weights.assign(resolution, 1.0 / resolution);
        for (int i = 0; i < resolution; ++i) {
            const double phi = 2.0 * std::numbers::pi * i / resolution;
            grid.dirs.push_back({std::cos(phi), std::sin(phi), 0.0});
        }
    } else if (n == 3) {
        // Hemisphere-split Gauss–Legendre in cos(theta): |t|-type kernels are
        // smooth on each half, so equator-kinked integrands keep full order.
        const int half = std::max(2, resolution / 2);
        const Rule1D base = gauss_legendre(half);
        Rule1D polar;
        for (const auto& panel : {base.mapped(-1.0, 0.0), base.mapped(0.0, 1.0)}) {
            polar.nodes.insert(polar.nodes.end(), panel.nodes.begin(), panel.nodes.end());
            polar.weights.insert(polar.weights.end(), panel.weights.begin(),
                                 panel.weights.end());
        }
        const int naz = 2 * resolution;
        grid.dirs.reserve(polar.nodes.size() * naz);
        grid.weights.reserve(grid.dirs.capacity());
        for (std::size_t i = 0; i < polar.nodes.size(); ++i) {
            const double t = polar.nodes[i];           // cos(theta)
            const double st = std::sqrt(std::max(0.0, 1.0 - t * t));
            const double w = polar.weights[i] / 2.0 / naz;
            for (int j = 0; j < naz; ++j) {
                const double phi = 2.0 * std::numbers::pi * j / naz;
                grid.dirs.push_back({st * std::cos(phi), st * std::sin(phi), t});
                grid.weights.push_back(w);
            }
        }
    } else {
        throw std::invalid_argument("sphere_grid: grid backend limited to n = 2, 3");
    }
    return grid;
}

double sphere_average(const SphereGrid& grid, const std::vector<double>& values) {
    if (values.size() != grid.size())
        throw std::invalid_argument("sphere_average: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += grid.weights[i] * values[i];
    return acc;
}

}  // namespace affinefrac
