#include "affinefrac/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "affinefrac/hypergeom.hpp"

namespace affinefrac {

namespace {
void check_same_sector(const SphereCoeffs& a, const SphereCoeffs& b) {
    if (a.ell != b.ell)
        throw std::invalid_argument("coefficient lists live in different sectors");
}
}  // namespace

double seminorm_sq(const Params& p, const SphereCoeffs& c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < c.coeffs.size(); ++k)
        acc += lambda_k(p, c.ell + static_cast<int>(k)) * c.coeffs[k] * c.coeffs[k];
    return acc;
}

double inner_hs(const Params& p, const SphereCoeffs& a, const SphereCoeffs& b) {
    check_same_sector(a, b);
    const std::size_t m = std::min(a.coeffs.size(), b.coeffs.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        acc += lambda_k(p, a.ell + static_cast<int>(k)) * a.coeffs[k] * b.coeffs[k];
    return acc;
}

double q_frac_sector(const Params& p, const SphereCoeffs& c) {
    const double l1 = lambda_k(p, 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < c.coeffs.size(); ++k)
        acc += (lambda_k(p, c.ell + static_cast<int>(k)) - l1) * c.coeffs[k] * c.coeffs[k];
    return acc;
}

double q_frac_inner(const Params& p, const SphereCoeffs& a, const SphereCoeffs& b) {
    check_same_sector(a, b);
    const double l1 = lambda_k(p, 1);
    const std::size_t m = std::min(a.coeffs.size(), b.coeffs.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k)
        acc += (lambda_k(p, a.ell + static_cast<int>(k)) - l1) * a.coeffs[k] * b.coeffs[k];
    return acc;
}

SpectralEngine::SpectralEngine(const Params& p, int kmax, int quad_order)
    : p_(p), kmax_(kmax), quad_order_(quad_order) {}

const SectorBasis& SpectralEngine::basis(int ell) const {
    auto it = bases_.find(ell);
    if (it == bases_.end()) {
        it = bases_.emplace(ell, std::make_unique<SectorBasis>(p_, ell, kmax_, quad_order_))
                 .first;
    }
    return *it->second;
}

double SpectralEngine::lq_norm(const RadialProfile& f) const {
    SectorField sf{0, f, 0, ""};
    return lq_norm(sf);
}

double SpectralEngine::lq_norm(const SectorField& f) const {
    const double q = p_.q();
    if (f.profile.decay_exponent > 0.0 && f.profile.decay_exponent * q <= p_.n)
        throw std::domain_error("lq_norm: integral diverges (decay * q <= n)");
    double ang = 1.0;  // <|Y|^q>
    if (f.ell > 0) {
        const SphereGrid g = sphere_grid(p_.n, p_.n == 2 ? 4096 : 380);
        std::vector<double> vals(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            vals[i] = std::pow(std::abs(eval_harmonic(p_.n, f.ell, f.harmonic_idx,
                                                      g.dirs[i])),
                               q);
        ang = sphere_average(g, vals);
    }
    const int nm1 = p_.n - 1;
    const auto& prof = f.profile;
    const double radial = integrate_halfline(
        [&](double r) { return std::pow(std::abs(prof(r)), q) * std::pow(r, nm1); }, 40,
        {1.0, 10.0}, 1e-12);
    return std::pow(sphere_surface(p_.n) * ang * radial, 1.0 / q);
}

double SpectralEngine::sharp_constant() const {
    if (!sharp_) {
        const RadialProfile u = bubble_profile(p_);
        const double sem = seminorm_sq(p_, basis(0).project(u));
        const double lq = lq_norm(u);
        sharp_ = sem / (lq * lq);
    }
    return *sharp_;
}

double SpectralEngine::deficit_radial(const RadialProfile& u) const {
    const double sem = seminorm_sq(p_, basis(0).project(u));
    const double lq = lq_norm(u);
    return sem - sharp_constant() * lq * lq;
}

SpectralReport SpectralEngine::report_radial(const RadialProfile& u) const {
    SpectralReport rep;
    const SphereCoeffs c = basis(0).project(u);
    rep.mode_energies.resize(c.coeffs.size());
    for (std::size_t k = 0; k < c.coeffs.size(); ++k)
        rep.mode_energies[k] = lambda_k(p_, static_cast<int>(k)) * c.coeffs[k] * c.coeffs[k];
    rep.seminorm_sq = seminorm_sq(p_, c);
    rep.lq_norm = lq_norm(u);
    rep.deficit = rep.seminorm_sq - sharp_constant() * rep.lq_norm * rep.lq_norm;
    return rep;
}

const SphereCoeffs& SpectralEngine::z_in_sector2() const {
    if (!z_coeffs_) {
        const auto gens = kernel_fields(p_);
        z_coeffs_ = basis(2).project(gens[3].profile);
    }
    return *z_coeffs_;
}

double SpectralEngine::q_frac_zz() const { return q_frac_sector(p_, z_in_sector2()); }

DegreeTwoHessian SpectralEngine::q_aff_degree2(const SectorField& f) const {
    if (f.ell != 2) throw std::invalid_argument("q_aff_degree2: ell must be 2");
    const SphereCoeffs cf = basis(2).project(f.profile);
    const SphereCoeffs& cz = z_in_sector2();
    const double qzz = q_frac_sector(p_, cz);
    if (qzz < 1e-12 * seminorm_sq(p_, cz))
        throw DegenerateFormError("q_aff_degree2: degenerate z-form");
    DegreeTwoHessian out;
    const double qfz = q_frac_inner(p_, cf, cz);
    out.correction = qfz * qfz / qzz;
    out.value = q_frac_sector(p_, cf) - out.correction;
    return out;
}

double SpectralEngine::kappa() const {
    if (!kappa_) {
        // Calibrate R_s^(2)(z) = Q_frac(z,z):  kappa rho_2² (Σ Λ_k W_k z_k)² = Q_frac(z,z).
        const SphereCoeffs& cz = z_in_sector2();
        RadialProfile w{[this](double r) { return tail_envelope(p_, 2, 0, r); },
                        p_.n - 2.0 * p_.s};
        const SphereCoeffs cw = basis(2).project(w);
        double pairing = 0.0;
        for (std::size_t k = 0; k < cz.coeffs.size(); ++k)
            pairing += lambda_k(p_, 2 + static_cast<int>(k)) * cw.coeffs[k] * cz.coeffs[k];
        const double rho2 = rho_closed_form(p_, 2);
        kappa_ = q_frac_sector(p_, cz) / (rho2 * rho2 * pairing * pairing);
    }
    return *kappa_;
}

SpectralEngine::RankOneCorrection SpectralEngine::affine_correction(int ell) const {
    if (ell < 2 || ell % 2 != 0)
        throw std::invalid_argument("affine_correction: even ell >= 2");
    RankOneCorrection out;
    RadialProfile w{[this, ell](double r) { return tail_envelope(p_, ell, 0, r); },
                    p_.n - 2.0 * p_.s};
    out.w_coeffs = basis(ell).project(w).coeffs;
    const double rho = rho_closed_form(p_, ell);
    out.factor = kappa() * rho * rho;
    return out;
}

double SpectralEngine::rayleigh_gap(int ell, const RayleighOptions& opt) const {
    const int kmax = opt.kmax > 0 ? opt.kmax : kmax_;
    const SectorBasis local(p_, ell, kmax, quad_order_);
    const int nb = kmax - ell + 1;
    const double l1 = lambda_k(p_, 1);

    // Work in y = sqrt(Λ) a coordinates, where [.]² = |y|².
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nb, nb);
    std::vector<double> sqrt_lam(nb);
    for (int k = 0; k < nb; ++k) {
        const double lk = local.lam(ell + k);
        sqrt_lam[k] = std::sqrt(lk);
        M(k, k) = 1.0 - l1 / lk;
    }

    std::vector<Eigen::VectorXd> constraints;
    if (ell == 0) {
        constraints.push_back(Eigen::VectorXd::Unit(nb, 0));
        constraints.push_back(Eigen::VectorXd::Unit(nb, 1));
    } else if (ell == 1) {
        constraints.push_back(Eigen::VectorXd::Unit(nb, 0));
    } else if (ell == 2) {
        const SphereCoeffs cz = local.project(kernel_fields(p_)[3].profile);
        Eigen::VectorXd zhat(nb), u(nb);
        double qzz = 0.0;
        for (int k = 0; k < nb; ++k) {
            const double lk = local.lam(ell + k);
            zhat(k) = sqrt_lam[k] * cz.coeffs[k];
            u(k) = (lk - l1) * cz.coeffs[k] / sqrt_lam[k];
            qzz += (lk - l1) * cz.coeffs[k] * cz.coeffs[k];
        }
        if (opt.include_affine_correction) M -= (u * u.transpose()) / qzz;
        constraints.push_back(zhat.normalized());
    } else if (ell % 2 == 0 && opt.include_affine_correction) {
        const RankOneCorrection rc = affine_correction(ell);
        Eigen::VectorXd v(nb);
        for (int k = 0; k < nb; ++k) v(k) = sqrt_lam[k] * rc.w_coeffs[k];
        M -= rc.factor * (v * v.transpose());
    }

    if (constraints.empty()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("rayleigh_gap: eigen solver failed");
        return es.eigenvalues()(0);
    }
    // Orthonormal basis of the constraint complement via Householder QR.
    Eigen::MatrixXd C(nb, static_cast<int>(constraints.size()));
    for (int j = 0; j < C.cols(); ++j) C.col(j) = constraints[static_cast<std::size_t>(j)];
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
    Eigen::MatrixXd Q = qr.householderQ();
    Eigen::MatrixXd P = Q.rightCols(nb - C.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P.transpose() * M * P);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("rayleigh_gap: eigen solver failed");
    return es.eigenvalues()(0);
}

SweepResult SpectralEngine::konig_sweep(const std::vector<double>& eps_list,
                                        double fit_tolerance) const {
    if (eps_list.size() < 2)
        throw std::invalid_argument("konig_sweep: need at least two eps values");
    const RadialProfile u = bubble_profile(p_);
    const RadialProfile rho = degree_two_test_profile(p_);
    const double sem_u = seminorm_sq(p_, basis(0).project(u));
    const double sem_rho = seminorm_sq(p_, basis(0).project(rho));
    const double S = sharp_constant();

    SweepResult out;
    std::vector<double> eps_sorted = eps_list;
    std::sort(eps_sorted.begin(), eps_sorted.end());
    for (double eps : eps_sorted) {
        // exact radial quadrature of ||U + eps rho||_q; cross seminorm term
        // vanishes (k = 0 against k = 2 modes).
        RadialProfile mix{[&u, &rho, eps](double r) { return u(r) + eps * rho(r); },
                          p_.n - 2.0 * p_.s};
        const double lq = lq_norm(mix);
        const double deficit = sem_u + eps * eps * sem_rho - S * lq * lq;
        const double e2r2 = eps * eps * sem_rho;
        out.rows.push_back({eps, deficit, e2r2, deficit / e2r2});
    }
    // Linear least squares: quotient = gamma_fit - kappa_hat * eps.
    const std::size_t m = out.rows.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : out.rows) {
        sx += r.eps;
        sy += r.quotient;
        sxx += r.eps * r.eps;
        sxy += r.eps * r.quotient;
    }
    const double det = m * sxx - sx * sx;
    const double slope = (m * sxy - sx * sy) / det;
    out.kappa_hat = -slope;
    out.gamma_fit = (sy - slope * sx) / m;
    for (const auto& r : out.rows)
        out.fit_residual = std::max(out.fit_residual,
                                    std::abs(out.gamma_fit + slope * r.eps - r.quotient));
    out.fit_ok = out.fit_residual <= fit_tolerance;
    const auto& r1 = out.rows[0];
    const auto& r2 = out.rows[1];
    out.gamma_extrapolated = (r2.eps * r1.quotient - r1.eps * r2.quotient) / (r2.eps - r1.eps);
    return out;
}

void write_sweep_csv(const std::string& path, const SweepResult& r) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << "eps,deficit,eps2_rho2,quotient\n";
    os.precision(15);
    for (const auto& row : r.rows)
        os << row.eps << ',' << row.deficit << ',' << row.eps2_rho2 << ','
           << row.quotient << '\n';
    os << "# fitted_slope_kappa_hat," << r.kappa_hat << ",gamma_extrapolated,"
       << r.gamma_extrapolated << '\n';
}

}  // namespace affinefrac
