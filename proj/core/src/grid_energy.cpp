#include "affinefrac/grid_energy.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <numbers>

#include "affinefrac/harmonics.hpp"
#include "affinefrac/hypergeom.hpp"

namespace affinefrac {

namespace {

constexpr std::complex<double> kImagPow[4] = {
    {1.0, 0.0}, {0.0, -1.0}, {-1.0, 0.0}, {0.0, 1.0}};  // (-i)^ell

std::mutex g_fftw_mutex;

// cubic interpolation on a uniform table over [0, xmax]
double table_eval(const std::vector<double>& tab, double xmax, double x) {
    const int n = static_cast<int>(tab.size());
    const double u = x / xmax * (n - 1);
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::max(1, std::min(n - 3, i0));
    const double t = u - i0;
    const double pm1 = tab[i0 - 1], p0 = tab[i0], p1 = tab[i0 + 1], p2 = tab[i0 + 2];
    return p0 + 0.5 * t * (p1 - pm1 +
                           t * (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2 +
                                t * (3.0 * (p0 - p1) + p2 - pm1)));
}

double unit_ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

// <|cos psi|^{2s} cos(k psi)> closed form (zero for odd k)
double fourier_abs_cos_pow(double s, int k) {
    if (k % 2 != 0) return 0.0;
    const int m = k / 2;
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    return sign * std::tgamma(1.0 + 2.0 * s) /
           (std::pow(2.0, 2.0 * s) * std::tgamma(1.0 + s + m) * std::tgamma(1.0 + s - m));
}

}  // namespace

GridOptions GridOptions::defaults(int n) {
    GridOptions opt;
    if (n == 2) {
        opt.L = 24.0;
        opt.N = 256;
        opt.sphere_res = 64;
        opt.patch_refine = 8;
    } else {
        opt.L = 24.0;
        opt.N = 96;
        opt.sphere_res = 26;
        opt.patch_refine = 4;
    }
    return opt;
}

GridEngine GridEngine::with_defaults(const Params& p) {
    return GridEngine(p, GridOptions::defaults(p.n));
}

GridEngine::GridEngine(const Params& p, GridOptions opt)
    : p_(p), opt_(opt), xi_(sphere_grid(p.n, opt.sphere_res ? opt.sphere_res
                                                            : (p.n == 2 ? 64 : 26))),
      N_(opt.N), L_(opt.L), h_(2.0 * opt.L / opt.N) {
    if (p_.n != 2 && p_.n != 3)
        throw std::invalid_argument("GridEngine: grid backend limited to n = 2, 3");
    if (opt_.tail_ell_max < 0 || opt_.tail_ell_max > 6)
        throw std::invalid_argument("GridEngine: tail_ell_max in [0, 6]");
    lattice_size_ = p_.n == 2 ? static_cast<std::size_t>(N_) * N_
                              : static_cast<std::size_t>(N_) * N_ * N_;
    build_tail_tables();
    build_lattice_caches();
    build_tt_angular();

    // bubble reference and calibration
    const SectorBasis b0(p_, 0, 8);
    sem_u_spectral_ = 0.0;
    {
        const SphereCoeffs cu = b0.project(bubble_profile(p_));
        for (std::size_t k = 0; k < cu.coeffs.size(); ++k)
            sem_u_spectral_ += lambda_k(p_, static_cast<int>(k)) * cu.coeffs[k] * cu.coeffs[k];
    }
    SectorField ub{0, bubble_profile(p_), 0, "U"};
    u_field_ = realize_on_grid(ub, p_, L_, N_);
    u_spec_ = analyze(u_field_);

    const std::vector<double> raw = raw_table(u_spec_, u_spec_);
    const double mean_raw = sphere_average(xi_, raw);
    cal_.c_cal = sem_u_spectral_ / mean_raw;
    const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
    cal_.spread = (*mx - *mn) / mean_raw;
    if (cal_.spread > opt_.spread_tolerance)
        throw CalibrationError("A_xi(U) spread " + std::to_string(cal_.spread) +
                               " exceeds tolerance; increase the grid resolution");
    cal_.c_hs = sem_u_spectral_ / raw_seminorm(u_spec_, u_spec_);
    cal_.A0 = sem_u_spectral_;
    cal_.lq_u = u_spec_.lq;
    std::vector<double> table(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) table[i] = cal_.c_cal * raw[i];
    cal_.S_grid = phi_mean(table) / (cal_.lq_u * cal_.lq_u);
}

double GridEngine::tau_eval(int ell, int j, double r) const {
    return table_eval(tau_tables_[static_cast<std::size_t>(ell) * 2 + j], tau_rmax_, r);
}

void GridEngine::build_tail_tables() {
    // harmonic slots
    n_harm_ = harmonic_count_upto(p_.n, opt_.tail_ell_max);
    harm_index_.clear();
    for (int ell = 0; ell <= opt_.tail_ell_max; ++ell)
        for (int idx = 0; idx < harmonic_count(p_.n, ell); ++idx)
            harm_index_.push_back({ell, idx});

    // radial tables of the tail envelopes
    tau_rmax_ = std::sqrt(static_cast<double>(p_.n)) * L_ * 1.02;
    const int samples = 8192;
    tau_tables_.assign(static_cast<std::size_t>(opt_.tail_ell_max + 1) * 2, {});
    for (int ell = 0; ell <= opt_.tail_ell_max; ++ell)
        for (int j = 0; j < 2; ++j) {
            auto& tab = tau_tables_[static_cast<std::size_t>(ell) * 2 + j];
            tab.resize(samples);
            for (int i = 0; i < samples; ++i)
                tab[i] = tail_envelope(p_, ell, j, tau_rmax_ * i / (samples - 1));
        }

    // envelope spectra g0 = x^s K_s, g1 = x^{1-s} K_{1-s}
    g_xmax_ = std::numbers::pi / h_ * std::sqrt(static_cast<double>(p_.n)) * 1.02;
    const int gs = 32768;
    g0_table_.resize(gs);
    g1_table_.resize(gs);
    const double s = p_.s;
    g0_table_[0] = std::pow(2.0, s - 1.0) * std::tgamma(s);
    g1_table_[0] = std::pow(2.0, -s) * std::tgamma(1.0 - s);
    for (int i = 1; i < gs; ++i) {
        const double x = g_xmax_ * i / (gs - 1);
        g0_table_[i] = std::pow(x, s) * std::cyl_bessel_k(s, x);
        g1_table_[i] = std::pow(x, 1.0 - s) * std::cyl_bessel_k(1.0 - s, x);
    }

    // fit geometry
    shell_radii_.resize(opt_.fit_shells);
    for (int i = 0; i < opt_.fit_shells; ++i)
        shell_radii_[i] = (opt_.fit_shell_lo +
                           (opt_.fit_shell_hi - opt_.fit_shell_lo) * i /
                               (opt_.fit_shells - 1)) *
                          L_;
    if (p_.n == 2) {
        const int M = 256;
        fit_dirs_.resize(M);
        fit_weights_.assign(M, 1.0 / M);
        for (int i = 0; i < M; ++i) {
            const double phi = 2.0 * std::numbers::pi * i / M;
            fit_dirs_[i] = {std::cos(phi), std::sin(phi), 0.0};
        }
    } else {
        const SphereGrid g = sphere_grid(3, 16);
        fit_dirs_ = g.dirs;
        fit_weights_ = g.weights;
    }
    fit_harm_.resize(fit_dirs_.size() * n_harm_);
    for (std::size_t d = 0; d < fit_dirs_.size(); ++d)
        eval_harmonics_upto(p_.n, opt_.tail_ell_max, fit_dirs_[d],
                            &fit_harm_[d * n_harm_]);
}

void GridEngine::build_lattice_caches() {
    zeta_axis_.resize(N_);
    phase_axis_.resize(N_);
    for (int i = 0; i < N_; ++i) {
        const int m = i <= N_ / 2 ? i : i - N_;
        zeta_axis_[i] = std::numbers::pi * m / L_;
        phase_axis_[i] = (std::abs(m) % 2) ? -1.0 : 1.0;
    }
    const int P = opt_.patch_radius;
    in_patch_.assign(lattice_size_, 0.0f);
    k0_.assign(lattice_size_, 0.0);
    k1_.assign(lattice_size_, 0.0);
    const double SQ = std::pow(2.0 * std::numbers::pi, 0.5 * p_.n);
    // k0 = SQ rho^{-s} K_s = SQ (rho^s K_s) / rho^{2s};  k1 = SQ rho^{1-s} K_{1-s}
    auto fill_node = [&](std::size_t node, double rho, bool patch) {
        if (patch) in_patch_[node] = 1.0f;
        if (rho <= 0.0) {
            k0_[node] = 0.0;
            k1_[node] = SQ * g1_table_[0];
            return;
        }
        k0_[node] = SQ * table_eval(g0_table_, g_xmax_, rho) / std::pow(rho, 2.0 * p_.s);
        k1_[node] = SQ * table_eval(g1_table_, g_xmax_, rho);
    };
    if (p_.n == 2) {
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) {
                const std::size_t node = static_cast<std::size_t>(i) * N_ + j;
                const int mi = i <= N_ / 2 ? i : i - N_;
                const int mj = j <= N_ / 2 ? j : j - N_;
                const double rho = std::hypot(zeta_axis_[i], zeta_axis_[j]);
                fill_node(node, rho, std::abs(mi) <= P && std::abs(mj) <= P);
            }
    } else {
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j)
                for (int k = 0; k < N_; ++k) {
                    const std::size_t node =
                        (static_cast<std::size_t>(i) * N_ + j) * N_ + k;
                    const int mi = i <= N_ / 2 ? i : i - N_;
                    const int mj = j <= N_ / 2 ? j : j - N_;
                    const int mk = k <= N_ / 2 ? k : k - N_;
                    const double rho = std::sqrt(zeta_axis_[i] * zeta_axis_[i] +
                                                 zeta_axis_[j] * zeta_axis_[j] +
                                                 zeta_axis_[k] * zeta_axis_[k]);
                    fill_node(node, rho,
                              std::abs(mi) <= P && std::abs(mj) <= P && std::abs(mk) <= P);
                }
    }

    // fine patch coordinates and envelope spectra
    const int RF = opt_.patch_refine;
    nf_ = (2 * P + 1) * RF;
    const double dz = std::numbers::pi / L_;
    fidx_.resize(nf_);
    for (int a = 0; a < nf_; ++a)
        fidx_[a] = -(P + 0.5) * dz + (a + 0.5) * dz / RF;
    const std::size_t patch_size = p_.n == 2 ? static_cast<std::size_t>(nf_) * nf_
                                             : static_cast<std::size_t>(nf_) * nf_ * nf_;
    fk0_.assign(patch_size, 0.0);
    fk1_.assign(patch_size, 0.0);
    auto fill_patch = [&](std::size_t node, double rho) {
        if (rho <= 1e-14) {
            fk0_[node] = 0.0;
            fk1_[node] = SQ * g1_table_[0];
            return;
        }
        fk0_[node] = SQ * table_eval(g0_table_, g_xmax_, rho) / std::pow(rho, 2.0 * p_.s);
        fk1_[node] = SQ * table_eval(g1_table_, g_xmax_, rho);
    };
    if (p_.n == 2) {
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b)
                fill_patch(static_cast<std::size_t>(a) * nf_ + b,
                           std::hypot(fidx_[a], fidx_[b]));
    } else {
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b)
                for (int c = 0; c < nf_; ++c)
                    fill_patch((static_cast<std::size_t>(a) * nf_ + b) * nf_ + c,
                               std::sqrt(fidx_[a] * fidx_[a] + fidx_[b] * fidx_[b] +
                                         fidx_[c] * fidx_[c]));
    }
    emat_.resize(static_cast<std::size_t>(nf_) * N_);
    for (int a = 0; a < nf_; ++a)
        for (int i = 0; i < N_; ++i) {
            const double x = -L_ + i * h_;
            emat_[static_cast<std::size_t>(a) * N_ + i] =
                h_ * std::exp(std::complex<double>(0.0, -fidx_[a] * x));
        }

    // radial tail x tail integrals  ∫_0^∞ ρ^{n-1+2s} k_j k_{j'} dρ
    const double s = p_.s;
    auto kfun = [&](int j, double rho) {
        return j == 0 ? SQ * std::pow(rho, -s) * std::cyl_bessel_k(s, rho)
                      : SQ * std::pow(rho, 1.0 - s) * std::cyl_bessel_k(1.0 - s, rho);
    };
    for (int j = 0; j < 2; ++j)
        for (int jp = j; jp < 2; ++jp) {
            // [0,1]: factor out the rho^{n-1-2s} endpoint weight (Gauss-Jacobi);
            // the remaining rho^{2s} k_j k_{j'} is bounded at 0.
            const double beta = p_.n - 1.0 - 2.0 * s;
            const Rule1D gj = gauss_jacobi(48, 0.0, beta);
            double acc = 0.0;
            for (std::size_t i = 0; i < gj.nodes.size(); ++i) {
                const double u = 0.5 * (gj.nodes[i] + 1.0);
                if (u <= 1e-300) continue;
                // rho^{n-1+2s} = rho^{n-1-2s} (weight) * rho^{4s}; the
                // leftover rho^{4s} k_j k_{j'} is bounded at 0.
                acc += gj.weights[i] * std::pow(2.0, -(beta + 1.0)) *
                       std::pow(u, 4.0 * s) * kfun(j, u) * kfun(jp, u);
            }
            const Rule1D gl = gauss_legendre(64);
            for (double a = 1.0, b = 4.0;; a = b, b = std::min(45.0, b * 2.5)) {
                const Rule1D r = gl.mapped(a, b);
                for (std::size_t i = 0; i < r.nodes.size(); ++i) {
                    const double rho = r.nodes[i];
                    acc += r.weights[i] * std::pow(rho, p_.n - 1.0 + 2.0 * s) *
                           kfun(j, rho) * kfun(jp, rho);
                }
                if (b >= 45.0) break;
            }
            rad_tt_[j][jp] = rad_tt_[jp][j] = acc;
        }
}

void GridEngine::build_tt_angular() {
    tt_angular_.assign(static_cast<std::size_t>(n_harm_) * n_harm_, {});
    if (p_.n == 2) {
        // Y products reduce to cos/sin of (la ± lb) phi with closed Fourier
        // coefficients of |cos|^{2s}.
        auto add = [&](std::vector<AngularTerm>& terms, int k, double coef, bool sine) {
            if (coef == 0.0) return;
            const double fk = fourier_abs_cos_pow(p_.s, std::abs(k));
            if (fk == 0.0) return;
            // <|cos(phi-phix)|^{2s} cos(k phi)> = F_k cos(k phix); sin likewise
            terms.push_back({std::abs(k), coef * fk, sine});
        };
        for (int a = 0; a < n_harm_; ++a)
            for (int b = 0; b < n_harm_; ++b) {
                auto& terms = tt_angular_[static_cast<std::size_t>(a) * n_harm_ + b];
                const auto [la, ia] = harm_index_[a];
                const auto [lb, ib] = harm_index_[b];
                const bool ca = ia == 0, cb = ib == 0;  // cos-type vs sin-type
                const double norm = (la ? std::numbers::sqrt2 : 1.0) *
                                    (lb ? std::numbers::sqrt2 : 1.0);
                // product-to-sum of cos/sin(la phi) * cos/sin(lb phi)
                if (ca && cb) {
                    add(terms, la - lb, 0.5 * norm, false);
                    add(terms, la + lb, 0.5 * norm, false);
                } else if (!ca && !cb) {
                    add(terms, la - lb, 0.5 * norm, false);
                    add(terms, la + lb, -0.5 * norm, false);
                } else if (!ca && cb) {  // sin * cos
                    add(terms, la + lb, 0.5 * norm, true);
                    add(terms, la - lb, 0.5 * norm * (la - lb >= 0 ? 1.0 : -1.0), true);
                } else {  // cos * sin
                    add(terms, la + lb, 0.5 * norm, true);
                    add(terms, lb - la, 0.5 * norm * (lb - la >= 0 ? 1.0 : -1.0), true);
                }
            }
        return;
    }
    // n = 3: expand Y_a Y_b over harmonics and apply Funk–Hecke per degree.
    const int Lmax = 2 * opt_.tail_ell_max;
    const int nprod = harmonic_count_upto(3, Lmax);
    const SphereGrid g = sphere_grid(3, 48);
    std::vector<std::vector<double>> hv(static_cast<std::size_t>(nprod),
                                        std::vector<double>(g.size()));
    std::vector<double> tmp(nprod);
    for (std::size_t q = 0; q < g.size(); ++q) {
        eval_harmonics_upto(3, Lmax, g.dirs[q], tmp.data());
        for (int t = 0; t < nprod; ++t) hv[static_cast<std::size_t>(t)][q] = tmp[t];
    }
    std::vector<double> beta_of_slot(nprod);
    std::vector<int> slot_offset(Lmax + 2, 0);
    {
        int pos = 0;
        for (int L = 0; L <= Lmax; ++L) {
            slot_offset[L] = pos;
            const double betaL = beta0_closed_form(p_) * rho_closed_form(p_, L);
            for (int c = 0; c < harmonic_count(3, L); ++c) beta_of_slot[pos++] = betaL;
        }
        slot_offset[Lmax + 1] = pos;
    }
    for (int a = 0; a < n_harm_; ++a) {
        const int la = harm_index_[a][0];
        for (int b = 0; b < n_harm_; ++b) {
            const int lb = harm_index_[b][0];
            auto& terms = tt_angular_[static_cast<std::size_t>(a) * n_harm_ + b];
            // product content: L in {|la-lb|, ..., la+lb} of la+lb parity
            for (int L = std::abs(la - lb); L <= la + lb; L += 2) {
                for (int t = slot_offset[L]; t < slot_offset[L + 1]; ++t) {
                    if (beta_of_slot[t] == 0.0) continue;
                    double proj = 0.0;
                    for (std::size_t q = 0; q < g.size(); ++q)
                        proj += g.weights[q] * hv[static_cast<std::size_t>(a)][q] *
                                hv[static_cast<std::size_t>(b)][q] *
                                hv[static_cast<std::size_t>(t)][q];
                    if (std::abs(proj) > 1e-12)
                        terms.push_back({t, proj * beta_of_slot[t], false});
                }
            }
        }
    }
}

GridSpectrum GridEngine::analyze(const GridField& u) const {
    if (u.n != p_.n || u.N != N_ || u.L != L_)
        throw std::invalid_argument("GridEngine::analyze: field shape mismatch");
    GridSpectrum out;
    out.tails.resize(harm_index_.size());

    // 1. fit tail coefficients on shells
    const GridInterpolator interp(u, p_.tail_exponent());
    const std::size_t nd = fit_dirs_.size();
    const int ns = opt_.fit_shells;
    std::vector<double> b(static_cast<std::size_t>(n_harm_) * ns, 0.0);
    for (int is = 0; is < ns; ++is) {
        const double rs = shell_radii_[is];
        for (std::size_t d = 0; d < nd; ++d) {
            const double val = interp({rs * fit_dirs_[d][0], rs * fit_dirs_[d][1],
                                       rs * fit_dirs_[d][2]});
            const double wv = fit_weights_[d] * val;
            const double* H = &fit_harm_[d * n_harm_];
            for (int t = 0; t < n_harm_; ++t)
                b[static_cast<std::size_t>(t) * ns + is] += wv * H[t];
        }
    }
    for (int t = 0; t < n_harm_; ++t) {
        const int ell = harm_index_[t][0];
        double a00 = 0, a01 = 0, a11 = 0, r0 = 0, r1 = 0;
        for (int is = 0; is < ns; ++is) {
            const double t0 = tau_eval(ell, 0, shell_radii_[is]);
            const double t1 = tau_eval(ell, 1, shell_radii_[is]);
            const double bv = b[static_cast<std::size_t>(t) * ns + is];
            a00 += t0 * t0;
            a01 += t0 * t1;
            a11 += t1 * t1;
            r0 += t0 * bv;
            r1 += t1 * bv;
        }
        const double det = a00 * a11 - a01 * a01;
        out.tails[t].ell = ell;
        out.tails[t].idx = harm_index_[t][1];
        out.tails[t].c0 = (a11 * r0 - a01 * r1) / det;
        out.tails[t].c1 = (a00 * r1 - a01 * r0) / det;
    }

    // 2. remainder = field - tails, tapered
    std::vector<double> w(lattice_size_);
    const double r0t = opt_.taper_start * L_, r1t = opt_.taper_end * L_;
    auto taper = [&](double r) {
        if (r <= r0t) return 1.0;
        if (r >= r1t) return 0.0;
        const double t = (r - r0t) / (r1t - r0t);
        return 1.0 - t * t * (3.0 - 2.0 * t);
    };
    std::vector<double> hbuf(n_harm_);
#pragma omp parallel for schedule(static) firstprivate(hbuf)
    for (int i = 0; i < N_; ++i) {
        const double x = -L_ + i * h_;
        for (int j = 0; j < N_; ++j) {
            const double y = -L_ + j * h_;
            if (p_.n == 2) {
                const std::size_t node = static_cast<std::size_t>(i) * N_ + j;
                const double r = std::hypot(x, y);
                double tail = 0.0;
                if (r > 0) {
                    eval_harmonics_upto(2, opt_.tail_ell_max, {x / r, y / r, 0.0},
                                        hbuf.data());
                    for (int t = 0; t < n_harm_; ++t)
                        tail += (out.tails[t].c0 * tau_eval(harm_index_[t][0], 0, r) +
                                 out.tails[t].c1 * tau_eval(harm_index_[t][0], 1, r)) *
                                hbuf[t];
                } else {
                    tail = out.tails[0].c0 * tau_eval(0, 0, 0.0) +
                           out.tails[0].c1 * tau_eval(0, 1, 0.0);
                }
                w[node] = (u.values[node] - tail) * taper(r);
            } else {
                for (int k = 0; k < N_; ++k) {
                    const double z = -L_ + k * h_;
                    const std::size_t node =
                        (static_cast<std::size_t>(i) * N_ + j) * N_ + k;
                    const double r = std::sqrt(x * x + y * y + z * z);
                    double tail = 0.0;
                    if (r > 0) {
                        eval_harmonics_upto(3, opt_.tail_ell_max,
                                            {x / r, y / r, z / r}, hbuf.data());
                        for (int t = 0; t < n_harm_; ++t)
                            tail +=
                                (out.tails[t].c0 * tau_eval(harm_index_[t][0], 0, r) +
                                 out.tails[t].c1 * tau_eval(harm_index_[t][0], 1, r)) *
                                hbuf[t];
                    } else {
                        tail = out.tails[0].c0 * tau_eval(0, 0, 0.0) +
                               out.tails[0].c1 * tau_eval(0, 1, 0.0);
                    }
                    w[node] = (u.values[node] - tail) * taper(r);
                }
            }
        }
    }

    // 3. FFT of the remainder (h^n scale and center phases)
    out.rem.resize(lattice_size_);
    {
        std::vector<std::complex<double>> in(lattice_size_);
        for (std::size_t i = 0; i < lattice_size_; ++i) in[i] = w[i];
        {
            std::lock_guard<std::mutex> lock(g_fftw_mutex);
            fftw_plan plan =
                p_.n == 2
                    ? fftw_plan_dft_2d(N_, N_, reinterpret_cast<fftw_complex*>(in.data()),
                                       reinterpret_cast<fftw_complex*>(out.rem.data()),
                                       FFTW_FORWARD, FFTW_ESTIMATE)
                    : fftw_plan_dft_3d(N_, N_, N_,
                                       reinterpret_cast<fftw_complex*>(in.data()),
                                       reinterpret_cast<fftw_complex*>(out.rem.data()),
                                       FFTW_FORWARD, FFTW_ESTIMATE);
            fftw_execute(plan);
            fftw_destroy_plan(plan);
        }
        const double hn = std::pow(h_, p_.n);
        if (p_.n == 2) {
            for (int i = 0; i < N_; ++i)
                for (int j = 0; j < N_; ++j)
                    out.rem[static_cast<std::size_t>(i) * N_ + j] *=
                        hn * phase_axis_[i] * phase_axis_[j];
        } else {
            for (int i = 0; i < N_; ++i)
                for (int j = 0; j < N_; ++j)
                    for (int k = 0; k < N_; ++k)
                        out.rem[(static_cast<std::size_t>(i) * N_ + j) * N_ + k] *=
                            hn * phase_axis_[i] * phase_axis_[j] * phase_axis_[k];
        }
    }

    // 4. fine-patch spectrum of the remainder by separable partial DFT
    const std::size_t patch_size = fk0_.size();
    out.patch_rem.assign(patch_size, 0.0);
    if (p_.n == 2) {
        // T1[a, j] = sum_i E[a,i] w[i,j];  patch[a,b] = sum_j T1[a,j] E[b,j]
        std::vector<std::complex<double>> T1(static_cast<std::size_t>(nf_) * N_, 0.0);
#pragma omp parallel for schedule(static)
        for (int a = 0; a < nf_; ++a)
            for (int i = 0; i < N_; ++i) {
                const std::complex<double> e = emat_[static_cast<std::size_t>(a) * N_ + i];
                const double* wrow = &w[static_cast<std::size_t>(i) * N_];
                std::complex<double>* trow = &T1[static_cast<std::size_t>(a) * N_];
                for (int j = 0; j < N_; ++j) trow[j] += e * wrow[j];
            }
#pragma omp parallel for schedule(static)
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b) {
                std::complex<double> acc = 0.0;
                const std::complex<double>* trow = &T1[static_cast<std::size_t>(a) * N_];
                const std::complex<double>* erow = &emat_[static_cast<std::size_t>(b) * N_];
                for (int j = 0; j < N_; ++j) acc += trow[j] * erow[j];
                out.patch_rem[static_cast<std::size_t>(a) * nf_ + b] = acc;
            }
    } else {
        std::vector<std::complex<double>> T1(static_cast<std::size_t>(nf_) * N_ * N_, 0.0);
#pragma omp parallel for schedule(static)
        for (int a = 0; a < nf_; ++a)
            for (int i = 0; i < N_; ++i) {
                const std::complex<double> e = emat_[static_cast<std::size_t>(a) * N_ + i];
                const double* wsl = &w[static_cast<std::size_t>(i) * N_ * N_];
                std::complex<double>* tsl =
                    &T1[static_cast<std::size_t>(a) * N_ * N_];
                for (int jk = 0; jk < N_ * N_; ++jk) tsl[jk] += e * wsl[jk];
            }
        std::vector<std::complex<double>> T2(
            static_cast<std::size_t>(nf_) * nf_ * N_, 0.0);
#pragma omp parallel for schedule(static)
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b) {
                std::complex<double>* t2 =
                    &T2[(static_cast<std::size_t>(a) * nf_ + b) * N_];
                for (int j = 0; j < N_; ++j) {
                    const std::complex<double> e =
                        emat_[static_cast<std::size_t>(b) * N_ + j];
                    const std::complex<double>* t1 =
                        &T1[(static_cast<std::size_t>(a) * N_ + j) * N_];
                    for (int k = 0; k < N_; ++k) t2[k] += e * t1[k];
                }
            }
#pragma omp parallel for schedule(static)
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b)
                for (int c = 0; c < nf_; ++c) {
                    std::complex<double> acc = 0.0;
                    const std::complex<double>* t2 =
                        &T2[(static_cast<std::size_t>(a) * nf_ + b) * N_];
                    const std::complex<double>* erow =
                        &emat_[static_cast<std::size_t>(c) * N_];
                    for (int k = 0; k < N_; ++k) acc += t2[k] * erow[k];
                    out.patch_rem[(static_cast<std::size_t>(a) * nf_ + b) * nf_ + c] = acc;
                }
    }

    // 5. analytic tail spectrum on the lattice and the patch
    out.tail_spec.assign(lattice_size_, 0.0);
    out.patch_tail.assign(patch_size, 0.0);
    auto tail_value = [this, &out](double z1, double z2, double z3, double k0v,
                                   double k1v, double* buf) -> std::complex<double> {
        const double rho = p_.n == 2 ? std::hypot(z1, z2)
                                     : std::sqrt(z1 * z1 + z2 * z2 + z3 * z3);
        if (rho <= 1e-14) {
            // only the finite K_{1-s} weight survives at the origin; angular
            // factors of ell >= 1 average out in the covering cell
            return out.tails[0].c1 * k1v;
        }
        eval_harmonics_upto(p_.n, opt_.tail_ell_max,
                            {z1 / rho, z2 / rho, p_.n == 2 ? 0.0 : z3 / rho}, buf);
        std::complex<double> acc = 0.0;
        for (int t = 0; t < n_harm_; ++t) {
            const double amp = (out.tails[t].c0 * k0v + out.tails[t].c1 * k1v) * buf[t];
            acc += kImagPow[harm_index_[t][0] % 4] * amp;
        }
        return acc;
    };
    if (p_.n == 2) {
        std::vector<double> hb(n_harm_);
        for (int i = 0; i < N_; ++i)
            for (int j = 0; j < N_; ++j) {
                const std::size_t node = static_cast<std::size_t>(i) * N_ + j;
                if (i == 0 && j == 0) continue;  // zero mode excluded
                out.tail_spec[node] = tail_value(zeta_axis_[i], zeta_axis_[j], 0.0,
                                                 k0_[node], k1_[node], hb.data());
            }
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b) {
                const std::size_t node = static_cast<std::size_t>(a) * nf_ + b;
                out.patch_tail[node] =
                    tail_value(fidx_[a], fidx_[b], 0.0, fk0_[node], fk1_[node], hb.data());
            }
    } else {
#pragma omp parallel
        {
            std::vector<double> hb(n_harm_);
#pragma omp for schedule(static)
            for (int i = 0; i < N_; ++i)
                for (int j = 0; j < N_; ++j)
                    for (int k = 0; k < N_; ++k) {
                        if (i == 0 && j == 0 && k == 0) continue;
                        const std::size_t node =
                            (static_cast<std::size_t>(i) * N_ + j) * N_ + k;
                        out.tail_spec[node] =
                            tail_value(zeta_axis_[i], zeta_axis_[j], zeta_axis_[k],
                                       k0_[node], k1_[node], hb.data());
                    }
        }
        std::vector<double> hb(n_harm_);
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b)
                for (int c = 0; c < nf_; ++c) {
                    const std::size_t node =
                        (static_cast<std::size_t>(a) * nf_ + b) * nf_ + c;
                    out.patch_tail[node] = tail_value(fidx_[a], fidx_[b], fidx_[c],
                                                      fk0_[node], fk1_[node], hb.data());
                }
    }

    // 6. grid L^q norm of the field
    double qsum = 0.0;
    const double q = p_.q();
#pragma omp parallel for reduction(+ : qsum) schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(lattice_size_); ++i)
        qsum += std::pow(std::abs(u.values[static_cast<std::size_t>(i)]), q);
    out.lq = std::pow(qsum * std::pow(h_, p_.n), 1.0 / q);
    return out;
}

// S(ζ) = Re[tail_u conj(rem_v) + rem_u conj(tail_v) + rem_u conj(rem_v)]
namespace {
inline double cross_summand(const std::complex<double>& tu, const std::complex<double>& ru,
                            const std::complex<double>& tv, const std::complex<double>& rv) {
    return (tu * std::conj(rv)).real() + (ru * std::conj(tv)).real() +
           (ru * std::conj(rv)).real();
}
}  // namespace

double GridEngine::tt_block(const GridSpectrum& u, const GridSpectrum& v,
                            const std::array<double, 3>& xi) const {
    const double surf = sphere_surface(p_.n);
    double acc = 0.0;
    if (p_.n == 2) {
        const double phix = std::atan2(xi[1], xi[0]);
        double ck[16], sk[16];
        for (int k = 0; k <= 2 * opt_.tail_ell_max; ++k) {
            ck[k] = std::cos(k * phix);
            sk[k] = std::sin(k * phix);
        }
        for (int a = 0; a < n_harm_; ++a) {
            const int la = harm_index_[a][0];
            for (int b = 0; b < n_harm_; ++b) {
                const int lb = harm_index_[b][0];
                if ((la + lb) % 2 != 0) continue;  // mixed parity is imaginary
                const double phase = ((la - lb) % 4 == 0) ? 1.0 : -1.0;
                const auto& terms = tt_angular_[static_cast<std::size_t>(a) * n_harm_ + b];
                if (terms.empty()) continue;
                double ang = 0.0;
                for (const auto& t : terms) ang += t.coef * (t.sine ? sk[t.k] : ck[t.k]);
                double radial = 0.0;
                for (int j = 0; j < 2; ++j)
                    for (int jp = 0; jp < 2; ++jp)
                        radial += (j == 0 ? u.tails[a].c0 : u.tails[a].c1) *
                                  (jp == 0 ? v.tails[b].c0 : v.tails[b].c1) *
                                  rad_tt_[j][jp];
                acc += phase * radial * ang;
            }
        }
        return acc * surf;
    }
    const int Lmax = 2 * opt_.tail_ell_max;
    std::vector<double> hb(static_cast<std::size_t>(harmonic_count_upto(3, Lmax)));
    eval_harmonics_upto(3, Lmax, xi, hb.data());
    for (int a = 0; a < n_harm_; ++a) {
        const int la = harm_index_[a][0];
        for (int b = 0; b < n_harm_; ++b) {
            const int lb = harm_index_[b][0];
            if ((la + lb) % 2 != 0) continue;
            const double phase = ((la - lb) % 4 == 0) ? 1.0 : -1.0;
            const auto& terms = tt_angular_[static_cast<std::size_t>(a) * n_harm_ + b];
            if (terms.empty()) continue;
            double ang = 0.0;
            for (const auto& t : terms) ang += t.coef * hb[static_cast<std::size_t>(t.k)];
            double radial = 0.0;
            for (int j = 0; j < 2; ++j)
                for (int jp = 0; jp < 2; ++jp)
                    radial += (j == 0 ? u.tails[a].c0 : u.tails[a].c1) *
                              (jp == 0 ? v.tails[b].c0 : v.tails[b].c1) * rad_tt_[j][jp];
            acc += phase * radial * ang;
        }
    }
    return acc * surf;
}

double GridEngine::tt_block_iso(const GridSpectrum& u, const GridSpectrum& v) const {
    // isotropic weight: <Y_a Y_b> = delta_ab
    double acc = 0.0;
    for (int a = 0; a < n_harm_; ++a) {
        const double r = u.tails[a].c0 * v.tails[a].c0 * rad_tt_[0][0] +
                         (u.tails[a].c0 * v.tails[a].c1 + u.tails[a].c1 * v.tails[a].c0) *
                             rad_tt_[0][1] +
                         u.tails[a].c1 * v.tails[a].c1 * rad_tt_[1][1];
        acc += r;  // phase (-i)^l (i)^l = 1
    }
    return acc * sphere_surface(p_.n);
}

double GridEngine::raw_pair(const GridSpectrum& u, const GridSpectrum& v,
                            const std::array<double, 3>& xi) const {
    const double s2 = 2.0 * p_.s;
    const bool half = std::abs(s2 - 1.0) < 1e-15;
    const double dzn = std::pow(std::numbers::pi / L_, p_.n);
    double acc = 0.0;
    if (p_.n == 2) {
        for (int i = 0; i < N_; ++i) {
            const double d1 = xi[0] * zeta_axis_[i];
            const std::size_t row = static_cast<std::size_t>(i) * N_;
            for (int j = 0; j < N_; ++j) {
                const std::size_t node = row + j;
                if (in_patch_[node]) continue;
                const double dot = d1 + xi[1] * zeta_axis_[j];
                const double wgt = half ? std::abs(dot) : std::pow(std::abs(dot), s2);
                acc += wgt * cross_summand(u.tail_spec[node], u.rem[node],
                                           v.tail_spec[node], v.rem[node]);
            }
        }
        acc *= dzn;
        // fine patch
        const double fdzn = dzn / std::pow(opt_.patch_refine, p_.n);
        double pacc = 0.0;
        for (int a = 0; a < nf_; ++a) {
            const double d1 = xi[0] * fidx_[a];
            for (int b = 0; b < nf_; ++b) {
                const std::size_t node = static_cast<std::size_t>(a) * nf_ + b;
                const double rho2 = fidx_[a] * fidx_[a] + fidx_[b] * fidx_[b];
                if (rho2 <= 1e-28) continue;
                const double dot = d1 + xi[1] * fidx_[b];
                const double wgt = half ? std::abs(dot) : std::pow(std::abs(dot), s2);
                pacc += wgt * cross_summand(u.patch_tail[node], u.patch_rem[node],
                                            v.patch_tail[node], v.patch_rem[node]);
            }
        }
        acc += pacc * fdzn;
    } else {
        for (int i = 0; i < N_; ++i) {
            const double d1 = xi[0] * zeta_axis_[i];
            for (int j = 0; j < N_; ++j) {
                const double d12 = d1 + xi[1] * zeta_axis_[j];
                const std::size_t row = (static_cast<std::size_t>(i) * N_ + j) * N_;
                for (int k = 0; k < N_; ++k) {
                    const std::size_t node = row + k;
                    if (in_patch_[node]) continue;
                    const double dot = d12 + xi[2] * zeta_axis_[k];
                    const double wgt = half ? std::abs(dot) : std::pow(std::abs(dot), s2);
                    acc += wgt * cross_summand(u.tail_spec[node], u.rem[node],
                                               v.tail_spec[node], v.rem[node]);
                }
            }
        }
        acc *= dzn;
        const double fdzn = dzn / std::pow(opt_.patch_refine, p_.n);
        double pacc = 0.0;
        for (int a = 0; a < nf_; ++a)
            for (int b = 0; b < nf_; ++b) {
                const double d12 = xi[0] * fidx_[a] + xi[1] * fidx_[b];
                const double r2ab = fidx_[a] * fidx_[a] + fidx_[b] * fidx_[b];
                for (int c = 0; c < nf_; ++c) {
                    if (r2ab + fidx_[c] * fidx_[c] <= 1e-28) continue;
                    const std::size_t node =
                        (static_cast<std::size_t>(a) * nf_ + b) * nf_ + c;
                    const double dot = d12 + xi[2] * fidx_[c];
                    const double wgt = half ? std::abs(dot) : std::pow(std::abs(dot), s2);
                    pacc += wgt * cross_summand(u.patch_tail[node], u.patch_rem[node],
                                                v.patch_tail[node], v.patch_rem[node]);
                }
            }
        acc += pacc * fdzn;
    }
    return acc + tt_block(u, v, xi);
}

std::vector<double> GridEngine::raw_table(const GridSpectrum& u,
                                          const GridSpectrum& v) const {
    std::vector<double> out(xi_.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(xi_.size()); ++i)
        out[static_cast<std::size_t>(i)] =
            raw_pair(u, v, xi_.dirs[static_cast<std::size_t>(i)]);
    return out;
}

double GridEngine::raw_seminorm(const GridSpectrum& u, const GridSpectrum& v) const {
    const double s2 = 2.0 * p_.s;
    double acc = 0.0;
#pragma omp parallel for reduction(+ : acc) schedule(static)
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(lattice_size_); ++ii) {
        const std::size_t node = static_cast<std::size_t>(ii);
        if (in_patch_[node]) continue;
        double rho;
        if (p_.n == 2) {
            const int i = static_cast<int>(node / N_), j = static_cast<int>(node % N_);
            rho = std::hypot(zeta_axis_[i], zeta_axis_[j]);
        } else {
            const int k = static_cast<int>(node % N_);
            const int j = static_cast<int>((node / N_) % N_);
            const int i = static_cast<int>(node / (static_cast<std::size_t>(N_) * N_));
            rho = std::sqrt(zeta_axis_[i] * zeta_axis_[i] + zeta_axis_[j] * zeta_axis_[j] +
                            zeta_axis_[k] * zeta_axis_[k]);
        }
        acc += std::pow(rho, s2) * cross_summand(u.tail_spec[node], u.rem[node],
                                                 v.tail_spec[node], v.rem[node]);
    }
    acc *= std::pow(std::numbers::pi / L_, p_.n);
    // patch
    double pacc = 0.0;
    const std::size_t patch_size = fk0_.size();
    for (std::size_t node = 0; node < patch_size; ++node) {
        double rho2;
        if (p_.n == 2) {
            const int a = static_cast<int>(node / nf_), b = static_cast<int>(node % nf_);
            rho2 = fidx_[a] * fidx_[a] + fidx_[b] * fidx_[b];
        } else {
            const int c = static_cast<int>(node % nf_);
            const int b = static_cast<int>((node / nf_) % nf_);
            const int a = static_cast<int>(node / (static_cast<std::size_t>(nf_) * nf_));
            rho2 = fidx_[a] * fidx_[a] + fidx_[b] * fidx_[b] + fidx_[c] * fidx_[c];
        }
        if (rho2 <= 1e-28) continue;
        pacc += std::pow(rho2, p_.s) * cross_summand(u.patch_tail[node], u.patch_rem[node],
                                                     v.patch_tail[node], v.patch_rem[node]);
    }
    acc += pacc * std::pow(std::numbers::pi / L_ / opt_.patch_refine, p_.n);
    return acc + tt_block_iso(u, v);
}

double GridEngine::a_xi_bilinear(const GridSpectrum& u, const GridSpectrum& v,
                                 const std::array<double, 3>& xi) const {
    return cal_.c_cal * raw_pair(u, v, xi);
}

DirectionalEnergyTable GridEngine::axi_table(const GridSpectrum& u) const {
    DirectionalEnergyTable t;
    t.values = raw_table(u, u);
    for (double& v : t.values) v *= cal_.c_cal;
    return t;
}

std::vector<double> GridEngine::bilinear_table(const GridSpectrum& u,
                                               const GridSpectrum& v) const {
    std::vector<double> t = raw_table(u, v);
    for (double& x : t) x *= cal_.c_cal;
    return t;
}

double GridEngine::seminorm_sq(const GridSpectrum& u) const {
    return cal_.c_hs * raw_seminorm(u, u);
}

double GridEngine::phi_mean(const std::vector<double>& a) const {
    if (a.size() != xi_.size()) throw std::invalid_argument("phi_mean: size mismatch");
    const double r = p_.r();
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] > 0.0))
            throw std::domain_error("phi_mean: gauge must be positive");
        acc += xi_.weights[i] * std::pow(a[i], -r);
    }
    return std::pow(acc, -1.0 / r);
}

double GridEngine::e_aff(const GridSpectrum& u) const {
    const DirectionalEnergyTable t = axi_table(u);
    const double via_phi = phi_mean(t.values);
    // star-body route: (|K_u|/|B_1|)^{-2s/n} with |K_u| = |B_1| <A^{-n/2s}>
    double acc = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i)
        acc += xi_.weights[i] * std::pow(t.values[i], -p_.n / (2.0 * p_.s));
    const double via_body = std::pow(acc, -2.0 * p_.s / p_.n);
    if (std::abs(via_phi - via_body) > 1e-12 * std::abs(via_phi))
        throw std::logic_error("e_aff: volume route disagrees with the power mean");
    return via_phi;
}

double GridEngine::deficit_aff(const GridSpectrum& u) const {
    return e_aff(u) - cal_.S_grid * u.lq * u.lq;
}

double GridEngine::deficit_frac(const GridSpectrum& u) const {
    return seminorm_sq(u) - cal_.S_grid * u.lq * u.lq;
}

GridEngine::VarianceCorrection GridEngine::variance_correction(
    const GridSpectrum& phi) const {
    const std::vector<double> L = bilinear_table(u_spec_, phi);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) {
        m1 += xi_.weights[i] * L[i];
        m2 += xi_.weights[i] * L[i] * L[i];
    }
    VarianceCorrection out;
    out.variance = m2 - m1 * m1;
    out.r_s = (p_.n + 2.0 * p_.s) / (p_.s * cal_.A0) * out.variance;
    return out;
}

StarBody GridEngine::gauge_and_body(const GridSpectrum& u) const {
    const DirectionalEnergyTable t = axi_table(u);
    StarBody body;
    body.gauge.resize(t.values.size());
    body.boundary.resize(t.values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (!(t.values[i] > 0.0))
            throw std::domain_error("gauge_and_body: A_xi must be positive");
        body.gauge[i] = std::pow(t.values[i], 1.0 / (2.0 * p_.s));
        const double inv = 1.0 / body.gauge[i];
        for (int d = 0; d < 3; ++d) body.boundary[i][d] = inv * xi_.dirs[i][d];
        acc += xi_.weights[i] * std::pow(t.values[i], -p_.n / (2.0 * p_.s));
    }
    body.volume = unit_ball_volume(p_.n) * acc;
    return body;
}

void GridEngine::export_body_csv(const std::string& path, const StarBody& body) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.precision(15);
    if (p_.n == 2) {
        os << "angle,radius\n";
        for (std::size_t i = 0; i < body.boundary.size(); ++i)
            os << std::atan2(xi_.dirs[i][1], xi_.dirs[i][0]) << ','
               << 1.0 / body.gauge[i] << '\n';
    } else {
        os << "x,y,z\n";
        for (const auto& b : body.boundary)
            os << b[0] << ',' << b[1] << ',' << b[2] << '\n';
    }
}

double GridEngine::lq_norm_grid(const GridField& u) const {
    double qsum = 0.0;
    const double q = p_.q();
    for (double v : u.values) qsum += std::pow(std::abs(v), q);
    return std::pow(qsum * std::pow(h_, p_.n), 1.0 / q);
}


double GridEngine::seminorm_inner(const GridSpectrum& u, const GridSpectrum& v) const {
    return cal_.c_hs * raw_seminorm(u, v);
}

GridSpectrum lin_comb(double a, const GridSpectrum& u, double b, const GridSpectrum& v) {
    if (u.tails.size() != v.tails.size() || u.rem.size() != v.rem.size())
        throw std::invalid_argument("lin_comb: spectra from different engines");
    GridSpectrum out = u;
    for (std::size_t t = 0; t < out.tails.size(); ++t) {
        out.tails[t].c0 = a * u.tails[t].c0 + b * v.tails[t].c0;
        out.tails[t].c1 = a * u.tails[t].c1 + b * v.tails[t].c1;
    }
    for (std::size_t i = 0; i < out.tail_spec.size(); ++i)
        out.tail_spec[i] = a * u.tail_spec[i] + b * v.tail_spec[i];
    for (std::size_t i = 0; i < out.rem.size(); ++i)
        out.rem[i] = a * u.rem[i] + b * v.rem[i];
    for (std::size_t i = 0; i < out.patch_tail.size(); ++i)
        out.patch_tail[i] = a * u.patch_tail[i] + b * v.patch_tail[i];
    for (std::size_t i = 0; i < out.patch_rem.size(); ++i)
        out.patch_rem[i] = a * u.patch_rem[i] + b * v.patch_rem[i];
    out.lq = 0.0;
    return out;
}

}  // namespace affinefrac
