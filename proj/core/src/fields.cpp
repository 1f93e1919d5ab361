#include "affinefrac/fields.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace affinefrac {

double SphereCoeffs::sum_sq() const {
    double acc = 0.0;
    for (double a : coeffs) acc += a * a;
    return acc;
}

SectorBasis::SectorBasis(const Params& p, int ell, int kmax, int quad_order)
    : p_(p), ell_(ell), kmax_(kmax) {
    if (kmax < ell) throw std::invalid_argument("SectorBasis: kmax >= ell");
    const int nb = kmax - ell + 1;
    const int M = quad_order > 0 ? quad_order : std::max(400, 8 * nb);
    const Rule1D gl = gauss_legendre(M).mapped(0.0, std::numbers::pi);
    theta_ = gl.nodes;
    meas_.resize(theta_.size());
    const double surf = sphere_surface(p.n);
    for (std::size_t i = 0; i < theta_.size(); ++i)
        meas_[i] = surf * gl.weights[i] * std::pow(std::sin(theta_[i]), p.n - 1);

    // Raw functions (sin θ)^ell C_j^{lam}(cos θ), prescaled by 1/C_j(1).
    const double lam_g = ell + 0.5 * (p.n - 1.0);
    std::vector<std::vector<double>> raw(nb, std::vector<double>(theta_.size()));
    for (int j = 0; j < nb; ++j) {
        const double cj1 = std::exp(std::lgamma(2.0 * lam_g + j) -
                                    std::lgamma(2.0 * lam_g) - std::lgamma(j + 1.0));
        for (std::size_t i = 0; i < theta_.size(); ++i) {
            const double t = std::cos(theta_[i]);
            raw[j][i] = std::pow(std::sin(theta_[i]), ell) *
                        gegenbauer(j, lam_g, t) / cj1;
        }
    }
    Eigen::MatrixXd G(nb, nb);
    for (int i = 0; i < nb; ++i)
        for (int j = i; j < nb; ++j) {
            double acc = 0.0;
            for (std::size_t q = 0; q < theta_.size(); ++q)
                acc += raw[i][q] * raw[j][q] * meas_[q];
            G(i, j) = G(j, i) = acc;
        }
    Eigen::LLT<Eigen::MatrixXd> llt(G);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("SectorBasis: Gram matrix not positive definite");
    // basis = L^{-1} raw  (rows orthonormal)
    Eigen::MatrixXd Linv = Eigen::MatrixXd::Identity(nb, nb);
    llt.matrixL().solveInPlace(Linv);
    basis_.assign(nb, std::vector<double>(theta_.size(), 0.0));
    coef_raw_.assign(nb, std::vector<double>(nb, 0.0));
    for (int i = 0; i < nb; ++i) {
        for (int j = 0; j <= i; ++j) {
            const double c = Linv(i, j);
            coef_raw_[i][j] = c;
            if (c == 0.0) continue;
            for (std::size_t q = 0; q < theta_.size(); ++q)
                basis_[i][q] += c * raw[j][q];
        }
    }
    lambda_.resize(nb);
    for (int j = 0; j < nb; ++j) lambda_[j] = lambda_k(p_, ell + j);
}

SphereCoeffs SectorBasis::project(const RadialProfile& f, bool check_truncation,
                                  double tol) const {
    const double nu = 0.5 * (p_.n - 2.0 * p_.s);
    std::vector<double> g(theta_.size());
    for (std::size_t i = 0; i < theta_.size(); ++i) {
        const double r = std::tan(0.5 * theta_[i]);
        g[i] = std::pow(0.5 * (1.0 + r * r), nu) * f(r);
    }
    SphereCoeffs out;
    out.ell = ell_;
    out.coeffs.resize(basis_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < theta_.size(); ++i) total += g[i] * g[i] * meas_[i];
    out.norm_sq = total;
    for (std::size_t k = 0; k < basis_.size(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < theta_.size(); ++i)
            acc += g[i] * basis_[k][i] * meas_[i];
        out.coeffs[k] = acc;
    }
    if (check_truncation) {
        const double kept = out.sum_sq();
        const double lost = total - kept;
        if (lost > tol * total)
            throw TruncationError("sector expansion truncated", lost, total);
    }
    return out;
}

double SectorBasis::basis_value(int k, double theta) const {
    const int j = k - ell_;
    const double lam_g = ell_ + 0.5 * (p_.n - 1.0);
    const double t = std::cos(theta);
    double acc = 0.0;
    for (int i = 0; i <= j; ++i) {
        if (coef_raw_[j][i] == 0.0) continue;
        const double ci1 = std::exp(std::lgamma(2.0 * lam_g + i) -
                                    std::lgamma(2.0 * lam_g) - std::lgamma(i + 1.0));
        acc += coef_raw_[j][i] * std::pow(std::sin(theta), ell_) *
               gegenbauer(i, lam_g, t) / ci1;
    }
    return acc;
}

double SectorBasis::synth(const SphereCoeffs& c, double theta) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < c.coeffs.size() && k < basis_.size(); ++k)
        acc += c.coeffs[k] * basis_value(ell_ + static_cast<int>(k), theta);
    return acc;
}

RadialProfile SectorBasis::mode_profile(int k) const {
    const double nu = 0.5 * (p_.n - 2.0 * p_.s);
    const SectorBasis* self = this;
    RadialProfile out;
    out.decay_exponent = p_.n - 2.0 * p_.s + (k > ell_ ? 0.0 : ell_);
    out.eval = [self, k, nu](double r) {
        const double theta = 2.0 * std::atan(r);
        return std::pow(2.0 / (1.0 + r * r), nu) * self->basis_value(k, theta);
    };
    return out;
}

// ---------------------------------------------------------------------------

RadialProfile bubble_profile(const Params& p) {
    const double nu = 0.5 * (p.n - 2.0 * p.s);
    return {[nu](double r) { return std::pow(1.0 + r * r, -nu); }, p.n - 2.0 * p.s};
}

RadialProfile degree_two_test_profile(const Params& p) {
    const double nu = 0.5 * (p.n - 2.0 * p.s);
    const int n = p.n;
    return {[nu, n](double r) {
                const double r2 = r * r;
                const double ct = (1.0 - r2) / (1.0 + r2);  // cos(theta)
                return std::pow(2.0 / (1.0 + r2), nu) * (ct * ct - 1.0 / (n + 1.0));
            },
            p.n - 2.0 * p.s};
}

std::vector<SectorField> kernel_fields(const Params& p) {
    const double nu = 0.5 * (p.n - 2.0 * p.s);
    const double m = p.n - 2.0 * p.s;
    std::vector<SectorField> out;
    out.push_back({0, bubble_profile(p), 0, "U"});
    out.push_back({0,
                   {[nu, m](double r) {
                        const double u = std::pow(1.0 + r * r, -nu);
                        return 0.5 * m * u * (1.0 - r * r) / (1.0 + r * r);
                    },
                    m},
                   0,
                   "Z0"});
    out.push_back({1,
                   {[nu, m](double r) {
                        return -m * r * std::pow(1.0 + r * r, -nu - 1.0);
                    },
                    m + 1.0},
                   0,
                   "dU"});
    out.push_back({2,
                   {[nu, m](double r) {
                        return -m * r * r / (1.0 + r * r) * std::pow(1.0 + r * r, -nu);
                    },
                    m},
                   0,
                   "zY2"});
    return out;
}

// ---------------------------------------------------------------------------

double GridField::boundary_max() const {
    double mx = 0.0;
    if (n == 2) {
        for (int i = 0; i < N; ++i) {
            mx = std::max({mx, std::abs(at2(i, 0)), std::abs(at2(i, N - 1)),
                           std::abs(at2(0, i)), std::abs(at2(N - 1, i))});
        }
    } else {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                mx = std::max({mx, std::abs(at3(i, j, 0)), std::abs(at3(i, j, N - 1)),
                               std::abs(at3(i, 0, j)), std::abs(at3(i, N - 1, j)),
                               std::abs(at3(0, i, j)), std::abs(at3(N - 1, i, j))});
    }
    return mx;
}

namespace {
void check_same_shape(const GridField& a, const GridField& b) {
    if (a.n != b.n || a.N != b.N || a.L != b.L)
        throw std::invalid_argument("grid field shape mismatch");
}
}  // namespace

GridField operator+(const GridField& a, const GridField& b) {
    check_same_shape(a, b);
    GridField out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
    return out;
}

GridField operator-(const GridField& a, const GridField& b) {
    check_same_shape(a, b);
    GridField out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= b.values[i];
    return out;
}

GridField operator*(double c, const GridField& a) {
    GridField out = a;
    for (double& v : out.values) v *= c;
    return out;
}

GridField make_grid_field(int n, double L, int N,
                          const std::function<double(const std::array<double, 3>&)>& f) {
    if (n != 2 && n != 3) throw std::invalid_argument("make_grid_field: n in {2,3}");
    if (N % 2 != 0) throw std::invalid_argument("make_grid_field: N even");
    GridField out;
    out.n = n;
    out.N = N;
    out.L = L;
    out.values.resize(n == 2 ? static_cast<std::size_t>(N) * N
                             : static_cast<std::size_t>(N) * N * N);
    const double h = out.h();
    if (n == 2) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < N; ++i) {
            const double x = -L + i * h;
            for (int j = 0; j < N; ++j)
                out.at2(i, j) = f({x, -L + j * h, 0.0});
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < N; ++i) {
            const double x = -L + i * h;
            for (int j = 0; j < N; ++j) {
                const double y = -L + j * h;
                for (int k = 0; k < N; ++k)
                    out.at3(i, j, k) = f({x, y, -L + k * h});
            }
        }
    }
    return out;
}

GridField realize_on_grid(const SectorField& f, const Params& p, double L, int N,
                          double boundary_threshold) {
    const int ell = f.ell, idx = f.harmonic_idx, n = p.n;
    const auto& prof = f.profile;
    GridField out = make_grid_field(n, L, N, [&](const std::array<double, 3>& x) {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        if (r == 0.0) return ell == 0 ? prof(0.0) : 0.0;
        const std::array<double, 3> w = {x[0] / r, x[1] / r, x[2] / r};
        return prof(r) * eval_harmonic(n, ell, idx, w);
    });
    out.truncation_warning = out.boundary_max() > boundary_threshold;
    return out;
}

GridInterpolator::GridInterpolator(const GridField& f, double tail_exponent,
                                   double pad_factor)
    : f_(&f), tail_exp_(tail_exponent), pad_(pad_factor) {
    inner_ = f.L - 2.0 * f.h();
}

namespace {
inline double catmull_rom(double pm1, double p0, double p1, double p2, double t) {
    return p0 + 0.5 * t * (p1 - pm1 +
                           t * (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2 +
                                t * (3.0 * (p0 - p1) + p2 - pm1)));
}
}  // namespace

double GridInterpolator::operator()(std::array<double, 3> x) const {
    const GridField& f = *f_;
    double scale = 1.0;
    double mx = 0.0;
    for (int d = 0; d < f.n; ++d) mx = std::max(mx, std::abs(x[d]) / inner_);
    if (mx > 1.0) {
        if (mx > pad_)
            throw OutOfBoxError("GridInterpolator: query outside padded box");
        // Pull back radially onto the box and scale by the homogeneous tail.
        for (int d = 0; d < f.n; ++d) x[d] /= mx;
        scale = std::pow(mx, -tail_exp_);
    }
    const double h = f.h();
    const int N = f.N;
    auto locate = [&](double c, int& i0, double& t) {
        const double u = (c + f.L) / h;
        i0 = static_cast<int>(std::floor(u));
        i0 = std::max(1, std::min(N - 3, i0));
        t = u - i0;
    };
    if (f.n == 2) {
        int i0, j0;
        double tx, ty;
        locate(x[0], i0, tx);
        locate(x[1], j0, ty);
        double col[4];
        for (int a = -1; a <= 2; ++a) {
            col[a + 1] = catmull_rom(f.at2(i0 + a, j0 - 1), f.at2(i0 + a, j0),
                                     f.at2(i0 + a, j0 + 1), f.at2(i0 + a, j0 + 2), ty);
        }
        return scale * catmull_rom(col[0], col[1], col[2], col[3], tx);
    }
    int i0, j0, k0;
    double tx, ty, tz;
    locate(x[0], i0, tx);
    locate(x[1], j0, ty);
    locate(x[2], k0, tz);
    double plane[4];
    for (int a = -1; a <= 2; ++a) {
        double col[4];
        for (int b = -1; b <= 2; ++b) {
            col[b + 1] = catmull_rom(f.at3(i0 + a, j0 + b, k0 - 1),
                                     f.at3(i0 + a, j0 + b, k0),
                                     f.at3(i0 + a, j0 + b, k0 + 1),
                                     f.at3(i0 + a, j0 + b, k0 + 2), tz);
        }
        plane[a + 1] = catmull_rom(col[0], col[1], col[2], col[3], ty);
    }
    return scale * catmull_rom(plane[0], plane[1], plane[2], plane[3], tx);
}

// ---------------------------------------------------------------------------

void write_grid_field(std::ostream& os, const GridField& f, const std::string& name) {
    nlohmann::json hdr;
    hdr["n"] = f.n;
    hdr["L"] = f.L;
    hdr["N"] = f.N;
    hdr["name"] = name;
    hdr["count"] = f.values.size();
    os << hdr.dump() << '\n';
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(double)));
}

GridField read_grid_field(std::istream& is, std::string* name) {
    std::string line;
    std::getline(is, line);
    const auto hdr = nlohmann::json::parse(line);
    GridField f;
    f.n = hdr.at("n").get<int>();
    f.L = hdr.at("L").get<double>();
    f.N = hdr.at("N").get<int>();
    const auto count = hdr.at("count").get<std::size_t>();
    const std::size_t expect = f.n == 2 ? static_cast<std::size_t>(f.N) * f.N
                                        : static_cast<std::size_t>(f.N) * f.N * f.N;
    if (count != expect)
        throw std::runtime_error("read_grid_field: inconsistent sample count");
    if (name) *name = hdr.value("name", "");
    f.values.resize(count);
    is.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("read_grid_field: short read");
    return f;
}

void write_grid_field_file(const std::string& path, const GridField& f,
                           const std::string& name) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    write_grid_field(os, f, name);
}

GridField read_grid_field_file(const std::string& path, std::string* name) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_grid_field(is, name);
}

}  // namespace affinefrac
