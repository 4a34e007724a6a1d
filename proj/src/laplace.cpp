#include "tridisk/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include <Eigen/SVD>

namespace tridisk {

namespace {

// Horner evaluation of sum_{n=1..N} c_n u^n and derivatives with respect to u.
cx poly1(const std::vector<cx>& c, cx u) {
    cx s{0.0, 0.0};
    for (int n = static_cast<int>(c.size()); n >= 1; --n) s = (s + c[n - 1]) * u;
    return s;
}

cx poly1_du(const std::vector<cx>& c, cx u) {
    cx s{0.0, 0.0};
    for (int n = static_cast<int>(c.size()); n >= 1; --n) s = s * u + double(n) * c[n - 1];
    return s;
}

cx poly1_du2(const std::vector<cx>& c, cx u) {
    cx s{0.0, 0.0};
    for (int n = static_cast<int>(c.size()); n >= 2; --n) s = s * u + double(n) * (n - 1) * c[n - 1];
    return s;
}

using SpecKey = std::tuple<double, double, double, double, int, int>;

SpecKey key_of(const DomainSpec& s, const SolverParams& p) {
    return {s.c1, s.r1, s.c2, s.r2, p.N, p.M_factor};
}

void fill_row(const DomainSpec& spec, int N, int M, int row, double* out, int stride) {
    int comp = row / M;
    int m = row % M;
    double th = 2.0 * kPi * m / M;
    cx z = spec.center(comp) + spec.radius(comp) * std::polar(1.0, th);
    auto at = [&](int col) -> double& { return out[static_cast<long>(col) * stride]; };
    at(0) = 1.0;
    for (int k = 1; k <= 2; ++k) at(k) = std::log(std::abs(z - spec.center(k)));
    cx zn{1.0, 0.0};
    for (int n = 1; n <= N; ++n) {
        zn *= z;
        at(3 + 2 * (n - 1)) = zn.real();
        at(3 + 2 * (n - 1) + 1) = -zn.imag();
    }
    for (int k = 1; k <= 2; ++k) {
        cx u = spec.radius(k) / (z - spec.center(k));
        cx un{1.0, 0.0};
        int base = 3 + 2 * N + 2 * N * (k - 1);
        for (int n = 1; n <= N; ++n) {
            un *= u;
            at(base + 2 * (n - 1)) = un.real();
            at(base + 2 * (n - 1) + 1) = -un.imag();
        }
    }
}

}  // namespace

SeriesHarmonic::SeriesHarmonic(const DomainSpec& s, int n) : spec(s), N(n) {
    outer.assign(N, cx{0.0, 0.0});
    laurent[0].assign(N, cx{0.0, 0.0});
    laurent[1].assign(N, cx{0.0, 0.0});
}

cx SeriesHarmonic::analytic_part(cx z) const {
    cx s = poly1(outer, z);
    for (int k = 1; k <= 2; ++k) s += poly1(laurent[k - 1], spec.radius(k) / (z - spec.center(k)));
    return s;
}

cx SeriesHarmonic::analytic_deriv(cx z) const {
    cx s = poly1_du(outer, z);
    for (int k = 1; k <= 2; ++k) {
        cx w = z - spec.center(k);
        cx u = spec.radius(k) / w;
        // du/dz = -u / w
        s += poly1_du(laurent[k - 1], u) * (-u / w);
    }
    return s;
}

cx SeriesHarmonic::analytic_deriv2(cx z) const {
    cx s = poly1_du2(outer, z);
    for (int k = 1; k <= 2; ++k) {
        cx w = z - spec.center(k);
        cx u = spec.radius(k) / w;
        cx du = -u / w;
        cx d2u = 2.0 * u / (w * w);
        s += poly1_du2(laurent[k - 1], u) * du * du + poly1_du(laurent[k - 1], u) * d2u;
    }
    return s;
}

double SeriesHarmonic::value(cx z) const {
    double v = a00 + analytic_part(z).real();
    for (int k = 1; k <= 2; ++k) v += b[k - 1] * std::log(std::abs(z - spec.center(k)));
    return v;
}

cx SeriesHarmonic::complex_derivative(cx z) const {
    cx d = analytic_deriv(z);
    for (int k = 1; k <= 2; ++k) d += b[k - 1] / (z - spec.center(k));
    return d;
}

cx SeriesHarmonic::complex_derivative2(cx z) const {
    cx d = analytic_deriv2(z);
    for (int k = 1; k <= 2; ++k) {
        cx w = z - spec.center(k);
        d -= b[k - 1] / (w * w);
    }
    return d;
}

double SeriesHarmonic::normal_derivative(const BoundaryPoint& q) const {
    cx z = point(spec, q);
    cx n = outward_normal(spec, q);
    cx g = gradient(z);
    return g.real() * n.real() + g.imag() * n.imag();
}

SeriesHarmonic& SeriesHarmonic::operator+=(const SeriesHarmonic& o) {
    if (N == 0) {
        *this = o;
        return *this;
    }
    if (o.N != N) throw Error("shape-mismatch", "series truncations differ");
    a00 += o.a00;
    for (int k = 0; k < 2; ++k) b[k] += o.b[k];
    for (int n = 0; n < N; ++n) {
        outer[n] += o.outer[n];
        laurent[0][n] += o.laurent[0][n];
        laurent[1][n] += o.laurent[1][n];
    }
    residual += o.residual;
    converged = converged && o.converged;
    cond = std::max(cond, o.cond);
    return *this;
}

SeriesHarmonic& SeriesHarmonic::operator*=(double s) {
    a00 *= s;
    for (auto& v : b) v *= s;
    for (auto& c : outer) c *= s;
    for (auto& l : laurent)
        for (auto& c : l) c *= s;
    residual *= std::abs(s);
    return *this;
}

double SeriesHarmonic::scale() const {
    double m = std::abs(a00);
    for (double v : b) m = std::max(m, std::abs(v));
    for (auto& c : outer) m = std::max(m, std::abs(c));
    for (auto& l : laurent)
        for (auto& c : l) m = std::max(m, std::abs(c));
    return m;
}

SeriesHarmonic operator+(SeriesHarmonic a, const SeriesHarmonic& b) { return a += b; }
SeriesHarmonic operator*(double s, SeriesHarmonic a) { return a *= s; }

Eigen::MatrixXd collocation_matrix_serial(const DomainSpec& spec, int N, int M) {
    int cols = 3 + 6 * N;
    Eigen::MatrixXd A(3 * M, cols);
    for (int r = 0; r < 3 * M; ++r) fill_row(spec, N, M, r, A.data() + r, static_cast<int>(A.rows()));
    return A;
}

Eigen::MatrixXd collocation_matrix(const DomainSpec& spec, int N, int M) {
    int cols = 3 + 6 * N;
    Eigen::MatrixXd A(3 * M, cols);
    int rows = 3 * M;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) fill_row(spec, N, M, r, A.data() + r, rows);
    return A;
}

DirichletSolver::DirichletSolver(const DomainSpec& spec, const SolverParams& params)
    : spec_(spec), params_(params), M_(params.M_factor * params.N) {
    require_valid(spec);
    if (params.M_factor < 4) throw Error("invalid-config", "collocation count must be at least 4N");
    Eigen::MatrixXd A = collocation_matrix(spec, params.N, M_);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    double smax = s(0);
    double smin = s(s.size() - 1);
    cond_ = smin > 0 ? smax / smin : INFINITY;
    Eigen::VectorXd sinv(s.size());
    for (int i = 0; i < s.size(); ++i) sinv(i) = s(i) > smax * 1e-14 ? 1.0 / s(i) : 0.0;
    pinv_ = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

SeriesHarmonic DirichletSolver::unpack(const Eigen::VectorXd& x) const {
    int N = params_.N;
    SeriesHarmonic h(spec_, N);
    h.a00 = x(0);
    h.b = {x(1), x(2)};
    for (int n = 1; n <= N; ++n) h.outer[n - 1] = cx(x(3 + 2 * (n - 1)), x(3 + 2 * (n - 1) + 1));
    for (int k = 1; k <= 2; ++k) {
        int base = 3 + 2 * N + 2 * N * (k - 1);
        for (int n = 1; n <= N; ++n) h.laurent[k - 1][n - 1] = cx(x(base + 2 * (n - 1)), x(base + 2 * (n - 1) + 1));
    }
    return h;
}

SeriesHarmonic DirichletSolver::solve(const BoundaryData& data) const {
    Eigen::VectorXd d(3 * M_);
    for (int comp = 0; comp < 3; ++comp)
        for (int m = 0; m < M_; ++m) {
            double th = 2.0 * kPi * m / M_;
            cx z = spec_.center(comp) + spec_.radius(comp) * std::polar(1.0, th);
            d(comp * M_ + m) = data(comp, th, z);
        }
    SeriesHarmonic h = unpack(pinv_ * d);
    // Out-of-sample misfit at the midpoints between collocation nodes.
    double res = 0.0;
    for (int comp = 0; comp < 3; ++comp)
        for (int m = 0; m < M_; ++m) {
            double th = 2.0 * kPi * (m + 0.5) / M_;
            cx z = spec_.center(comp) + spec_.radius(comp) * std::polar(1.0, th);
            res = std::max(res, std::abs(h.value(z) - data(comp, th, z)));
        }
    h.residual = res;
    h.cond = cond_;
    h.converged = res <= params_.eps_dirichlet && cond_ <= params_.kappa_max;
    return h;
}

std::shared_ptr<const DirichletSolver> DirichletSolver::get(const DomainSpec& spec, const SolverParams& params) {
    static std::shared_mutex mu;
    static std::map<SpecKey, std::shared_ptr<const DirichletSolver>> cache;
    SpecKey key = key_of(spec, params);
    {
        std::shared_lock lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto solver = std::make_shared<const DirichletSolver>(spec, params);
    std::unique_lock lock(mu);
    auto [it, inserted] = cache.emplace(key, solver);
    return it->second;
}

SeriesHarmonic solve_dirichlet(const DomainSpec& spec, const BoundaryData& data, const SolverParams& params) {
    return DirichletSolver::get(spec, params)->solve(data);
}

void require_converged(const SeriesHarmonic& h, const SolverParams& params) {
    if (h.cond > params.kappa_max)
        throw Error("ill-conditioned", "collocation condition " + std::to_string(h.cond));
    if (h.residual > params.eps_dirichlet)
        throw Error("unconverged", "boundary residual " + std::to_string(h.residual));
}

const SeriesHarmonic& harmonic_measure(const DomainSpec& spec, int j, const SolverParams& params) {
    if (j < 0 || j > 2) throw Error("invalid-argument", "component index must be 0, 1 or 2");
    static std::shared_mutex mu;
    static std::map<std::pair<SpecKey, int>, std::unique_ptr<SeriesHarmonic>> cache;
    auto key = std::make_pair(key_of(spec, params), j);
    {
        std::shared_lock lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return *it->second;
    }
    auto h = std::make_unique<SeriesHarmonic>(
        solve_dirichlet(spec, [j](int comp, double, cx) { return comp == j ? 1.0 : 0.0; }, params));
    require_converged(*h, params);
    std::unique_lock lock(mu);
    auto [it, inserted] = cache.emplace(key, std::move(h));
    return *it->second;
}

double normal_derivative_Q(const DomainSpec& spec, int j, const BoundaryPoint& q, const SolverParams& params) {
    return harmonic_measure(spec, j, params).normal_derivative(q);
}

Eigen::Matrix<double, 2, 3> period_rows(const DomainSpec& spec, const std::array<BoundaryPoint, 3>& p,
                                        const SolverParams& params) {
    Eigen::Matrix<double, 2, 3> M;
    for (int j = 1; j <= 2; ++j)
        for (int l = 0; l < 3; ++l) M(j - 1, l) = normal_derivative_Q(spec, j, p[l], params);
    return M;
}

TauWeights tau(const DomainSpec& spec, const std::array<BoundaryPoint, 3>& p, const SolverParams& params) {
    for (int l = 0; l < 3; ++l)
        if (p[l].component != l) throw Error("invalid-argument", "p_j must lie on B_j");
    TauWeights t;
    t.p = p;
    t.M = period_rows(spec, p, params);
    const auto& M = t.M;
    double v0 = M(0, 1) * M(1, 2) - M(0, 2) * M(1, 1);
    double v1 = M(0, 2) * M(1, 0) - M(0, 0) * M(1, 2);
    double v2 = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    double s = v0 + v1 + v2;
    t.values = {v0 / s, v1 / s, v2 / s};
    for (double v : t.values)
        if (!(v > 0.0)) throw Error("sign-violation", "tau entry not strictly positive");
    return t;
}

SeriesHarmonic greens_function(const DomainSpec& spec, cx a, const SolverParams& params) {
    if (contains(spec, a).region != Region::interior) throw Error("invalid-argument", "pole must be interior");
    SeriesHarmonic u = solve_dirichlet(spec, [a](int, double, cx z) { return std::log(std::abs(z - a)); }, params);
    require_converged(u, params);
    return u;
}

double green_value(const SeriesHarmonic& u, cx a, cx z) { return -std::log(std::abs(z - a)) + u.value(z); }

cx green_complex_derivative(const SeriesHarmonic& u, cx a, cx z) { return -1.0 / (z - a) + u.complex_derivative(z); }

cx herglotz_pole_value(const HerglotzPole& p, cx z) {
    if (p.component == 0) return p.weight / (2.0 * kPi) * (p.q + z) / (p.q - z);
    return p.weight / (2.0 * kPi * p.radius) * (1.0 + 2.0 * (p.q - p.center) / (z - p.q));
}

cx herglotz_pole_deriv(const HerglotzPole& p, cx z) {
    if (p.component == 0) {
        cx d = p.q - z;
        return p.weight / (2.0 * kPi) * 2.0 * p.q / (d * d);
    }
    cx d = z - p.q;
    return p.weight / (2.0 * kPi * p.radius) * (-2.0 * (p.q - p.center) / (d * d));
}

cx AnalyticFn::value(cx z) const {
    cx v = constant;
    if (series.N > 0) v += series.analytic_part(z);
    for (const auto& p : poles) v += herglotz_pole_value(p, z);
    return v;
}

cx AnalyticFn::deriv(cx z) const {
    cx v{0.0, 0.0};
    if (series.N > 0) v += series.analytic_deriv(z);
    for (const auto& p : poles) v += herglotz_pole_deriv(p, z);
    return v;
}

AnalyticFn& AnalyticFn::operator*=(double s) {
    constant *= s;
    series *= s;
    for (auto& p : poles) p.weight *= s;
    return *this;
}

PoissonKernel::PoissonKernel(const DomainSpec& spec, const BoundaryPoint& q, const SolverParams& params)
    : spec_(spec), q_(q), qpt_(point(spec, q)), L_(spec.total_length()) {
    HerglotzPole unit = pole(1.0 / L_);
    int own = q.component;
    v_ = solve_dirichlet(
        spec,
        [&](int comp, double, cx z) { return comp == own ? 0.0 : herglotz_pole_value(unit, z).real(); },
        params);
    require_converged(v_, params);
}

HerglotzPole PoissonKernel::pole(double weight) const {
    return {weight * L_, q_.component, qpt_, spec_.center(q_.component), spec_.radius(q_.component)};
}

double PoissonKernel::operator()(cx z) const {
    return L_ * (herglotz_pole_value(pole(1.0 / L_), z).real() - v_.value(z));
}

double poisson_kernel(const DomainSpec& spec, const BoundaryPoint& q, cx z, const SolverParams& params) {
    SeriesHarmonic u = greens_function(spec, z, params);
    cx qp = point(spec, q);
    cx grad = std::conj(green_complex_derivative(u, z, qp));
    cx n = outward_normal(spec, q);
    double dn = grad.real() * n.real() + grad.imag() * n.imag();
    return -spec.total_length() / (2.0 * kPi) * dn;
}

AnalyticFn herglotz_completion(const DomainSpec& spec, const std::vector<std::pair<double, BoundaryPoint>>& terms,
                               cx anchor, const SolverParams& params) {
    AnalyticFn f;
    f.series = SeriesHarmonic(spec, params.N);
    double wsum = 0.0;
    for (const auto& [w, q] : terms) {
        PoissonKernel P(spec, q, params);
        f.poles.push_back(P.pole(w));
        f.series += (-w * spec.total_length()) * P.correction();
        wsum += std::abs(w);
    }
    double tol = params.eps_period * std::max(1.0, wsum * spec.total_length());
    for (int k = 0; k < 2; ++k)
        if (std::abs(f.series.b[k]) > tol)
            throw Error("has-periods", "combination has conjugate period " + std::to_string(f.series.b[k]));
    f.series.b = {0.0, 0.0};
    f.constant = f.series.a00;
    f.series.a00 = 0.0;
    f.constant -= kI * f.value(anchor).imag();
    return f;
}

AnalyticFn analytic_completion(const SeriesHarmonic& h, cx anchor, const SolverParams& params) {
    double tol = params.eps_period * std::max(1.0, h.scale());
    for (int k = 0; k < 2; ++k)
        if (std::abs(h.b[k]) > tol)
            throw Error("has-periods", "harmonic function has conjugate period " + std::to_string(h.b[k]));
    AnalyticFn f;
    f.series = h;
    f.series.b = {0.0, 0.0};
    f.constant = h.a00;
    f.series.a00 = 0.0;
    f.constant -= kI * f.value(anchor).imag();
    return f;
}

double green_dx_on_axis(const SeriesHarmonic& u0, double x) {
    return green_complex_derivative(u0, 0.0, cx(x, 0.0)).real();
}

CriticalPoints green_critical_points(const DomainSpec& spec, const SolverParams& params) {
    SeriesHarmonic u0 = greens_function(spec, 0.0, params);
    auto find = [&](double lo, double hi) {
        const int scan = 400;
        double a = lo, fa = green_dx_on_axis(u0, a);
        for (int i = 1; i <= scan; ++i) {
            double b = lo + (hi - lo) * i / scan;
            double fb = green_dx_on_axis(u0, b);
            if (fa == 0.0) return a;
            if ((fa < 0) != (fb < 0)) {
                for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
                    double m = 0.5 * (a + b);
                    double fm = green_dx_on_axis(u0, m);
                    if ((fm < 0) == (fa < 0)) {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                return 0.5 * (a + b);
            }
            a = b;
            fa = fb;
        }
        throw Error("not-bracketed", "no sign change of dg/dx on the interval");
    };
    double eps = 1e-9;
    return {find(-1.0 + eps, spec.c1 - spec.r1 - eps), find(spec.c2 + spec.r2 + eps, 1.0 - eps)};
}

}  // namespace tridisk
