#include "tridisk/theta.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <tuple>

#include <Eigen/Eigenvalues>

namespace tridisk {

PeriodMatrix period_matrix(const DomainSpec& spec, const SolverParams& params) {
    PeriodMatrix pm;
    for (int j = 1; j <= 2; ++j) {
        const SeriesHarmonic& h = harmonic_measure(spec, j, params);
        // Flux of b log|z - c| through B_l with the normal pointing into the hole.
        for (int l = 1; l <= 2; ++l) pm.P(j - 1, l - 1) = -2.0 * kPi * h.b[l - 1];
    }
    pm.asymmetry = std::abs(pm.P(0, 1) - pm.P(1, 0));
    pm.T = 0.25 * (pm.P + pm.P.transpose());
    Eigen::SelfAdjointEigenSolver<Mat2> es(pm.T);
    pm.lambda_min = es.eigenvalues()(0);
    if (!(pm.lambda_min > 0.0)) throw Error("sign-violation", "period matrix is not positive definite");
    return pm;
}

ThetaContext::ThetaContext(const Mat2& T, double tail) : T_(T), Tinv_(T.inverse()) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(T);
    double lam = es.eigenvalues()(0);
    if (!(lam > 0.0)) throw Error("sign-violation", "theta matrix is not positive definite");
    // Reduced arguments have |Im| within half a lattice cell; allow one extra shell for that shift.
    double r = std::sqrt(-std::log(tail) / (kPi * lam));
    radius_ = static_cast<int>(std::ceil(r)) + 2;
}

cx2 ThetaContext::reduce(const cx2& z, Vec2* l, Vec2* m) const {
    Vec2 y(z(0).imag(), z(1).imag());
    Vec2 mm = (Tinv_ * y).array().round();
    cx2 z1 = z - kI * (T_ * mm).cast<cx>();
    Vec2 ll(std::round(z1(0).real()), std::round(z1(1).real()));
    if (l) *l = ll;
    if (m) *m = mm;
    return z1 - ll.cast<cx>();
}

double ThetaContext::lattice_distance(const cx2& z) const {
    Vec2 u(z(0).real(), z(1).real());
    Vec2 v = Tinv_ * Vec2(z(0).imag(), z(1).imag());
    double d = 0.0;
    for (int i = 0; i < 2; ++i) {
        d = std::max(d, std::abs(u(i) - std::round(u(i))));
        d = std::max(d, std::abs(v(i) - std::round(v(i))));
    }
    return d;
}

cx ThetaContext::sum_reduced(const cx2& z, cx2* grad) const {
    cx s{0.0, 0.0};
    cx g0{0.0, 0.0}, g1{0.0, 0.0};
    const int R = radius_;
    for (int n0 = -R; n0 <= R; ++n0)
        for (int n1 = -R; n1 <= R; ++n1) {
            double q = T_(0, 0) * n0 * n0 + 2.0 * T_(0, 1) * n0 * n1 + T_(1, 1) * n1 * n1;
            cx t = std::exp(-kPi * q + 2.0 * kPi * kI * (double(n0) * z(0) + double(n1) * z(1)));
            s += t;
            if (grad) {
                g0 += 2.0 * kPi * kI * double(n0) * t;
                g1 += 2.0 * kPi * kI * double(n1) * t;
            }
        }
    if (grad) *grad = cx2(g0, g1);
    return s;
}

cx ThetaContext::theta_direct(const cx2& z, int radius) const {
    cx s{0.0, 0.0};
    for (int n0 = -radius; n0 <= radius; ++n0)
        for (int n1 = -radius; n1 <= radius; ++n1) {
            double q = T_(0, 0) * n0 * n0 + 2.0 * T_(0, 1) * n0 * n1 + T_(1, 1) * n1 * n1;
            s += std::exp(-kPi * q + 2.0 * kPi * kI * (double(n0) * z(0) + double(n1) * z(1)));
        }
    return s;
}

cx ThetaContext::theta(const cx2& z) const { return theta(z, nullptr); }

cx ThetaContext::theta(const cx2& z, cx2* grad) const {
    Vec2 m;
    cx2 zr = reduce(z, nullptr, &m);
    // theta(zr + l + i T m) = exp(pi <T m, m> - 2 pi i <zr, m>) theta(zr)
    cx factor = std::exp(kPi * m.dot(T_ * m) - 2.0 * kPi * kI * (zr(0) * m(0) + zr(1) * m(1)));
    cx2 g;
    cx t = sum_reduced(zr, grad ? &g : nullptr);
    if (grad) *grad = factor * (g - 2.0 * kPi * kI * m.cast<cx>() * t);
    return factor * t;
}

cx ThetaContext::log_theta(const cx2& z) const {
    Vec2 m;
    cx2 zr = reduce(z, nullptr, &m);
    return kPi * m.dot(T_ * m) - 2.0 * kPi * kI * (zr(0) * m(0) + zr(1) * m(1)) + std::log(sum_reduced(zr, nullptr));
}

double ThetaContext::theta_norm(const cx2& z) const {
    Vec2 y(z(0).imag(), z(1).imag());
    cx2 zr = reduce(z);
    Vec2 yr(zr(0).imag(), zr(1).imag());
    return std::abs(sum_reduced(zr, nullptr)) * std::exp(-kPi * yr.dot(Tinv_ * yr));
}

void ThetaContext::decompose(const cx2& e, Vec2* u, Vec2* v) const {
    *u = Vec2(e(0).real(), e(1).real());
    *v = Tinv_ * Vec2(e(0).imag(), e(1).imag());
}

cx ThetaContext::theta_char(const cx2& e, const cx2& z) const { return theta_char(e, z, nullptr); }

cx ThetaContext::theta_char(const cx2& e, const cx2& z, cx2* grad) const {
    Vec2 u, v;
    decompose(e, &u, &v);
    cx2 d = u.cast<cx>() - z;
    cx factor = std::exp(kPi * kI * (v.dot(T_ * v) + 2.0 * (d(0) * v(0) + d(1) * v(1))));
    cx2 g;
    cx t = theta(z - e, grad ? &g : nullptr);
    if (grad) *grad = factor * (g - 2.0 * kPi * kI * v.cast<cx>() * t);
    return factor * t;
}

std::vector<HalfPeriod> odd_half_periods(const Mat2& T) {
    std::vector<HalfPeriod> out;
    for (int u0 = 0; u0 < 2; ++u0)
        for (int u1 = 0; u1 < 2; ++u1)
            for (int v0 = 0; v0 < 2; ++v0)
                for (int v1 = 0; v1 < 2; ++v1) {
                    if ((u0 * v0 + u1 * v1) % 2 == 0) continue;
                    HalfPeriod h;
                    h.u = Vec2(u0, u1);
                    h.v = Vec2(v0, v1);
                    h.e = 0.5 * (h.u.cast<cx>() + kI * (T * h.v).cast<cx>());
                    out.push_back(h);
                }
    return out;
}

HalfPeriod find_odd_half_period(ThetaContext& ctx, const AbelJacobi& aj) {
    const std::array<cx, 6> probes{cx(0.0, 0.5), cx(0.1, -0.4), cx(-0.6, 0.3), cx(0.6, -0.3), cx(0.0, 0.0),
                                   cx(0.2, 0.7)};
    std::vector<cx2> chis;
    for (cx z : probes)
        if (contains(aj.spec(), z).region == Region::interior) chis.push_back(aj.front(z));
    for (const auto& h : odd_half_periods(ctx.T())) {
        if (ctx.theta_norm(h.e) > 1e-10) continue;
        double worst = 0.0;
        for (const auto& c : chis) worst = std::max(worst, ctx.theta_norm(c - h.e));
        if (worst > 1e-8) {
            ctx.estar = h;
            return h;
        }
    }
    throw Error("none-found", "no non-singular odd half period");
}

// ---------------------------------------------------------------------------------------------------------

namespace {

constexpr double kAxisTol = 1e-14;

double seg_dist(cx a, cx b, cx c, double* tstar) {
    cx d = b - a;
    double dd = std::norm(d);
    double t = dd > 0 ? std::clamp(((c - a) * std::conj(d)).real() / dd, 0.0, 1.0) : 0.0;
    if (tstar) *tstar = t;
    return std::abs(a + t * d - c);
}

}  // namespace

AbelJacobi::AbelJacobi(const DomainSpec& spec, const SolverParams& params) : spec_(spec) {
    require_valid(spec);
    h_[0] = harmonic_measure(spec, 1, params);
    h_[1] = harmonic_measure(spec, 2, params);

    anchors_.push_back(-1.0);
    const double step = 0.0625;
    for (double x = -1.0; x <= 1.0 + 1e-12; x += step)
        for (double y = -1.0; y <= 1.0 + 1e-12; y += step) {
            cx z(x, y);
            if (std::abs(z) > 0.97) continue;
            if (contains(spec, z).region != Region::interior || boundary_distance(spec, z) < 0.02) continue;
            if (std::abs(y) < kAxisTol && !(x > spec.c1 + spec.r1 && x < spec.c2 - spec.r2)) continue;
            anchors_.push_back(z);
        }
    for (int k = 1; k <= 2; ++k) {
        int o = 3 - k;
        double clear = std::min(std::abs(spec.center(k) - spec.center(o)) - spec.radius(k) - spec.radius(o),
                                1.0 - std::abs(spec.center(k)) - spec.radius(k));
        double gap = std::min(0.05, 0.3 * clear);
        for (int a = 0; a < 32; ++a) {
            if (a == 0 || a == 16) continue;  // on the real axis
            anchors_.push_back(spec.center(k) + (spec.radius(k) + gap) * std::polar(1.0, 2.0 * kPi * a / 32));
        }
    }
    int n = static_cast<int>(anchors_.size());
    adj_.assign(n, {});
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (segment_in_cut_domain(anchors_[i], anchors_[j])) {
                adj_[i].push_back(j);
                adj_[j].push_back(i);
            }
    parent_.assign(n, -2);
    parent_[0] = -1;
    std::deque<int> q{0};
    while (!q.empty()) {
        int i = q.front();
        q.pop_front();
        for (int j : adj_[i])
            if (parent_[j] == -2) {
                parent_[j] = i;
                q.push_back(j);
            }
    }
}

bool AbelJacobi::segment_in_domain(cx a, cx b) const {
    if (std::abs(a) > 1.0 + 1e-12 || std::abs(b) > 1.0 + 1e-12) return false;
    for (int k = 1; k <= 2; ++k) {
        double t;
        double d = seg_dist(a, b, spec_.center(k), &t);
        if (d < spec_.radius(k) - 1e-12) return false;
    }
    return true;
}

bool AbelJacobi::segment_in_cut_domain(cx a, cx b) const {
    if (!segment_in_domain(a, b)) return false;
    double lo = spec_.c1 + spec_.r1, hi = spec_.c2 - spec_.r2;
    auto on_axis = [](cx z) { return std::abs(z.imag()) < kAxisTol; };
    auto in_gap = [&](double x) { return x > lo && x < hi; };
    bool ax = on_axis(a), bx = on_axis(b);
    if (ax && bx) return in_gap(a.real()) && in_gap(b.real());
    // Slit points are reached from the upper side.
    if (ax && !in_gap(a.real())) return b.imag() > 0;
    if (bx && !in_gap(b.real())) return a.imag() > 0;
    if (!ax && !bx && (a.imag() > 0) != (b.imag() > 0)) {
        double x = a.real() + (b.real() - a.real()) * a.imag() / (a.imag() - b.imag());
        return in_gap(x);
    }
    return true;
}

std::vector<cx> AbelJacobi::default_path(cx z) const {
    if (std::abs(z + 1.0) < 1e-14) return {-1.0};
    Classification cl = contains(spec_, z, 1e-12);
    if (cl.region == Region::exterior) throw Error("path-invalid", "point outside the closed domain");
    int best = -1;
    double best_len = INFINITY;
    for (size_t i = 0; i < anchors_.size(); ++i) {
        if (parent_[i] == -2 || !segment_in_cut_domain(anchors_[i], z)) continue;
        // Prefer short total paths.
        double len = std::abs(z - anchors_[i]);
        for (int j = static_cast<int>(i); parent_[j] >= 0; j = parent_[j]) len += std::abs(anchors_[j] - anchors_[parent_[j]]);
        if (len < best_len) {
            best_len = len;
            best = static_cast<int>(i);
        }
    }
    if (best < 0) throw Error("path-invalid", "no admissible path in the cut domain");
    std::vector<cx> path{z};
    for (int j = best; j >= 0; j = parent_[j]) path.push_back(anchors_[j]);
    std::reverse(path.begin(), path.end());
    return path;
}

cx2 AbelJacobi::segment_increment(cx u, cx v) const {
    cx2 out;
    for (int j = 0; j < 2; ++j) {
        const SeriesHarmonic& h = h_[j];
        cx s = h.analytic_part(v) - h.analytic_part(u);
        for (int k = 1; k <= 2; ++k) s += h.b[k - 1] * std::log((v - spec_.center(k)) / (u - spec_.center(k)));
        out(j) = 0.5 * s;
    }
    return out;
}

cx2 AbelJacobi::along(const std::vector<cx>& path) const {
    if (path.empty() || std::abs(path.front() + 1.0) > 1e-12) throw Error("path-invalid", "path must start at -1");
    cx2 acc = cx2::Zero();
    for (size_t i = 1; i < path.size(); ++i) {
        if (!segment_in_domain(path[i - 1], path[i])) throw Error("path-invalid", "segment leaves the domain");
        acc += segment_increment(path[i - 1], path[i]);
    }
    return acc;
}

cx2 AbelJacobi::operator()(const DoublePoint& p) const {
    cx2 v = along(default_path(p.base));
    if (p.sheet == Sheet::back && !on_boundary(spec_, p.base, 1e-12)) v = -v.conjugate();
    return v;
}

cx2 AbelJacobi::differential(cx z) const {
    return cx2(0.5 * h_[0].complex_derivative(z), 0.5 * h_[1].complex_derivative(z));
}

cx prime_ratio(const ThetaContext& ctx, const AbelJacobi& aj, cx zeta, cx z, cx w) {
    if (!ctx.estar) throw Error("invalid-argument", "odd half period not set");
    cx2 cz = aj.front(zeta);
    return std::exp(ctx.log_theta(cz - aj.front(z) - ctx.estar->e) - ctx.log_theta(cz - aj.front(w) - ctx.estar->e));
}

BoundaryZero theta_boundary_zero(const ThetaContext& ctx, const AbelJacobi& aj) {
    if (!ctx.estar) throw Error("invalid-argument", "odd half period not set");
    const DomainSpec& spec = aj.spec();
    const cx2 e = ctx.estar->e;
    auto g = [&](const BoundaryPoint& q) { return ctx.theta_norm(aj.front(point(spec, q)) - e); };
    const int n = 720;
    BoundaryZero best{{0, 0.0}, 0.0, INFINITY};
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < n; ++m) {
            BoundaryPoint q{c, 2.0 * kPi * m / n};
            if (std::abs(point(spec, q) + 1.0) < 0.05) continue;
            double v = g(q);
            if (v < best.residual) best = {q, point(spec, q), v};
        }
    // Golden-section refinement of the V-shaped minimum of |theta|.
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = best.q.angle - 2.0 * kPi / n, b = best.q.angle + 2.0 * kPi / n;
    int comp = best.q.component;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = g({comp, x1}), f2 = g({comp, x2});
    while (b - a > 1e-14) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = g({comp, x1});
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = g({comp, x2});
        }
    }
    BoundaryPoint q{comp, 0.5 * (a + b)};
    double v = g(q);
    if (v < best.residual) best = {q, point(spec, q), v};
    return best;
}

Surface::Surface(const DomainSpec& s, const SolverParams& p)
    : spec(s), params(p), pm(period_matrix(s, p)), ctx(pm.T), aj(s, p), w(green_critical_points(s, p)) {
    find_odd_half_period(ctx, aj);
}

std::shared_ptr<const Surface> get_surface(const DomainSpec& spec, const SolverParams& params) {
    using Key = std::tuple<double, double, double, double, int, int>;
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<const Surface>> cache;
    Key k{spec.c1, spec.r1, spec.c2, spec.r2, params.N, params.M_factor};
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    auto s = std::make_shared<const Surface>(spec, params);
    cache.emplace(k, s);
    return s;
}

}  // namespace tridisk
