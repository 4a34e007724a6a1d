#include "tridisk/fay.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "tridisk/scalar_inner.hpp"
#include "tridisk/zeros.hpp"

namespace tridisk {

BoundaryQuadrature harmonic_quadrature(const DomainSpec& spec, cx a, int n, const SolverParams& params) {
    SeriesHarmonic u = greens_function(spec, a, params);
    BoundaryQuadrature q;
    for (int c = 0; c < 3; ++c) {
        double r = spec.radius(c);
        double orient = c == 0 ? 1.0 : -1.0;
        for (int m = 0; m < n; ++m) {
            BoundaryPoint bp{c, 2.0 * kPi * m / n};
            cx z = point(spec, bp);
            cx nrm = outward_normal(spec, bp);
            double dn = (nrm * green_complex_derivative(u, a, z)).real();
            q.z.push_back(z);
            q.w.push_back(-dn / (2.0 * kPi) * (2.0 * kPi * r / n));
            q.dz.push_back(orient * kI * (z - spec.center(c)) * (2.0 * kPi / n));
            q.component.push_back(c);
        }
    }
    return q;
}

Eigen::VectorXcd fay_basis(const DomainSpec& spec, int N, cx z) {
    Eigen::VectorXcd b(1 + 3 * N);
    b(0) = 1.0;
    cx p{1.0, 0.0};
    for (int n = 1; n <= N; ++n) b(n) = (p *= z);
    for (int k = 1; k <= 2; ++k) {
        cx s = spec.radius(k) / (z - spec.center(k));
        cx t{1.0, 0.0};
        for (int n = 1; n <= N; ++n) b(k * N + n) = (t *= s);
    }
    return b;
}

cx FayKernel::operator()(cx zeta, cx z) const {
    Eigen::VectorXcd bz = basis(zeta), bw = basis(z).conjugate();
    return bz.transpose() * G * bw;
}

Eigen::MatrixXcd FayKernel::gram(const std::vector<cx>& pts) const {
    const int n = static_cast<int>(pts.size());
    Eigen::MatrixXcd E(n, C.cols());
    for (int i = 0; i < n; ++i) E.row(i) = basis(pts[i]).transpose() * C;
    return E * E.adjoint();
}

FayKernel fay_kernel_gram(const DomainSpec& spec, cx a, int basis_size, int nodes, const SolverParams& params) {
    FayKernel K;
    K.spec = spec;
    K.a = a;
    K.basis_size = basis_size;
    K.quad = harmonic_quadrature(spec, a, nodes, params);
    const int rows = static_cast<int>(K.quad.z.size());
    const int nb = 1 + 3 * basis_size;
    Eigen::MatrixXcd S(rows, nb);
    for (int m = 0; m < rows; ++m) S.row(m) = std::sqrt(K.quad.w[m]) * fay_basis(spec, basis_size, K.quad.z[m]).transpose();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(S);
    Eigen::MatrixXcd R = qr.matrixR().topLeftCorner(nb, nb).triangularView<Eigen::Upper>();
    double r0 = std::abs(R(0, 0));
    double rmin = r0;
    for (int i = 0; i < nb; ++i) rmin = std::min(rmin, std::abs(R(i, i)));
    K.min_pivot_ratio = rmin / r0;
    if (K.min_pivot_ratio < 1e-12) throw Error("gram-singular", "orthonormalization pivot below threshold");
    Eigen::MatrixXcd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXcd::Identity(nb, nb));
    K.C = qr.colsPermutation() * Rinv;
    K.G = K.C * K.C.adjoint();
    return K;
}

std::vector<cx> green_critical_points_at(const DomainSpec& spec, cx a, const SolverParams& params) {
    SeriesHarmonic u = greens_function(spec, a, params);
    auto f = [&](cx z) { return -1.0 + (z - a) * u.complex_derivative(z); };
    auto df = [&](cx z) { return u.complex_derivative(z) + (z - a) * u.complex_derivative2(z); };
    ZeroResult r = zeros_in_R(spec, f, df, 2);
    return r.zeros;
}

// ---------------------------------------------------------------------------------------------------------

FayTheta::FayTheta(std::shared_ptr<const Surface> surface, cx a, const cx2& e)
    : s_(std::move(surface)), a_(a), e_(e), chia_(s_->aj.front(a)) {}

cx FayTheta::log_theta_star(const cx2& z) const {
    const HalfPeriod& h = *s_->ctx.estar;
    Vec2 u = 0.5 * h.u, v = 0.5 * h.v;
    cx2 d = u.cast<cx>() - z;
    return kPi * kI * (v.dot(s_->ctx.T() * v) + 2.0 * (d(0) * v(0) + d(1) * v(1))) + s_->ctx.log_theta(z - h.e);
}

cx FayTheta::from_chi(const cx2& X, const cx2& Yc, cx2* grad_e) const {
    const ThetaContext& ctx = s_->ctx;
    const cx2 ca = chia_.conjugate();
    const cx2& es = s_->ctx.estar->e;
    const cx2 d1 = chia_ + Yc + e_, d2 = X + ca + e_;
    if (ctx.theta_norm(d1) < 1e-14 || ctx.theta_norm(d2) < 1e-14 || ctx.theta_norm(X + Yc - es) < 1e-14)
        throw Error("theta-zero-hit", "kernel evaluated at a pole");
    const cx2 n1 = X + Yc + e_, n2 = chia_ + ca + e_;
    cx lg = ctx.log_theta(n1) + ctx.log_theta(n2) + log_theta_star(chia_ + Yc) + log_theta_star(X + ca) -
            ctx.log_theta(d1) - ctx.log_theta(d2) - log_theta_star(X + Yc) - log_theta_star(chia_ + ca);
    cx K = std::exp(lg);
    if (grad_e) {
        auto dlog = [&](const cx2& z) {
            cx2 g;
            cx t = ctx.theta(z, &g);
            return cx2(g / t);
        };
        *grad_e = K * (dlog(n1) + dlog(n2) - dlog(d1) - dlog(d2));
    }
    return K;
}

cx FayTheta::operator()(const DoublePoint& zeta, const DoublePoint& z) const {
    return from_chi(s_->aj(zeta), s_->aj(z).conjugate());
}

std::vector<std::pair<cx, cx>> fit_probes(const DomainSpec& spec, int grid, bool holdout) {
    std::vector<cx> pts;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    const double off = holdout ? 0.37 : 0.0;
    for (int k = 0; static_cast<int>(pts.size()) < 2 * grid && k < 10000; ++k) {
        double rho = 0.92 * std::sqrt((k + 0.5) / (4.0 * grid));
        cx z = std::polar(rho, k * golden + off);
        if (contains(spec, z).region != Region::interior || boundary_distance(spec, z) < 0.08) continue;
        pts.push_back(z);
    }
    std::vector<std::pair<cx, cx>> out;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) out.emplace_back(pts[i], pts[grid + j]);
    return out;
}

std::vector<cx2> pole_condition_solutions(const Surface& s, cx a, const std::vector<cx>& crit) {
    const ThetaContext& ctx = s.ctx;
    cx2 ca = s.aj.front(a).conjugate();
    std::array<cx2, 2> x;
    for (int k = 0; k < 2; ++k) x[k] = -s.aj.front(crit[k]).conjugate() + ca;
    std::vector<cx2> sols;
    for (double a0 : {0.2, 0.7})
        for (double a1 : {0.2, 0.7})
            for (double b0 : {0.2, 0.7})
                for (double b1 : {0.2, 0.7}) {
                    cx2 e = Vec2(a0, a1).cast<cx>() + kI * (ctx.T() * Vec2(b0, b1)).cast<cx>();
                    bool ok = false;
                    for (int it = 0; it < 60; ++it) {
                        Eigen::Matrix2cd J;
                        cx2 F;
                        for (int k = 0; k < 2; ++k) {
                            cx2 g;
                            F(k) = ctx.theta(x[k] + e, &g);
                            J.row(k) = g.transpose();
                        }
                        cx2 step = J.fullPivLu().solve(F);
                        if (!step.allFinite()) break;
                        if (step.norm() > 0.25) step *= 0.25 / step.norm();
                        e -= step;
                        if (step.norm() < 1e-14) {
                            ok = true;
                            break;
                        }
                    }
                    if (!ok && !(ctx.theta_norm(x[0] + e) < 1e-12 && ctx.theta_norm(x[1] + e) < 1e-12)) continue;
                    if (ctx.theta_norm(x[0] + e) > 1e-10 || ctx.theta_norm(x[1] + e) > 1e-10) continue;
                    e = ctx.reduce(e);
                    bool dup = false;
                    for (const auto& o : sols)
                        if (ctx.lattice_distance(o - e) < 1e-8) dup = true;
                    if (!dup) sols.push_back(e);
                }
    return sols;
}

namespace {

struct ProbeSet {
    std::vector<cx2> X, Yc;
    std::vector<cx> Kg;
};

ProbeSet make_probes(const Surface& s, const FayKernel& gram, int grid, bool holdout) {
    ProbeSet p;
    for (auto [zeta, z] : fit_probes(s.spec, grid, holdout)) {
        p.X.push_back(s.aj.front(zeta));
        p.Yc.push_back(s.aj.front(z).conjugate());
        p.Kg.push_back(gram(zeta, z));
    }
    return p;
}

struct Mismatch {
    double rms = INFINITY;
    double max = INFINITY;
};

Mismatch mismatch(const FayTheta& K, const ProbeSet& p, Eigen::VectorXcd* r, Eigen::MatrixXcd* J) {
    const int n = static_cast<int>(p.X.size());
    if (r) r->resize(n);
    if (J) J->resize(n, 2);
    Mismatch m{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
        cx2 g;
        cx v;
        try {
            v = K.from_chi(p.X[i], p.Yc[i], J ? &g : nullptr);
        } catch (const Error&) {
            return Mismatch{};
        }
        cx d = v - p.Kg[i];
        if (!std::isfinite(std::abs(d))) return Mismatch{};
        if (r) (*r)(i) = d;
        if (J) J->row(i) = g.transpose();
        m.rms += std::norm(d);
        m.max = std::max(m.max, std::abs(d));
    }
    m.rms = std::sqrt(m.rms / n);
    return m;
}

}  // namespace

FitResult refine_e(std::shared_ptr<const Surface> s, cx a, const FayKernel& gram, const cx2& seed, const FitOptions& opt) {
    ProbeSet train = make_probes(*s, gram, opt.grid, false);
    cx2 e = seed;
    FitResult res;
    Eigen::VectorXcd r;
    Eigen::MatrixXcd J;
    Mismatch cur = mismatch(FayTheta(s, a, e), train, &r, &J);
    int it = 0;
    for (; it < opt.max_iter && std::isfinite(cur.rms); ++it) {
        cx2 step = J.colPivHouseholderQr().solve(-r);
        if (!step.allFinite()) break;
        double lam = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 20; ++ls, lam *= 0.5) {
            Mismatch trial = mismatch(FayTheta(s, a, e + lam * step), train, nullptr, nullptr);
            if (trial.rms < cur.rms) {
                e += lam * step;
                improved = true;
                break;
            }
        }
        if (!improved) break;
        cur = mismatch(FayTheta(s, a, e), train, &r, &J);
        if (lam * step.norm() < 1e-14) break;
    }
    res.e = s->ctx.reduce(e);
    res.iterations = it;
    Mismatch fin = mismatch(FayTheta(s, a, res.e), train, nullptr, nullptr);
    res.train_rms = fin.rms;
    res.train_max = fin.max;
    ProbeSet hold = make_probes(*s, gram, opt.grid, true);
    res.holdout_max = mismatch(FayTheta(s, a, res.e), hold, nullptr, nullptr).max;
    return res;
}

FitResult fit_e(std::shared_ptr<const Surface> s, cx a, const FayKernel& gram, const FitOptions& opt) {
    std::vector<cx> crit;
    if (std::abs(a) < 1e-15)
        crit = {cx(s->w.w1, 0.0), cx(s->w.w2, 0.0)};
    else
        crit = green_critical_points_at(s->spec, a, s->params);
    std::vector<cx2> cands = pole_condition_solutions(*s, a, crit);
    FitResult best;
    best.train_rms = INFINITY;
    for (const auto& c : cands) {
        FitResult r = refine_e(s, a, gram, c, opt);
        if (r.train_rms < best.train_rms) best = r;
    }
    best.candidates = cands;
    if (!(best.train_rms <= opt.tol))
        throw Error("fit-failed", "theta form does not match the Gram form (rms " + std::to_string(best.train_rms) + ")");
    return best;
}

// ---------------------------------------------------------------------------------------------------------

Residues residues_theta(const FayTheta& K0, cx a, double radius, int nodes) {
    const Surface& s = K0.surface();
    const std::array<cx, 2> w{cx(s.w.w1, 0.0), cx(s.w.w2, 0.0)};
    Residues out;
    DoublePoint za{a, Sheet::front};
    cx2 Yc = s.aj(za).conjugate();
    for (int k = 0; k < 2; ++k) {
        cx sk = 1.0 / std::conj(w[k]);
        if (std::abs(a) > 1e-300 && std::abs(sk - 1.0 / std::conj(a)) < radius)
            throw Error("pole-collision", "Ja is within the residue contour");
        auto integral = [&](double rho) {
            cx acc{0.0, 0.0};
            for (int m = 0; m < nodes; ++m) {
                cx off = rho * std::polar(1.0, 2.0 * kPi * (m + 0.5) / nodes);
                cx base = 1.0 / std::conj(sk + off);
                cx2 X = -s.aj.front(base).conjugate();
                acc += K0.from_chi(X, Yc) * off;
            }
            return acc / double(nodes);
        };
        out.R[k] = integral(radius);
        out.refinement = std::max(out.refinement, std::abs(out.R[k] - integral(0.5 * radius)));
    }
    return out;
}

Residues residues_reflection(const FayKernel& K0, cx a, const SolverParams& params) {
    const DomainSpec& spec = K0.spec;
    SeriesHarmonic u0 = greens_function(spec, 0.0, params);
    CriticalPoints cp = green_critical_points(spec, params);
    const std::array<cx, 2> w{cx(cp.w1, 0.0), cx(cp.w2, 0.0)};
    const auto& q = K0.quad;
    const int n = static_cast<int>(q.z.size());
    std::vector<cx> m(n);
    for (int i = 0; i < n; ++i) m[i] = std::conj(K0(q.z[i], a)) * 0.5 * green_complex_derivative(u0, 0.0, q.z[i]);
    Residues out;
    for (int k = 0; k < 2; ++k) {
        auto cauchy = [&](int stride) {
            cx acc{0.0, 0.0};
            for (int i = 0; i < n; i += stride) acc += m[i] / (q.z[i] - w[k]) * q.dz[i] * double(stride);
            return acc / (2.0 * kPi * kI) + 1.0 / (2.0 * (a - w[k]));
        };
        cx d2 = 0.5 * (1.0 / (w[k] * w[k]) + u0.complex_derivative2(w[k]));
        auto residue = [&](cx mw) { return -std::conj(mw / d2) / std::conj(w[k] * w[k]); };
        out.R[k] = residue(cauchy(1));
        out.refinement = std::max(out.refinement, std::abs(out.R[k] - residue(cauchy(2))));
    }
    return out;
}

ResidueMatrix residue_matrix(const DomainSpec& spec, const CriticalPoints& w, const std::array<cx, 4>& a,
                             const std::array<Eigen::Vector2cd, 4>& delta, const ResidueFn& residues) {
    (void)spec;
    std::vector<cx> pts{cx(w.w1, 0.0), cx(w.w2, 0.0), 0.0, a[0], a[1], a[2], a[3]};
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            if (std::abs(pts[i] - pts[j]) < kEpsSep)
                throw Error("degenerate-points", "poles and reflected points are not distinct");
    ResidueMatrix out;
    out.a = a;
    out.delta = delta;
    for (int j = 0; j < 4; ++j) {
        std::array<cx, 2> R = residues(a[j]);
        for (int k = 0; k < 2; ++k)
            for (int c = 0; c < 2; ++c) out.F(2 * k + c, j) = R[k] * delta[j](c);
    }
    Eigen::JacobiSVD<Eigen::Matrix4cd> svd(out.F);
    out.singular_values = svd.singularValues();
    out.sigma_min = out.singular_values(3);
    out.condition = out.singular_values(0) / out.sigma_min;
    return out;
}

PickMatrix pick_block_matrix(const MatrixFn& F, const std::vector<cx>& Q, const std::function<cx(cx, cx)>& kernel) {
    const int n = static_cast<int>(Q.size());
    std::vector<Eigen::Matrix2cd> Fv(n);
    for (int i = 0; i < n; ++i) Fv[i] = F(Q[i]);
    PickMatrix out;
    out.M.resize(2 * n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            out.M.block<2, 2>(2 * i, 2 * j) =
                (Eigen::Matrix2cd::Identity() - Fv[i] * Fv[j].adjoint()) * kernel(Q[i], Q[j]);
    Eigen::MatrixXcd H = 0.5 * (out.M + out.M.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
    out.eigenvalues = es.eigenvalues().reverse();
    return out;
}

}  // namespace tridisk
