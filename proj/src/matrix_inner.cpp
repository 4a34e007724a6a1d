#include "tridisk/matrix_inner.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

namespace tridisk {

std::array<cx, 2> HarmonicMatrix::q() const {
    Triple p = p_of_t(t1, t2);
    return {point(spec, p[1]), point(spec, p[2])};
}

Vec2 HarmonicMatrix::v_plus() const { return Vec2(eta, std::sqrt(1.0 - eta * eta)); }
Vec2 HarmonicMatrix::v_minus() const { return Vec2(std::sqrt(1.0 - eta * eta), -eta); }

Mat2c HarmonicMatrix::G(cx z) const {
    Mat2c m;
    m(0, 0) = g[0].value(z);
    m(0, 1) = m(1, 0) = g[1].value(z);
    m(1, 1) = g[2].value(z);
    return m;
}

Mat2c HarmonicMatrix::dG(cx z) const {
    Mat2c m;
    m(0, 0) = g[0].deriv(z);
    m(0, 1) = m(1, 0) = g[1].deriv(z);
    m(1, 1) = g[2].deriv(z);
    return m;
}

HarmonicMatrix build_H(const DomainSpec& spec, double eta, double t1, double t2, const SolverParams& params) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw Error("invalid-argument", "eta must lie in [0, 1]");
    HarmonicMatrix hm;
    hm.spec = spec;
    hm.eta = eta;
    hm.t1 = t1;
    hm.t2 = t2;
    Triple p = p_of_t(t1, t2);
    hm.tau = tau(spec, p, params).values;
    const auto& tv = hm.tau;
    BoundaryPoint one = p[0], q1 = p[1], q2 = p[2];
    BoundaryPoint q1c = conj(q1), q2c = conj(q2);
    const double s = std::sqrt(1.0 - eta * eta);

    using Terms = std::vector<std::pair<double, BoundaryPoint>>;
    auto add = [](Terms& t, double w, const BoundaryPoint& b) {
        if (w != 0.0) t.emplace_back(w, b);
    };
    Terms e11, e12, e22;
    add(e11, tv[0], one);
    add(e11, tv[1], q1);
    add(e11, tv[2] * eta * eta, q2);
    add(e11, tv[2] * s * s, q2c);
    add(e22, tv[0], one);
    add(e22, tv[1], q1c);
    add(e22, tv[2] * s * s, q2);
    add(e22, tv[2] * eta * eta, q2c);
    add(e12, tv[2] * eta * s, q2);
    add(e12, -tv[2] * eta * s, q2c);

    hm.g[0] = herglotz_completion(spec, e11, 0.0, params);
    hm.g[1] = herglotz_completion(spec, e12, 0.0, params);
    hm.g[2] = herglotz_completion(spec, e22, 0.0, params);
    double a11 = hm.g[0].value(0.0).real(), a22 = hm.g[2].value(0.0).real();
    hm.h0 = a11;
    hm.h0_mismatch = std::abs(a22 - a11);
    for (auto& f : hm.g) f *= 1.0 / a11;
    // Exact normalization G(0) = I; the off-diagonal real part at 0 vanishes by symmetry.
    hm.g[0].constant += 1.0 - hm.g[0].value(0.0);
    hm.g[2].constant += 1.0 - hm.g[2].value(0.0);
    hm.g[1].constant -= kI * hm.g[1].value(0.0).imag();
    return hm;
}

namespace {

Mat2c inv_plus_identity(const Mat2c& G) {
    Mat2c A = G + Mat2c::Identity();
    cx d = A.determinant();
    Mat2c inv;
    inv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
    inv /= d;
    if (!(inv.norm() <= 1e8)) throw Error("singular-G", "G + I is nearly singular");
    return inv;
}

Mat2c adjugate(const Mat2c& M) {
    Mat2c a;
    a << M(1, 1), -M(0, 1), -M(1, 0), M(0, 0);
    return a;
}

}  // namespace

Mat2c MatrixInner::Psi(cx z) const {
    Mat2c G = Hm.G(z);
    return (G - Mat2c::Identity()) * inv_plus_identity(G);
}

Mat2c MatrixInner::dPsi(cx z) const {
    Mat2c G = Hm.G(z);
    Mat2c inv = inv_plus_identity(G);
    Mat2c P = (G - Mat2c::Identity()) * inv;
    return (Mat2c::Identity() - P) * Hm.dG(z) * inv;
}

cx MatrixInner::det(cx z) const { return Psi(z).determinant(); }

cx MatrixInner::ddet(cx z) const { return (adjugate(Psi(z)) * dPsi(z)).trace(); }

Vec2c left_null_vector(const Mat2c& M) {
    Eigen::JacobiSVD<Mat2c> svd(M.adjoint(), Eigen::ComputeFullV);
    Vec2c v = svd.matrixV().col(1);
    int k = std::abs(v(0)) >= std::abs(v(1)) ? 0 : 1;
    v *= std::conj(v(k)) / std::abs(v(k));
    return v.normalized();
}

MatrixInner build_Psi(const DomainSpec& spec, double eta, double t1, double t2, const SolverParams& params) {
    MatrixInner m;
    m.Hm = build_H(spec, eta, t1, t2, params);
    const MatrixInner* self = &m;
    ZeroResult zr = zeros_in_R(
        spec, [self](cx z) { return self->det(z); }, [self](cx z) { return self->ddet(z); }, 6);
    m.zd.zeros = zr.zeros;
    m.zd.winding = zr.winding;
    std::vector<cx> others;
    int at0 = 0;
    for (size_t i = 0; i < zr.distinct.size(); ++i) {
        if (std::abs(zr.distinct[i]) < 1e-6)
            at0 += zr.multiplicity[i];
        else if (zr.multiplicity[i] == 1)
            others.push_back(zr.distinct[i]);
    }
    if (at0 == 2 && others.size() == 4) {
        std::array<std::pair<cx, Vec2c>, 4> z;
        for (int j = 0; j < 4; ++j) z[j] = {others[j], left_null_vector(m.Psi(others[j]))};
        // e1-like null vectors first, each group ordered by real part.
        std::sort(z.begin(), z.end(), [](const auto& x, const auto& y) {
            return std::abs(x.second(0)) > std::abs(y.second(0));
        });
        std::sort(z.begin(), z.begin() + 2, [](const auto& x, const auto& y) { return x.first.real() < y.first.real(); });
        std::sort(z.begin() + 2, z.end(), [](const auto& x, const auto& y) { return x.first.real() < y.first.real(); });
        for (int j = 0; j < 4; ++j) {
            m.zd.a[j] = z[j].first;
            m.zd.delta[j] = z[j].second;
        }
        m.zd.complete = true;
    }
    return m;
}

Mat2c boundary_value(const MatrixInner& psi, const BoundaryPoint& q, double delta) {
    cx z = point(psi.spec(), q);
    cx n = outward_normal(psi.spec(), q);
    return 3.0 * psi.Psi(z - delta * n) - 3.0 * psi.Psi(z - 2.0 * delta * n) + psi.Psi(z - 3.0 * delta * n);
}

double boundary_unitarity_residual(const MatrixInner& psi, int n_per_circle, double delta) {
    double worst = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < n_per_circle; ++m) {
            Mat2c P = boundary_value(psi, BoundaryPoint{c, 2.0 * kPi * (m + 0.5) / n_per_circle}, delta);
            worst = std::max(worst, (P * P.adjoint() - Mat2c::Identity()).operatorNorm());
        }
    return worst;
}

double triple_spread(const Vec2c& a, const Vec2c& b, const Vec2c& c) {
    auto d = [](const Vec2c& x, const Vec2c& y) {
        return std::abs(x(0) * y(1) - x(1) * y(0)) / (x.norm() * y.norm());
    };
    return std::max({d(a, b), d(a, c), d(b, c)});
}

double collinearity_margin(const std::array<Vec2c, 4>& delta) {
    double m = INFINITY;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int k = j + 1; k < 4; ++k) m = std::min(m, triple_spread(delta[i], delta[j], delta[k]));
    return m;
}

double pattern_distance(const std::array<Vec2c, 4>& delta) {
    double d = 0.0;
    for (int j = 0; j < 4; ++j) {
        int off = j < 2 ? 1 : 0;
        d = std::max(d, std::abs(delta[j](off)) / delta[j].norm());
    }
    return d;
}

ZeroSetReport standard_zero_set_check(const MatrixInner& psi, const FayTheta& K0, double margin) {
    ZeroSetReport r;
    const ZeroData& zd = psi.zd;
    r.complete = zd.complete;
    r.psi0_norm = psi.Psi(0.0).norm();
    r.ok_zero0 = zd.complete && r.psi0_norm < 1e-8;
    if (!r.ok_zero0) r.failures.push_back("double zero at 0");
    if (!zd.complete) {
        r.failures.push_back("zero structure");
        return r;
    }
    std::vector<cx> pts{0.0, zd.a[0], zd.a[1], zd.a[2], zd.a[3]};
    r.zero_separation = INFINITY;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j) r.zero_separation = std::min(r.zero_separation, std::abs(pts[i] - pts[j]));
    r.ok_distinct = r.zero_separation >= margin;
    if (!r.ok_distinct) r.failures.push_back("zeros not distinct");

    r.collinearity = collinearity_margin(zd.delta);
    r.ok_collinear = r.collinearity >= margin;
    if (!r.ok_collinear) r.failures.push_back("three null vectors collinear");

    const Surface& s = K0.surface();
    r.pole_separation = INFINITY;
    for (cx a : zd.a)
        for (double w : {s.w.w1, s.w.w2}) r.pole_separation = std::min(r.pole_separation, std::abs(a - w));
    r.ok_poles = r.pole_separation >= margin;
    if (!r.ok_poles) r.failures.push_back("reflected zero meets a kernel pole");

    r.pattern = pattern_distance(zd.delta);
    try {
        ResidueMatrix F = residue_matrix(psi.spec(), s.w, zd.a, zd.delta,
                                         [&](cx a) { return residues_theta(K0, a).R; });
        r.sigma_min = F.sigma_min;
        r.condition = F.condition;
    } catch (const Error& e) {
        r.failures.push_back(std::string("residue matrix: ") + e.code());
    }
    r.ok_proximity = r.sigma_min > 0.0 && r.condition < kConditionMax && r.pattern <= kPatternMax;
    if (!r.ok_proximity) r.failures.push_back("null vectors not close to the reference pattern");
    r.passes = r.ok_zero0 && r.ok_distinct && r.ok_collinear && r.ok_poles && r.ok_proximity;
    return r;
}

EtaChoice choose_eta(const DomainSpec& spec, double t1, double t2, const FayTheta& K0, const SolverParams& params) {
    EtaChoice out;
    for (int k = 3; k <= 12; ++k) {
        double eta = std::ldexp(1.0, -k);
        ZeroSetReport rep;
        try {
            MatrixInner m = build_Psi(spec, eta, t1, t2, params);
            rep = standard_zero_set_check(m, K0, 2.0 * kEpsSep);
        } catch (const Error& e) {
            rep.failures.push_back(e.code());
        }
        out.scan.push_back({eta, rep});
        if (rep.passes) {
            out.eta = eta;
            return out;
        }
    }
    throw Error("no-eta-found", "no eta in the scan gives a standard zero set");
}

std::vector<std::pair<cx, cx>> witness_probe_pairs() {
    std::vector<std::pair<cx, cx>> p;
    for (int k = 0; k < 12; ++k)
        p.emplace_back(std::polar(0.2, 2.0 * kPi * k / 12 + 0.1), std::polar(0.8, 2.0 * kPi * k / 12 + 0.35));
    return p;
}

double PsiOneReport::max() const {
    return std::max({unitarity, at0, at1, q1_e1, q1c_e2, q2_vplus, q2c_vminus, diagonal_at_eta0});
}

PsiOneReport psione_report(const MatrixInner& psi, const SolverParams& params, int n_per_circle) {
    PsiOneReport r;
    const HarmonicMatrix& H = psi.Hm;
    const Triple p = p_of_t(H.t1, H.t2);
    const Vec2c e1(1.0, 0.0), e2(0.0, 1.0);
    const Vec2c vp = H.v_plus().cast<cx>(), vm = H.v_minus().cast<cx>();
    r.unitarity = boundary_unitarity_residual(psi, n_per_circle);
    r.at0 = psi.Psi(0.0).norm();
    r.at1 = (boundary_value(psi, p[0]) - Mat2c::Identity()).norm();
    r.q1_e1 = (boundary_value(psi, p[1]) * e1 - e1).norm();
    r.q1c_e2 = (boundary_value(psi, conj(p[1])) * e2 - e2).norm();
    r.q2_vplus = (boundary_value(psi, p[2]) * vp - vp).norm();
    r.q2c_vminus = (boundary_value(psi, conj(p[2])) * vm - vm).norm();
    const MatrixInner m0 = H.eta == 0.0 ? psi : build_Psi(psi.spec(), 0.0, H.t1, H.t2, params);
    const InnerEvaluator a = psi_t(psi.spec(), H.t1, -H.t2, params), b = psi_t(psi.spec(), -H.t1, H.t2, params);
    for (cx z : {cx(0.3, 0.2), cx(-0.5, 0.3), cx(0.1, -0.7), cx(0.05, 0.5), cx(-0.1, -0.35)}) {
        Mat2c P = m0.Psi(z);
        r.diagonal_at_eta0 = std::max({r.diagonal_at_eta0, std::abs(P(0, 0) - a.phi(z)), std::abs(P(1, 1) - b.phi(z)),
                                       std::abs(P(0, 1)), std::abs(P(1, 0))});
    }
    return r;
}

Witness diagonalizability_witness(const std::function<Mat2c(cx)>& F, const std::vector<std::pair<cx, cx>>& pairs,
                                  double eps) {
    std::vector<Mat2c> C;
    for (auto [z, w] : pairs) C.push_back(F(z) * F(w).adjoint());
    Witness out;
    for (size_t i = 0; i < C.size(); ++i)
        for (size_t j = i + 1; j < C.size(); ++j) {
            double c = (C[i] * C[j] - C[j] * C[i]).operatorNorm();
            if (c > out.commutator) {
                out.commutator = c;
                out.pairs = {pairs[i].first, pairs[i].second, pairs[j].first, pairs[j].second};
            }
        }
    out.found = out.commutator > eps;
    return out;
}

}  // namespace tridisk
