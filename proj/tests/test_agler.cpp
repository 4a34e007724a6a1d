#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tridisk/agler.hpp"

using namespace tridisk;

namespace {

const DomainSpec kSpec;

const NonrealT& tpar() {
    static const NonrealT t = find_nonreal_t(kSpec);
    return t;
}

const FayKernel& gram0() {
    static const FayKernel k = fay_kernel_gram(kSpec, 0.0, 32);
    return k;
}

const MatrixInner& psi() {
    static const MatrixInner m = [] {
        auto s = get_surface(kSpec);
        FitResult fit = fit_e(s, 0.0, gram0());
        FayTheta K0(s, 0.0, fit.e);
        EtaChoice c = choose_eta(kSpec, tpar().t1, tpar().t2, K0);
        return build_Psi(kSpec, c.eta, tpar().t1, tpar().t2);
    }();
    return m;
}

std::vector<std::pair<double, double>> anchors() {
    const double t1 = tpar().t1, t2 = tpar().t2;
    return {{t1, t2}, {-t1, -t2}, {t1, -t2}, {-t1, t2}};
}

// 4 x 4 grid plus anchors on the default eight-point set.
const ConeSample& small_cone() {
    static const ConeSample s(kSpec, default_S(psi().zd), sample_Pi(kSpec, 4, 4, anchors()));
    return s;
}

Mat2c diag2(cx a, cx b) {
    Mat2c m = Mat2c::Zero();
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

std::vector<Mat2c> diag_values(const std::vector<cx>& pts) {
    InnerEvaluator a = psi_t(kSpec, tpar().t1, tpar().t2), b = psi_t(kSpec, -tpar().t1, -tpar().t2);
    return values_on([&](cx z) { return diag2(a.phi(z), b.phi(z)); }, pts);
}

std::vector<Mat2c> psi_values(const std::vector<cx>& pts) {
    return values_on([&](cx z) { return psi().Psi(z); }, pts);
}

}  // namespace

TEST_CASE("sample_Pi keeps grid points and anchors") {
    const ConeSample& s = small_cone();
    const PiGrid& g = s.grid();
    CHECK(g.points.size() + g.dropped.size() == 16 + 4);
    int nanchor = 0;
    for (const GridPoint& p : g.points) nanchor += p.anchor;
    CHECK(nanchor == 4);
    CHECK(s.generators() == static_cast<int>(g.points.size()) + 1);
    CHECK(s.points() == 8);
    CHECK(s.diagonal_floor() > 0.0);
    for (int k = 0; k < s.generators(); ++k) {
        const Eigen::MatrixXcd& K = s.kernel(k);
        CHECK((K - K.adjoint()).norm() < 1e-12);
        CHECK(s.block_kernel(k).rows() == 16);
        // 1 - phi phi^* has at most one positive and one negative eigenvalue.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(K);
        const double tol = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        CHECK((es.eigenvalues().array() < -tol).count() <= 1);
        CHECK((es.eigenvalues().array() > tol).count() <= 1);
    }
}

TEST_CASE("project_psd: parallel equals serial, output is PSD and a fixed point") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<Eigen::MatrixXcd> a;
    for (int k = 0; k < 12; ++k) {
        Eigen::MatrixXcd m(10, 10);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) m(i, j) = cx(n(rng), n(rng));
        a.push_back(m + m.adjoint());
    }
    auto b = a;
    project_psd(a, true);
    project_psd(b, false);
    for (size_t k = 0; k < a.size(); ++k) {
        CHECK((a[k] - b[k]).norm() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a[k]);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
    auto c = a;
    project_psd(c, true);
    for (size_t k = 0; k < a.size(); ++k) CHECK((a[k] - c[k]).norm() < 1e-12);
}

TEST_CASE("diagonal pair at rho = 1 is primal") {
    const ConeSample& s = small_cone();
    auto FS = diag_values(s.S());
    ConeCertificate c = feasibility(s, FS, 1.0);
    REQUIRE(c.decision == Decision::primal);
    CHECK(c.primal_residual <= 1e-7);
    Eigen::MatrixXcd T = target_matrix(FS, 1.0);
    CHECK((cone_map(s, c.Gamma) - T).norm() / std::max(1.0, T.norm()) <= 1e-7);
    for (const auto& G : c.Gamma) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
    double total = 0.0;
    for (double m : c.mu) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("interior and splitting methods agree on a small instance") {
    const ConeSample& s = small_cone();
    auto FS = diag_values(s.S());
    SdpOptions o;
    o.method = SdpMethod::splitting;
    ConeCertificate a = feasibility(s, FS, 0.5), b = feasibility(s, FS, 0.5, o);
    CHECK(a.decision == Decision::primal);
    CHECK(b.decision == Decision::primal);
    CHECK(b.primal_residual <= kEpsSdp);
}

TEST_CASE("below the absorption bound every function is primal") {
    const ConeSample& s = small_cone();
    auto FS = psi_values(s.S());
    double rho = absorb_lower_bound(FS);
    CHECK(rho > 0.0);
    CHECK(rho < 1.0);
    ConeCertificate c = feasibility(s, FS, rho);
    CHECK(c.decision == Decision::primal);
    CHECK(std::isinf(absorb_lower_bound(std::vector<Mat2c>(3, Mat2c::Zero()))));
}

TEST_CASE("margin is invariant under constant unitary conjugation") {
    const ConeSample& s = small_cone();
    auto FS = psi_values(s.S());
    Mat2c V;
    const double c = std::cos(0.7), sn = std::sin(0.7);
    V << c, cx(0.0, sn), cx(0.0, sn), c;
    auto GS = FS;
    for (auto& m : GS) m = V * m * V.adjoint();
    const double rho = 0.9;
    MarginSolution a = cone_margin(s, target_matrix(FS, rho)), b = cone_margin(s, target_matrix(GS, rho));
    CHECK(std::abs(a.t - b.t) < 1e-7);
}

TEST_CASE("bisection trace is monotone and weak duality holds") {
    const ConeSample& s = small_cone();
    auto FS = psi_values(s.S());
    RhoBracket b = rho_bisect(s, FS, 1e-2);
    REQUIRE(b.hi_found);
    CHECK(b.lo < b.hi);
    CHECK(b.hi - b.lo <= 1e-2 + 1e-15);
    CHECK(b.hi <= 1.0 + 1e-12);
    double max_primal = 0.0, min_dual = INFINITY;
    for (const RhoStep& st : b.trace) {
        if (st.decision == Decision::primal) max_primal = std::max(max_primal, st.rho);
        if (st.decision == Decision::dual) min_dual = std::min(min_dual, st.rho);
    }
    CHECK(max_primal < min_dual);
    // A dual functional is nonnegative on the cone, so it cannot separate the primal target at rho_lo.
    const Eigen::MatrixXcd& L = b.hi_cert.dual.Lambda;
    Eigen::MatrixXcd Tlo = target_matrix(FS, b.lo);
    const double pairing = (L.adjoint() * Tlo).trace().real();
    CHECK(pairing >= -b.lo_cert.primal_residual * std::max(1.0, Tlo.norm()) * L.norm());
    for (int g = 0; g < s.generators(); ++g) {
        const double v = (L.adjoint() * cone_map(s, [&] {
                             std::vector<Eigen::MatrixXcd> G(s.generators(), Eigen::MatrixXcd::Zero(16, 16));
                             G[g] = Eigen::MatrixXcd::Identity(16, 16);
                             return G;
                         }())).trace().real();
        CHECK(v >= -1e-9 * L.norm());
    }
    CHECK(b.hi_cert.dual.valid);
    CHECK(b.hi_cert.dual.value < 0.0);
}

TEST_CASE("certify_dual rejects the identity functional") {
    const ConeSample& s = small_cone();
    auto FS = psi_values(s.S());
    Eigen::MatrixXcd T = target_matrix(FS, 1.0);
    DualCheck d = certify_dual(s, T, Eigen::MatrixXcd::Identity(T.rows(), T.cols()));
    CHECK_FALSE(d.valid);
    CHECK(d.value > 0.0);
}

TEST_CASE("realization of the diagonal pair") {
    const ConeSample& s = small_cone();
    auto FS = diag_values(s.S());
    ConeCertificate c = feasibility(s, FS, 1.0);
    REQUIRE(c.decision == Decision::primal);
    Colligation col = realize(s, FS, c, 1e-10);
    CHECK(col.state_dim() > 0);
    CHECK(col.unitarity_residual() <= 1e-10);
    for (size_t i = 0; i < FS.size(); ++i) CHECK((col.W(s.S()[i]) - FS[i]).norm() <= 1e-6);
    std::vector<cx> grid = interior_grid(kSpec, 200);
    double excess = 0.0;
    for (cx z : grid) excess = std::max(excess, col.W(z).operatorNorm() - 1.0);
    CHECK(excess <= 1e-8);
    for (int k = 0; k < 10; ++k) CHECK(col.transfer_identity_residual(grid[k], grid[199 - k]) <= 1e-8);
    ConeCertificate bad = c;
    bad.decision = Decision::dual;
    CHECK_THROWS_AS(realize(s, FS, bad), Error);
}

TEST_CASE("interior grid stays away from the boundary") {
    auto g = interior_grid(kSpec, 200);
    CHECK(g.size() == 200);
    for (cx z : g) {
        CHECK(contains(kSpec, z).region == Region::interior);
        CHECK(boundary_distance(kSpec, z) >= 0.05 - 1e-12);
    }
}

TEST_CASE("uniqueness: the seven-point data determine Psi") {
    UniquenessReport u = uniqueness_check(psi(), [&](cx z, cx w) { return gram0()(z, w); }, interior_grid(kSpec, 200));
    CHECK(u.S.size() == 7);
    CHECK(u.rank == 6);
    CHECK(u.max_deviation <= 1e-4);
    CHECK(u.rank_gap < 1e-3);
}

TEST_CASE("GNS evidence requires a dual certificate") {
    const ConeSample& s = small_cone();
    auto FS = diag_values(s.S());
    ConeCertificate c = feasibility(s, FS, 1.0);
    try {
        gns_evidence(s, c, FS);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "not-dual");
    }
}

TEST_CASE("GNS evidence on a separating functional") {
    const ConeSample& s = small_cone();
    auto FS = psi_values(s.S());
    ConeCertificate c = feasibility(s, FS, 1.0);
    REQUIRE(c.decision == Decision::dual);
    GnsReport g = gns_evidence(s, c, FS);
    CHECK(g.lambda_I > 0.0);
    CHECK(g.pairing < 0.0);
    CHECK(g.cone_samples == 50);
    CHECK(g.cone_min >= 0.0);
    CHECK(g.rank > 0);
}
