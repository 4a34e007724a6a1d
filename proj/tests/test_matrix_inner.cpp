#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tridisk/matrix_inner.hpp"

using namespace tridisk;

namespace {

const DomainSpec kSpec;

const NonrealT& tpar() {
    static const NonrealT t = find_nonreal_t(kSpec);
    return t;
}

const FayTheta& theta0() {
    static const FayTheta k = [] {
        auto s = get_surface(kSpec);
        FayKernel g = fay_kernel_gram(kSpec, 0.0);
        FitResult fit = fit_e(s, 0.0, g);
        return FayTheta(s, 0.0, fit.e);
    }();
    return k;
}

const EtaChoice& eta_choice() {
    static const EtaChoice c = choose_eta(kSpec, tpar().t1, tpar().t2, theta0());
    return c;
}

const MatrixInner& psi() {
    static const MatrixInner m = build_Psi(kSpec, eta_choice().eta, tpar().t1, tpar().t2);
    return m;
}

std::vector<cx> random_interior(int n, unsigned seed, double margin = 0.02) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cx> pts;
    while (static_cast<int>(pts.size()) < n) {
        cx z(u(rng), u(rng));
        if (contains(kSpec, z).region == Region::interior && boundary_distance(kSpec, z) > margin) pts.push_back(z);
    }
    return pts;
}

}  // namespace

TEST_CASE("vector helpers") {
    Mat2c M;
    M << 1.0, 2.0, 2.0, 4.0;
    Vec2c v = left_null_vector(M);
    CHECK((M.adjoint() * v).norm() < 1e-14);
    CHECK(v.norm() == doctest::Approx(1.0));
    const Vec2c e1(1.0, 0.0), e2(0.0, 1.0);
    CHECK(triple_spread(e1, e1, 2.0 * e1) < 1e-15);
    CHECK(triple_spread(e1, e2, e1) == doctest::Approx(1.0));
    CHECK(pattern_distance({e1, e1, e2, e2}) < 1e-15);
    CHECK(pattern_distance({e2, e1, e2, e2}) == doctest::Approx(1.0));
    CHECK(collinearity_margin({e1, e1, e2, e2}) == doctest::Approx(1.0));
    CHECK(collinearity_margin({e1, e2, 3.0 * e1, e1}) < 1e-15);
}

TEST_CASE("eta scan picks the largest passing power of two") {
    const EtaChoice& c = eta_choice();
    CHECK(c.eta > 0.0);
    REQUIRE(!c.scan.empty());
    bool seen = false;
    for (const auto& e : c.scan) {
        CHECK(std::abs(std::log2(e.eta) - std::round(std::log2(e.eta))) < 1e-14);
        if (e.eta > c.eta) CHECK_FALSE(e.report.passes);
        if (e.eta == c.eta) {
            CHECK(e.report.passes);
            seen = true;
        }
    }
    CHECK(seen);
}

TEST_CASE("defining properties of Psi") {
    PsiOneReport r = psione_report(psi());
    CHECK(r.unitarity < kEpsMat);
    CHECK(r.at0 < 1e-10);
    CHECK(r.at1 < kEpsMat);
    CHECK(r.q1_e1 < kEpsMat);
    CHECK(r.q1c_e2 < kEpsMat);
    CHECK(r.q2_vplus < kEpsMat);
    CHECK(r.q2c_vminus < kEpsMat);
    CHECK(r.diagonal_at_eta0 < kEpsMat);
    CHECK(r.max() < kEpsMat);
}

TEST_CASE("Psi is contractive inside and its derivative matches finite differences") {
    for (cx z : random_interior(40, 1)) {
        Eigen::JacobiSVD<Mat2c> svd(psi().Psi(z));
        CHECK(svd.singularValues()(0) <= 1.0 + 1e-8);
    }
    for (cx z : random_interior(5, 2, 0.1)) {
        const double h = 1e-4;
        Mat2c fd = (psi().Psi(z + h) - psi().Psi(z - h)) / (2 * h);
        CHECK((fd - psi().dPsi(z)).norm() < 1e-6);
        cx dfd = (psi().det(z + h) - psi().det(z - h)) / (2 * h);
        CHECK(std::abs(dfd - psi().ddet(z)) < 1e-6);
    }
}

TEST_CASE("zero data: double zero at 0, four further simple zeros, winding six") {
    const ZeroData& zd = psi().zd;
    CHECK(zd.complete);
    CHECK(zd.winding == 6);
    CHECK(zd.zeros.size() == 6);
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(psi().det(zd.a[j])) < 1e-10);
        CHECK((psi().Psi(zd.a[j]).adjoint() * zd.delta[j]).norm() < 1e-8);
        CHECK(zd.delta[j].norm() == doctest::Approx(1.0));
    }
    // Independent count by the argument principle on circles just inside R.
    std::function<cx(cx)> det = [&](cx z) { return psi().det(z); };
    const double d = 5e-3;
    int n = oracle::argument_count(det, 0.0, 1.0 - d, 8000) - oracle::argument_count(det, kSpec.c1, kSpec.r1 + d, 4000) -
            oracle::argument_count(det, kSpec.c2, kSpec.r2 + d, 4000);
    CHECK(n == 6);
}

TEST_CASE("standard zero set check passes at the chosen eta") {
    ZeroSetReport z = standard_zero_set_check(psi(), theta0(), 2 * kEpsSep);
    CHECK(z.passes);
    CHECK(z.failures.empty());
    CHECK(z.sigma_min > 0.0);
    CHECK(z.condition < kConditionMax);
    CHECK(z.psi0_norm < kEpsMat);
    CHECK(z.pattern <= kPatternMax);
}

TEST_CASE("diagonalizability witness") {
    Witness w = diagonalizability_witness([&](cx z) { return psi().Psi(z); });
    CHECK(w.found);
    CHECK(w.commutator > kEpsDiag);
    // A diagonal function has no witness.
    InnerEvaluator p = psi_t(kSpec, tpar().t1, tpar().t2), m = psi_t(kSpec, -tpar().t1, -tpar().t2);
    Witness d = diagonalizability_witness([&](cx z) {
        Mat2c F = Mat2c::Zero();
        F(0, 0) = p.phi(z);
        F(1, 1) = m.phi(z);
        return F;
    });
    CHECK_FALSE(d.found);
    CHECK(d.commutator < 1e-12);
}

TEST_CASE("eta = 0 gives the diagonal pair") {
    MatrixInner m0 = build_Psi(kSpec, 0.0, tpar().t1, tpar().t2);
    InnerEvaluator a = psi_t(kSpec, tpar().t1, -tpar().t2), b = psi_t(kSpec, -tpar().t1, tpar().t2);
    for (cx z : random_interior(100, 3)) {
        Mat2c P = m0.Psi(z);
        CHECK(std::abs(P(0, 1)) < 1e-6);
        CHECK(std::abs(P(1, 0)) < 1e-6);
        CHECK(std::abs(P(0, 0) - a.phi(z)) < 1e-6);
        CHECK(std::abs(P(1, 1) - b.phi(z)) < 1e-6);
    }
}

TEST_CASE("Pick matrix of Psi is positive semidefinite") {
    std::vector<cx> Q = random_interior(12, 4, 0.1);
    PickMatrix pk = pick_block_matrix([&](cx z) { return psi().Psi(z); }, Q,
                                      [&](cx z, cx w) { return theta0().front(z, w); });
    CHECK(pk.eigenvalues.size() == 24);
    CHECK(pk.eigenvalues.minCoeff() >= -1e-8);
}

TEST_CASE("delta pattern approaches the eta = 0 reference as eta decreases") {
    double prev = INFINITY;
    for (int k = 1; k <= 8; ++k) {
        const double eta = std::ldexp(1.0, -k);
        MatrixInner m = build_Psi(kSpec, eta, tpar().t1, tpar().t2);
        REQUIRE(m.zd.complete);
        const double p = pattern_distance(m.zd.delta);
        INFO("eta ", eta, " pattern ", p, " previous ", prev);
        CHECK(p <= prev + 1e-9);
        prev = p;
    }
    CHECK(prev < 1e-2);
}
