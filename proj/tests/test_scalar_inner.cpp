#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tridisk/scalar_inner.hpp"

using namespace tridisk;

namespace {

std::vector<cx> random_interior(const DomainSpec& s, int n, unsigned seed, double margin = 0.02) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<cx> pts;
    while (static_cast<int>(pts.size()) < n) {
        cx z(u(rng), u(rng));
        if (contains(s, z).region == Region::interior && boundary_distance(s, z) > margin) pts.push_back(z);
    }
    return pts;
}

}  // namespace

TEST_CASE("zeros_in_R finds the zero of z") {
    DomainSpec s;
    ZeroResult r = zeros_in_R(s, [](cx z) { return z; }, [](cx) { return cx(1.0); }, 1);
    REQUIRE(r.zeros.size() == 1);
    CHECK(std::abs(r.zeros[0]) < 1e-12);
    CHECK_THROWS_AS(zeros_in_R(s, [](cx z) { return z; }, [](cx) { return cx(1.0); }, 2), Error);
}

TEST_CASE("zeros_in_R on a polynomial with a double root") {
    DomainSpec s;
    const cx a(0.1, 0.5), b(0.7, -0.2);
    auto f = [&](cx z) { return (z - a) * (z - a) * (z - b) * (z - cx(3.0, 0.0)); };
    auto df = [&](cx z) {
        return 2.0 * (z - a) * (z - b) * (z - 3.0) + (z - a) * (z - a) * (z - 3.0) + (z - a) * (z - a) * (z - b);
    };
    ZeroResult r = zeros_in_R(s, f, df, 3);
    REQUIRE(r.distinct.size() == 2);
    CHECK(r.winding == 3);
    double ea = INFINITY, eb = INFINITY;
    for (cx z : r.distinct) ea = std::min(ea, std::abs(z - a)), eb = std::min(eb, std::abs(z - b));
    CHECK(ea < 1e-6);
    CHECK(eb < 1e-10);
}

TEST_CASE("f_p: normalization and positive real part") {
    DomainSpec s;
    HerglotzFn f = build_f_p(s, p_of_t(1.0, 2.0));
    CHECK(std::abs(f.value(0.0) - 1.0) < 1e-12);
    for (cx z : random_interior(s, 200, 2)) CHECK(f.value(z).real() > 0.0);
    // Real part tends to 0 on the boundary away from the poles.
    for (int c = 0; c < 3; ++c) {
        BoundaryPoint q{c, 1.0 + 0.3 * c + 2.0};
        cx v = boundary_limit(s, q, 1e-3, [&](cx z) { return f.value(z); });
        CHECK(std::abs(v.real()) < 1e-4);
    }
}

TEST_CASE("phi_p: zero at origin, three zeros, unimodular boundary, value one at p_0") {
    DomainSpec s;
    for (auto [t1, t2] : {std::pair{0.5, 1.0}, {2.0, 4.0}, {3.0, 5.5}}) {
        InnerEvaluator phi = build_phi_p(s, p_of_t(t1, t2));
        CHECK(std::abs(phi.phi(0.0)) < 1e-12);
        CHECK(phi.zeros.size() == 3);
        CHECK(phi.winding == 3);
        CHECK(boundary_unimodularity_residual(phi) < 1e-4);
        cx one = boundary_limit(s, BoundaryPoint{0, 0.0}, 1e-3, [&](cx z) { return phi.phi(z); });
        CHECK(std::abs(one - 1.0) < 1e-4);
        for (cx z : random_interior(s, 50, 5)) CHECK(std::abs(phi.phi(z)) < 1.0);
        auto hs = h_sum_residuals(s, phi.zeros);
        CHECK(std::abs(hs[0]) < 1e-6);
        CHECK(std::abs(hs[1]) < 1e-6);
    }
}

TEST_CASE("winding matches an independent fine argument count") {
    DomainSpec s;
    InnerEvaluator phi = build_phi_p(s, p_of_t(2.0, 4.0));
    auto f = [&](cx z) { return phi.phi(z); };
    // Zeros inside the unit circle minus those inside the holes, on contours a collar inside R.
    int outer = oracle::argument_count(f, 0.0, 1.0 - 1e-3, 1 << 14);
    int h1 = oracle::argument_count(f, s.c1, s.r1 + 1e-3, 1 << 14);
    int h2 = oracle::argument_count(f, s.c2, s.r2 + 1e-3, 1 << 14);
    CHECK(outer - h1 - h2 == phi.winding);
}

TEST_CASE("t = 0 gives real zeros in the predicted intervals") {
    DomainSpec s;
    InnerEvaluator psi = psi_t(s, 0.0, 0.0);
    REQUIRE(psi.zeros.size() == 3);
    int left = 0, mid = 0, right = 0;
    for (cx z : psi.zeros) {
        CHECK(std::abs(z.imag()) < 1e-8);
        if (std::abs(z) < 1e-8) ++mid;
        if (z.real() > -1.0 && z.real() < s.c1 - s.r1) ++left;
        if (z.real() > s.c2 + s.r2 && z.real() < 1.0) ++right;
    }
    CHECK(left == 1);
    CHECK(mid == 1);
    CHECK(right == 1);
}

TEST_CASE("psi_{-t} has the conjugate zeros of psi_t") {
    DomainSpec s;
    InnerEvaluator a = psi_t(s, 0.4, 0.2), b = psi_t(s, -0.4, -0.2);
    REQUIRE(a.zeros.size() == b.zeros.size());
    for (cx z : a.zeros) {
        double best = INFINITY;
        for (cx w : b.zeros) best = std::min(best, std::abs(std::conj(z) - w));
        CHECK(best < 1e-8);
    }
}

TEST_CASE("find_nonreal_t: nonreal distinct zeros, reflected parameter also admissible") {
    DomainSpec s;
    NonrealT t = find_nonreal_t(s);
    REQUIRE(t.zeros.size() == 3);
    CHECK(std::abs(t.zeros[0]) < 1e-10);
    CHECK(t.zeros[1].imag() > 1e-3);
    CHECK(std::abs(t.zeros[2].imag()) > 1e-3);
    auto hs = h_sum_residuals(s, t.zeros);
    CHECK(std::abs(hs[0]) < 1e-6);
    CHECK(std::abs(hs[1]) < 1e-6);
    CHECK(nonreal_distinct(psi_t(s, t.t1, -t.t2).zeros));
    NonrealT t0 = find_nonreal_t(s, {{0.0, 0.0}, {t.t1, t.t2}});
    REQUIRE(t0.scan.size() == 2);
    CHECK_FALSE(t0.scan[0].accepted);
    CHECK(t0.t1 == t.t1);
}

TEST_CASE("Herglotz identity for 1 - psi(z) psi(w)^*") {
    DomainSpec s;
    InnerEvaluator psi = psi_t(s, 0.4, 0.2);
    CHECK(herglotz_identity_residual(psi, 0.0, 0.0) < 1e-14);
    auto pts = random_interior(s, 100, 9);
    for (int k = 0; k < 50; ++k) CHECK(herglotz_identity_residual(psi, pts[2 * k], pts[2 * k + 1]) < 1e-8);
}

TEST_CASE("nonreal_distinct rejects real or repeated zeros") {
    CHECK_FALSE(nonreal_distinct({0.0, cx(0.3, 0.0), cx(0.2, 0.4)}));
    CHECK_FALSE(nonreal_distinct({0.0, cx(0.3, 0.4), cx(0.3, 0.4)}));
    CHECK(nonreal_distinct({0.0, cx(0.3, 0.4), cx(0.2, -0.4)}));
}
