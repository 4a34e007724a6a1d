#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tridisk/theta.hpp"

using namespace tridisk;
using std::numbers::pi;

namespace {

const Surface& surf() { return *get_surface(DomainSpec{}); }

std::vector<cx2> probes(int n, unsigned seed, double scale = 0.6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<cx2> out;
    for (int i = 0; i < n; ++i) out.push_back(cx2(cx(u(rng), u(rng)), cx(u(rng), u(rng))));
    return out;
}

double rel(cx a, cx b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("period matrix is symmetric positive definite") {
    const PeriodMatrix& pm = surf().pm;
    CHECK(pm.asymmetry < 1e-8);
    CHECK(std::abs(pm.P(0, 1) - pm.P(1, 0)) < 1e-8);
    CHECK(pm.lambda_min > 0.0);
    Eigen::SelfAdjointEigenSolver<Mat2> es(pm.T);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
    CHECK((pm.T - pm.P / 2.0).norm() < 1e-15);
}

TEST_CASE("period matrix entries match fluxes by independent quadrature") {
    const DomainSpec s;
    // P_jl = flux of h_j through B_l; the outward normal of R points into the hole.
    for (int j = 1; j <= 2; ++j) {
        const SeriesHarmonic& h = harmonic_measure(s, j);
        for (int l = 1; l <= 2; ++l) {
            double r = s.radius(l);
            std::function<double(double)> f = [&](double th) {
                cx n = std::polar(1.0, th);
                cx z = s.center(l) + r * n;
                std::function<double(double)> g = [&](double d) { return h.value(z + d * n); };
                return -oracle::derivative(g, 0.0, 1e-4) * r;
            };
            double flux = oracle::integrate(f, 0.0, 2 * pi, 1e-10);
            CHECK(std::abs(flux - surf().pm.P(j - 1, l - 1)) < 1e-6);
        }
    }
}

TEST_CASE("theta agrees with the direct sum") {
    const ThetaContext& ctx = surf().ctx;
    for (const cx2& z : probes(20, 1, 1.5)) CHECK(rel(ctx.theta(z), ctx.theta_direct(z, 12)) < 1e-12);
}

TEST_CASE("theta is even and conjugate symmetric") {
    const ThetaContext& ctx = surf().ctx;
    for (const cx2& z : probes(20, 2)) {
        CHECK(rel(ctx.theta(-z), ctx.theta(z)) < 1e-10);
        CHECK(rel(ctx.theta(z.conjugate()), std::conj(ctx.theta(z))) < 1e-10);
    }
}

TEST_CASE("theta quasi-periodicity") {
    const ThetaContext& ctx = surf().ctx;
    const Mat2& T = ctx.T();
    const cx I(0.0, 1.0);
    for (const cx2& z : probes(20, 3)) {
        for (const Vec2& m : {Vec2(1, 0), Vec2(0, 1), Vec2(1, -1), Vec2(-2, 1)}) {
            cx2 shift = m.cast<cx>();
            CHECK(rel(ctx.theta(z + shift), ctx.theta(z)) < 1e-10);
            cx2 ts = I * (T * m).cast<cx>();
            cx factor = std::exp(pi * m.dot(T * m) - 2.0 * pi * I * m.cast<cx>().dot(z));
            // Eigen's dot conjugates the first argument; m is real.
            cx lhs = ctx.theta(z + ts), rhs = factor * ctx.theta(z);
            CHECK(std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)) < 1e-10);
        }
    }
}

TEST_CASE("log_theta and theta_norm are consistent") {
    const ThetaContext& ctx = surf().ctx;
    for (const cx2& z : probes(10, 4)) {
        CHECK(rel(std::exp(ctx.log_theta(z)), ctx.theta(z)) < 1e-12);
        cx2 ts = cx(0.0, 1.0) * (ctx.T() * Vec2(1, 1)).cast<cx>();
        CHECK(std::abs(ctx.theta_norm(z + ts) - ctx.theta_norm(z)) < 1e-10 * std::max(1.0, ctx.theta_norm(z)));
    }
}

TEST_CASE("theta gradient matches finite differences") {
    const ThetaContext& ctx = surf().ctx;
    for (const cx2& z : probes(5, 5)) {
        cx2 g;
        ctx.theta(z, &g);
        for (int k = 0; k < 2; ++k) {
            std::function<double(double)> re = [&](double h) { cx2 w = z; w(k) += h; return ctx.theta(w).real(); };
            std::function<double(double)> im = [&](double h) { cx2 w = z; w(k) += h; return ctx.theta(w).imag(); };
            cx fd(oracle::derivative(re, 0.0, 1e-3), oracle::derivative(im, 0.0, 1e-3));
            CHECK(std::abs(fd - g(k)) < 1e-8 * std::max(1.0, std::abs(g(k))));
        }
    }
}

TEST_CASE("odd half periods: exactly six, theta vanishes") {
    const ThetaContext& ctx = surf().ctx;
    auto odd = odd_half_periods(ctx.T());
    CHECK(odd.size() == 6);
    for (const HalfPeriod& h : odd) {
        CHECK(std::fmod(std::abs(h.u.dot(h.v)), 2.0) == doctest::Approx(1.0));
        CHECK(std::abs(ctx.theta(h.e)) < 1e-10);
    }
    REQUIRE(ctx.estar.has_value());
    CHECK(std::abs(ctx.theta(ctx.estar->e)) < 1e-10);
}

TEST_CASE("Abel-Jacobi boundary relation") {
    const Surface& sf = surf();
    const DomainSpec& s = sf.spec;
    for (int k = 0; k < 12; ++k) {
        BoundaryPoint q{k % 3, 2 * pi * (k + 0.37) / 12.0};
        cx2 chi = sf.aj.front(point(s, q));
        cx2 d = -chi.conjugate() - chi;
        for (int j = 0; j < 2; ++j) {
            CHECK(std::abs(d(j).imag()) < 1e-6);
            CHECK(std::abs(d(j).real() - std::round(d(j).real())) < 1e-6);
        }
    }
}

TEST_CASE("Abel-Jacobi map: path independence in the cut domain and the differential") {
    const Surface& sf = surf();
    const cx z(0.1, 0.5);
    cx2 a = sf.aj.front(z);
    cx2 b = sf.aj.along({cx(-1.0, 0.0), cx(-0.7, 0.5), cx(0.1, 0.5)});
    CHECK((a - b).norm() < 1e-8);
    cx2 d = sf.aj.differential(z);
    const double h = 1e-3;
    cx2 fd = (sf.aj.front(z + h) - sf.aj.front(z - h)) / (2 * h);
    CHECK((fd - d).norm() < 1e-5);
    CHECK_THROWS_AS(sf.aj.along({cx(-1.0, 0.0), cx(0.0, 0.0), cx(0.45, 0.0)}), Error);
}

TEST_CASE("prime ratio vanishes at z and blows up at w") {
    const Surface& sf = surf();
    const cx z(0.2, 0.4), w(-0.1, -0.5);
    const double d = 1e-4;
    CHECK(std::abs(prime_ratio(sf.ctx, sf.aj, z + d, z, w)) < 1e-2);
    CHECK(std::abs(prime_ratio(sf.ctx, sf.aj, w + d, z, w)) > 1e2);
    cx mid = prime_ratio(sf.ctx, sf.aj, cx(0.6, 0.1), z, w);
    CHECK(std::isfinite(std::abs(mid)));
    CHECK(std::abs(mid) > 0.0);
}

TEST_CASE("theta boundary zero") {
    const Surface& sf = surf();
    BoundaryZero bz = theta_boundary_zero(sf.ctx, sf.aj);
    CHECK(bz.residual < 1e-8);
    CHECK(std::abs(bz.point + 1.0) > 1e-3);
    CHECK(on_boundary(sf.spec, bz.point, 1e-10));
}
