#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "tridisk/fay.hpp"

using namespace tridisk;
using std::numbers::pi;

namespace {

const DomainSpec kSpec;

std::shared_ptr<const Surface> surf() { return get_surface(kSpec); }

const FayKernel& gram0() {
    static const FayKernel k = fay_kernel_gram(kSpec, 0.0);
    return k;
}

const FayTheta& theta0() {
    static const FayTheta k = [] {
        FitResult fit = fit_e(surf(), 0.0, gram0());
        return FayTheta(surf(), 0.0, fit.e);
    }();
    return k;
}

std::vector<cx> random_interior(int n, unsigned seed, double margin = 0.05) {
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

TEST_CASE("harmonic quadrature reproduces harmonic measures") {
    const cx a(0.1, 0.3);
    BoundaryQuadrature q = harmonic_quadrature(kSpec, a);
    double total = 0.0;
    std::array<double, 3> per{0.0, 0.0, 0.0};
    for (size_t i = 0; i < q.w.size(); ++i) {
        total += q.w[i];
        per[q.component[i]] += q.w[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    for (int j = 1; j <= 2; ++j) CHECK(std::abs(per[j] - harmonic_measure(kSpec, j).value(a)) < 1e-10);
}

TEST_CASE("kernel at the base point is one") {
    for (cx zeta : random_interior(10, 1)) CHECK(std::abs(gram0()(zeta, 0.0) - 1.0) < 1e-6);
    for (cx zeta : random_interior(10, 2)) CHECK(std::abs(theta0().front(zeta, 0.0) - 1.0) < 1e-6);
}

TEST_CASE("reproducing property against an independent harmonic measure density") {
    // d omega_0 from finite differences of an independently evaluated Green function.
    SeriesHarmonic u = greens_function(kSpec, 0.0);
    std::function<double(cx)> green = [&](cx z) { return green_value(u, 0.0, z); };
    struct Fn {
        const char* name;
        std::function<cx(cx)> f;
    };
    const std::vector<Fn> fns{
        {"z^3", [](cx z) { return z * z * z; }},
        {"exp", [](cx z) { return std::exp(z); }},
        {"pole in hole 1", [](cx z) { return 0.15 / (z - cx(-0.4, 0.0)); }},
        {"double pole in hole 2", [](cx z) { return 0.01 / ((z - cx(0.45, 0.02)) * (z - cx(0.45, 0.02))); }},
    };
    const std::vector<cx> targets{cx(0.2, 0.3), cx(-0.3, -0.5), cx(0.05, 0.7)};
    for (const Fn& fn : fns) {
        for (cx z : targets) {
            cx total = 0.0;
            for (int c = 0; c < 3; ++c) {
                double r = kSpec.radius(c);
                std::function<cx(double)> integrand = [&](double th) {
                    cx zeta = kSpec.center(c) + std::polar(r, th);
                    return fn.f(zeta) * gram0()(z, zeta) * oracle::harmonic_density(kSpec, green, c, th) * r;
                };
                total += oracle::integrate_c(integrand, 0.0, 2 * pi, 1e-11);
            }
            INFO(fn.name, " at ", z);
            CHECK(std::abs(total - fn.f(z)) < 1e-6);
        }
    }
}

TEST_CASE("Gram matrix is positive semidefinite and Hermitian") {
    Eigen::MatrixXcd K = gram0().gram(random_interior(30, 3));
    CHECK((K - K.adjoint()).norm() < 1e-12 * K.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(K);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
}

TEST_CASE("Gram form is stable in the basis size") {
    FayKernel k32 = fay_kernel_gram(kSpec, 0.0, 32);
    for (auto [zeta, z] : fit_probes(kSpec, 5, true)) CHECK(std::abs(k32(zeta, z) - gram0()(zeta, z)) < 1e-6);
}

TEST_CASE("theta form agrees with the Gram form") {
    double diff = 0.0;
    for (auto [zeta, z] : fit_probes(kSpec, 6, true)) diff = std::max(diff, std::abs(theta0().front(zeta, z) - gram0()(zeta, z)));
    CHECK(diff < 1e-4);
    for (auto [zeta, z] : fit_probes(kSpec, 4, true))
        CHECK(std::abs(theta0().front(zeta, z) - std::conj(theta0().front(z, zeta))) < 1e-6);
}

TEST_CASE("Green critical points for a base point off the axis") {
    const cx a(0.1, 0.3);
    auto pts = green_critical_points_at(kSpec, a);
    REQUIRE(pts.size() == 2);
    SeriesHarmonic u = greens_function(kSpec, a);
    for (cx w : pts) {
        CHECK(contains(kSpec, w).region == Region::interior);
        // Gradient by finite differences of the Green function.
        std::function<double(double)> gx = [&](double h) { return green_value(u, a, w + h); };
        std::function<double(double)> gy = [&](double h) { return green_value(u, a, w + cx(0.0, h)); };
        CHECK(std::abs(oracle::derivative(gx, 0.0, 1e-3)) < 1e-8);
        CHECK(std::abs(oracle::derivative(gy, 0.0, 1e-3)) < 1e-8);
    }
}

TEST_CASE("Green critical points at zero agree with bisection") {
    auto pts = green_critical_points_at(kSpec, 0.0);
    REQUIRE(pts.size() == 2);
    SeriesHarmonic u = greens_function(kSpec, 0.0);
    std::function<double(double)> gx = [&](double x) { return green_dx_on_axis(u, x); };
    const double b1 = oracle::bisect(gx, -1.0 + 1e-9, kSpec.c1 - kSpec.r1 - 1e-9);
    const double b2 = oracle::bisect(gx, kSpec.c2 + kSpec.r2 + 1e-9, 1.0 - 1e-9);
    std::vector<double> xs{pts[0].real(), pts[1].real()};
    std::sort(xs.begin(), xs.end());
    CHECK(std::abs(pts[0].imag()) < 1e-12);
    CHECK(std::abs(xs[0] - b1) < 1e-10);
    CHECK(std::abs(xs[1] - b2) < 1e-10);
}

TEST_CASE("residues by the theta and reflection routes agree") {
    for (cx a : {cx(0.1, 0.3), cx(-0.2, -0.55)}) {
        Residues rt = residues_theta(theta0(), a), rr = residues_reflection(gram0(), a);
        for (int k = 0; k < 2; ++k) CHECK(std::abs(rt.R[k] - rr.R[k]) < 1e-6);
        CHECK(rt.refinement < 1e-8);
    }
}

TEST_CASE("gram construction rejects a degenerate basis") {
    CHECK_THROWS_AS(fay_kernel_gram(kSpec, 0.0, 24, 8), Error);
}
