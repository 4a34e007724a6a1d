#include "oracles.hpp"

#include <cmath>
#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

using tridisk::kPi;

namespace {

// Distance to the boundary and the nearest component.
std::pair<double, int> nearest(const DomainSpec& s, cx z) {
    double d0 = 1.0 - std::abs(z);
    double d1 = std::abs(z - s.c1) - s.r1;
    double d2 = std::abs(z - s.c2) - s.r2;
    if (d0 <= d1 && d0 <= d2) return {d0, 0};
    return d1 <= d2 ? std::pair{d1, 1} : std::pair{d2, 2};
}

}  // namespace

McEstimate walk_on_spheres(const DomainSpec& spec, cx z, int component, int walks, std::uint64_t seed, double eps) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * kPi);
    long hits = 0;
    for (int w = 0; w < walks; ++w) {
        cx x = z;
        while (true) {
            auto [d, c] = nearest(spec, x);
            if (d < eps) {
                hits += (c == component);
                break;
            }
            x += std::polar(d, angle(rng));
        }
    }
    double p = static_cast<double>(hits) / walks;
    return {p, std::sqrt(p * (1.0 - p) / walks)};
}

std::vector<double> shortley_weller(const DomainSpec& spec, int component, double h, const std::vector<cx>& probes) {
    const int n = static_cast<int>(std::ceil(2.0 / h)) + 1;
    auto coord = [&](int i) { return -1.0 + i * h; };
    auto inside = [&](double x, double y) { return nearest(spec, cx(x, y)).first > 0.0; };
    std::vector<int> id(n * n, -1);
    int m = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (inside(coord(i), coord(j))) id[i * n + j] = m++;
    // Distance from p along unit direction u to the first circle crossing, with the circle's component.
    auto crossing = [&](cx p, cx u) {
        double best = INFINITY;
        int comp = -1;
        for (int c = 0; c < 3; ++c) {
            cx q = p - spec.center(c);
            double b = (std::conj(u) * q).real(), cc = std::norm(q) - spec.radius(c) * spec.radius(c);
            double disc = b * b - cc;
            if (disc < 0.0) continue;
            for (double t : {-b - std::sqrt(disc), -b + std::sqrt(disc)})
                if (t > 1e-14 && t < best) best = t, comp = c;
        }
        return std::pair{best, comp};
    };
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    const cx dirs[4] = {cx(1, 0), cx(-1, 0), cx(0, 1), cx(0, -1)};
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int k = id[i * n + j];
            if (k < 0) continue;
            cx p(coord(i), coord(j));
            double arm[4];
            int nb[4];
            double val[4];
            for (int d = 0; d < 4; ++d) {
                int ii = i + di[d], jj = j + dj[d];
                nb[d] = (ii >= 0 && ii < n && jj >= 0 && jj < n) ? id[ii * n + jj] : -1;
                auto [t, c] = crossing(p, dirs[d]);
                if (nb[d] >= 0 && t >= h) {
                    arm[d] = h;
                    val[d] = 0.0;
                } else {
                    arm[d] = std::min(t, h);
                    nb[d] = -1;
                    val[d] = c == component ? 1.0 : 0.0;
                }
            }
            // Axis pairs (0, 1) in x and (2, 3) in y.
            double diag = 0.0;
            for (int a = 0; a < 4; a += 2) {
                double hl = arm[a + 1], hr = arm[a];
                double cr = 2.0 / (hr * (hl + hr)), cl = 2.0 / (hl * (hl + hr));
                diag += cr + cl;
                for (auto [d, cf] : {std::pair{a, cr}, std::pair{a + 1, cl}}) {
                    if (nb[d] >= 0)
                        trip.emplace_back(k, nb[d], -cf);
                    else
                        rhs(k) += cf * val[d];
                }
            }
            trip.emplace_back(k, k, diag);
        }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    Eigen::VectorXd u = lu.solve(rhs);
    std::vector<double> out;
    for (cx z : probes) {
        int i = static_cast<int>(std::floor((z.real() + 1.0) / h)), j = static_cast<int>(std::floor((z.imag() + 1.0) / h));
        double fx = (z.real() - coord(i)) / h, fy = (z.imag() - coord(j)) / h;
        auto at = [&](int a, int b) { return u(id[a * n + b]); };
        out.push_back((1 - fx) * (1 - fy) * at(i, j) + fx * (1 - fy) * at(i + 1, j) + (1 - fx) * fy * at(i, j + 1) +
                      fx * fy * at(i + 1, j + 1));
    }
    return out;
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

cx integrate_c(const std::function<cx(double)>& f, double a, double b, double tol) {
    double re = integrate([&](double x) { return f(x).real(); }, a, b, tol);
    double im = integrate([&](double x) { return f(x).imag(); }, a, b, tol);
    return {re, im};
}

double bisect(const std::function<double(double)>& f, double a, double b, double tol) {
    double fa = f(a);
    for (int k = 0; k < 200 && b - a > tol; ++k) {
        double m = 0.5 * (a + b), fm = f(m);
        if ((fm < 0.0) == (fa < 0.0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

double derivative(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

double harmonic_density(const DomainSpec& spec, const std::function<double(cx)>& green, int component, double angle) {
    cx u = std::polar(1.0, angle);
    cx q = spec.center(component) + spec.radius(component) * u;
    cx inward = component == 0 ? -u : u;
    // g vanishes on the boundary: dg/dn_in = lim g(q + d n_in) / d. Quartic one-sided fit from four samples.
    const double d = 2e-3;
    double g1 = green(q + d * inward), g2 = green(q + 2 * d * inward), g3 = green(q + 3 * d * inward),
           g4 = green(q + 4 * d * inward);
    double slope = (48 * g1 - 36 * g2 + 16 * g3 - 3 * g4) / (12 * d);
    return slope / (2 * kPi);
}

int argument_count(const std::function<cx(cx)>& f, cx c, double r, int n) {
    double total = 0.0;
    cx prev = f(c + r);
    for (int k = 1; k <= n; ++k) {
        cx cur = f(c + std::polar(r, 2 * kPi * k / n));
        total += std::arg(cur / prev);
        prev = cur;
    }
    return static_cast<int>(std::lround(total / (2 * kPi)));
}

}  // namespace oracle
