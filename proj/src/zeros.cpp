#include "tridisk/zeros.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace tridisk {

namespace {

struct Circle {
    cx center;
    double radius;
    double orient;  // +1 counterclockwise, -1 clockwise
};

std::vector<Circle> collar_circles(const DomainSpec& spec, double collar) {
    return {{0.0, 1.0 - collar, 1.0}, {spec.c1, spec.r1 + collar, -1.0}, {spec.c2, spec.r2 + collar, -1.0}};
}

}  // namespace

std::vector<cx> contour_moments(const DomainSpec& spec, const CFun& f, const CFun& df, double collar, int nodes,
                                int kmax) {
    std::vector<cx> s(kmax + 1, cx{0.0, 0.0});
    for (const auto& c : collar_circles(spec, collar)) {
        for (int m = 0; m < nodes; ++m) {
            double th = 2.0 * kPi * m / nodes;
            cx e = std::polar(1.0, th);
            cx z = c.center + c.radius * e;
            // dz / (2 pi i) = orient * radius * e * dtheta / (2 pi)
            cx w = c.orient * c.radius * e / double(nodes);
            cx g = df(z) / f(z) * w;
            cx zk{1.0, 0.0};
            for (int k = 0; k <= kmax; ++k) {
                s[k] += g * zk;
                zk *= z;
            }
        }
    }
    return s;
}

int winding_count(const DomainSpec& spec, const CFun& f, double collar, int nodes, double* min_rel_abs) {
    double total = 0.0;
    double fmin = INFINITY, fmax = 0.0;
    for (const auto& c : collar_circles(spec, collar)) {
        cx prev = f(c.center + c.radius);
        cx first = prev;
        double turn = 0.0;
        for (int m = 1; m <= nodes; ++m) {
            cx cur = m == nodes ? first : f(c.center + c.radius * std::polar(1.0, 2.0 * kPi * m / nodes));
            fmin = std::min(fmin, std::abs(cur));
            fmax = std::max(fmax, std::abs(cur));
            turn += std::arg(cur / prev);
            prev = cur;
        }
        total += c.orient * turn;
    }
    if (min_rel_abs) *min_rel_abs = fmax > 0 ? fmin / fmax : 0.0;
    return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

std::vector<cx> roots_from_power_sums(const std::vector<cx>& p) {
    int m = static_cast<int>(p.size());
    if (m == 0) return {};
    std::vector<cx> e(m + 1, cx{0.0, 0.0});
    e[0] = 1.0;
    for (int k = 1; k <= m; ++k) {
        cx acc{0.0, 0.0};
        for (int i = 1; i <= k; ++i) acc += (i % 2 == 1 ? 1.0 : -1.0) * e[k - i] * p[i - 1];
        e[k] = acc / double(k);
    }
    // z^m - e1 z^{m-1} + e2 z^{m-2} - ...
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(m, m);
    for (int i = 1; i < m; ++i) C(i, i - 1) = 1.0;
    for (int k = 1; k <= m; ++k) C(m - k, m - 1) = (k % 2 == 1 ? 1.0 : -1.0) * e[k];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C);
    std::vector<cx> r(es.eigenvalues().data(), es.eigenvalues().data() + m);
    return r;
}

ZeroResult zeros_in_R(const DomainSpec& spec, const CFun& f, const CFun& df, std::optional<int> expected,
                      const ZeroSearchOptions& opt) {
    double collar = opt.collar;
    for (int attempt = 0; attempt <= opt.retries; ++attempt, collar *= 1.37) {
        double rel = 0.0;
        int wind = winding_count(spec, f, collar, 4 * opt.nodes, &rel);
        if (rel < opt.eps_contour) continue;

        int kmax = std::max(wind, 1);
        int n = opt.nodes;
        std::vector<cx> s = contour_moments(spec, f, df, collar, n, kmax);
        while (n < opt.max_nodes) {
            std::vector<cx> s2 = contour_moments(spec, f, df, collar, 2 * n, kmax);
            double diff = 0.0, mag = 1.0;
            for (int k = 0; k <= kmax; ++k) {
                diff = std::max(diff, std::abs(s2[k] - s[k]));
                mag = std::max(mag, std::abs(s2[k]));
            }
            s = s2;
            n *= 2;
            if (diff <= opt.moment_tol * mag) break;
        }

        ZeroResult res;
        res.winding = wind;
        res.moment_count = s[0].real();
        res.collar = collar;
        res.nodes = n;
        int count = static_cast<int>(std::lround(s[0].real()));
        if (count != wind) continue;  // unresolved contour, retry with a new collar
        if (expected && count != *expected)
            throw Error("count-mismatch",
                        "expected " + std::to_string(*expected) + " zeros, found " + std::to_string(count));
        if (count <= 0) return res;

        std::vector<cx> p(s.begin() + 1, s.begin() + 1 + count);
        std::vector<cx> raw = roots_from_power_sums(p);
        std::sort(raw.begin(), raw.end(), [](cx a, cx b) {
            return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
        });

        // Cluster near-coincident roots, then polish each cluster with multiplicity-aware Newton.
        std::vector<bool> used(raw.size(), false);
        for (size_t i = 0; i < raw.size(); ++i) {
            if (used[i]) continue;
            cx c = raw[i];
            int mult = 1;
            used[i] = true;
            for (size_t j = i + 1; j < raw.size(); ++j)
                if (!used[j] && std::abs(raw[j] - raw[i]) < opt.cluster_tol) {
                    c += raw[j];
                    ++mult;
                    used[j] = true;
                }
            c /= double(mult);
            for (int it = 0; it < 60; ++it) {
                cx fv = f(c);
                if (fv == cx{0.0, 0.0}) break;
                cx step = double(mult) * fv / df(c);
                if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
                c -= step;
                if (std::abs(step) < opt.newton_tol) break;
            }
            res.distinct.push_back(c);
            res.multiplicity.push_back(mult);
            for (int k = 0; k < mult; ++k) res.zeros.push_back(c);
        }
        return res;
    }
    throw Error("contour-zero", "function vanishes near every collar contour tried");
}

}  // namespace tridisk
