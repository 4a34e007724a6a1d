#include "tridisk/scalar_inner.hpp"

#include <algorithm>
#include <cmath>

namespace tridisk {

Triple p_of_t(double t1, double t2) {
    return {BoundaryPoint{0, 0.0}, BoundaryPoint{1, kPi + t1}, BoundaryPoint{2, kPi + t2}};
}

HerglotzFn build_f_p(const DomainSpec& spec, const Triple& p, const SolverParams& params) {
    HerglotzFn h;
    h.p = p;
    TauWeights t = tau(spec, p, params);
    h.tau = t.values;
    std::vector<std::pair<double, BoundaryPoint>> terms;
    for (int j = 0; j < 3; ++j) terms.emplace_back(t.values[j], p[j]);
    h.fn = herglotz_completion(spec, terms, 0.0, params);
    h.h0 = h.fn.value(0.0).real();
    h.fn *= 1.0 / h.h0;
    h.fn.constant += 1.0 - h.fn.value(0.0);
    return h;
}

cx InnerEvaluator::phi(cx z) const {
    cx fz = f.value(z);
    if (!std::isfinite(std::abs(fz))) return 1.0;
    return (fz - 1.0) / (fz + 1.0);
}

cx InnerEvaluator::phi_deriv(cx z) const {
    cx fz = f.value(z);
    cx d = fz + 1.0;
    return 2.0 * f.deriv(z) / (d * d);
}

InnerEvaluator build_phi_p(const DomainSpec& spec, const Triple& p, const SolverParams& params,
                           const ZeroSearchOptions& zopt) {
    InnerEvaluator e;
    e.spec = spec;
    e.f = build_f_p(spec, p, params);
    const InnerEvaluator* self = &e;
    // f + 1 never vanishes in R, so zeros of phi are zeros of f - 1; use phi directly for conditioning.
    auto res = zeros_in_R(
        spec, [self](cx z) { return self->phi(z); }, [self](cx z) { return self->phi_deriv(z); }, std::nullopt,
        zopt);
    e.zeros = res.zeros;
    e.multiplicity = res.multiplicity;
    e.winding = res.winding;
    // Pin the zero at the origin exactly when it was found there.
    for (auto& z : e.zeros)
        if (std::abs(z) < 1e-10) z = 0.0;
    return e;
}

InnerEvaluator psi_t(const DomainSpec& spec, double t1, double t2, const SolverParams& params) {
    return build_phi_p(spec, p_of_t(t1, t2), params);
}

std::vector<std::pair<double, double>> default_t_grid() {
    std::vector<std::pair<double, double>> g;
    for (double t2 : {0.0, kPi / 16})
        for (double t1 : {kPi / 8, kPi / 4, 3 * kPi / 8}) g.emplace_back(t1, t2);
    return g;
}

bool nonreal_distinct(const std::vector<cx>& zeros, double eps_sep, std::string* why) {
    auto fail = [&](const std::string& s) {
        if (why) *why = s;
        return false;
    };
    if (zeros.size() != 3) return fail("zero count " + std::to_string(zeros.size()));
    int at0 = 0;
    for (cx z : zeros)
        if (std::abs(z) < eps_sep) ++at0;
    if (at0 != 1) return fail("origin is not a simple zero");
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = i + 1; j < 3; ++j)
            if (std::abs(zeros[i] - zeros[j]) < eps_sep) return fail("repeated zero");
    for (cx z : zeros)
        if (std::abs(z) >= eps_sep && std::abs(z.imag()) <= eps_sep) return fail("real zero");
    return true;
}

NonrealT find_nonreal_t(const DomainSpec& spec, const std::vector<std::pair<double, double>>& candidates,
                        const SolverParams& params) {
    NonrealT out;
    auto grid = candidates.empty() ? default_t_grid() : candidates;
    for (auto [t1, t2] : grid) {
        ScanEntry e{t1, t2, false, "", {}};
        try {
            InnerEvaluator psi = psi_t(spec, t1, t2, params);
            e.zeros = psi.zeros;
            std::string why;
            if (!nonreal_distinct(psi.zeros, kEpsSep, &why)) {
                e.reason = why;
            } else if (std::abs(t2) < 1e-12) {
                e.reason = "t2 = 0 leaves q2 real";
            } else {
                InnerEvaluator refl = psi_t(spec, t1, -t2, params);
                if (!nonreal_distinct(refl.zeros, kEpsSep, &why)) {
                    e.reason = "reflected parameter: " + why;
                } else {
                    e.accepted = true;
                }
            }
        } catch (const Error& err) {
            e.reason = err.code();
        }
        out.scan.push_back(e);
        if (e.accepted) {
            out.t1 = t1;
            out.t2 = t2;
            std::vector<cx> z = e.zeros;
            std::sort(z.begin(), z.end(), [](cx a, cx b) { return std::abs(a) < std::abs(b); });
            if (z[1].imag() < 0) std::swap(z[1], z[2]);
            out.zeros = z;
            return out;
        }
    }
    throw Error("search-failed", "no parameter in the scan gives distinct nonreal zeros");
}

double herglotz_identity_residual(const InnerEvaluator& psi, cx z, cx w) {
    cx fz = psi.f.value(z), fw = std::conj(psi.f.value(w));
    cx lhs = 1.0 - psi.phi(z) * std::conj(psi.phi(w));
    cx rhs = 2.0 * (fz + fw) / ((fz + 1.0) * (fw + 1.0));
    return std::abs(lhs - rhs);
}

cx boundary_limit(const DomainSpec& spec, const BoundaryPoint& q, double delta, const std::function<cx(cx)>& F) {
    cx z = point(spec, q);
    cx n = outward_normal(spec, q);
    return 3.0 * F(z - delta * n) - 3.0 * F(z - 2.0 * delta * n) + F(z - 3.0 * delta * n);
}

double boundary_unimodularity_residual(const InnerEvaluator& psi, int n_per_circle, double delta) {
    double worst = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int m = 0; m < n_per_circle; ++m) {
            BoundaryPoint q{c, 2.0 * kPi * (m + 0.5) / n_per_circle};
            cx v = boundary_limit(psi.spec, q, delta, [&](cx z) { return psi.phi(z); });
            worst = std::max(worst, std::abs(std::abs(v) - 1.0));
        }
    return worst;
}

std::array<double, 2> h_sum_residuals(const DomainSpec& spec, const std::vector<cx>& zeros,
                                      const SolverParams& params) {
    std::array<double, 2> r{};
    for (int j = 1; j <= 2; ++j) {
        const SeriesHarmonic& h = harmonic_measure(spec, j, params);
        double s = 0.0;
        for (cx z : zeros) s += h.value(z);
        r[j - 1] = s - 1.0;
    }
    return r;
}

}  // namespace tridisk
