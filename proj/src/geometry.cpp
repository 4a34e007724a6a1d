#include "tridisk/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tridisk {

std::vector<std::string> validate(const DomainSpec& s) {
    std::vector<std::string> out;
    auto fin = [](double v) { return std::isfinite(v); };
    if (!fin(s.c1) || !fin(s.r1) || !fin(s.c2) || !fin(s.r2)) {
        out.push_back("all parameters must be finite");
        return out;
    }
    if (!(s.c1 > -1.0 && s.c1 < 0.0)) out.push_back("c1 must lie in (-1, 0)");
    if (!(s.c2 > 0.0 && s.c2 < 1.0)) out.push_back("c2 must lie in (0, 1)");
    if (!(s.r1 > 0.0)) out.push_back("r1 must be positive");
    if (!(s.r2 > 0.0)) out.push_back("r2 must be positive");
    double a1 = std::abs(s.c1);
    if (!(s.r1 < std::min(a1, 1.0 - a1))) out.push_back("r1 must be below min(|c1|, 1-|c1|)");
    if (!(s.r2 < std::min(s.c2, 1.0 - s.c2))) out.push_back("r2 must be below min(c2, 1-c2)");
    if (out.empty()) {
        double gap_holes = (s.c2 - s.r2) - (s.c1 + s.r1);
        double gap_left = (s.c1 - s.r1) + 1.0;
        double gap_right = 1.0 - (s.c2 + s.r2);
        double sep = std::min({gap_holes, gap_left, gap_right});
        if (sep < kMinSeparation) {
            std::ostringstream os;
            os << "circle separation " << sep << " below " << kMinSeparation;
            out.push_back(os.str());
        }
    }
    return out;
}

void require_valid(const DomainSpec& spec) {
    auto v = validate(spec);
    if (v.empty()) return;
    std::string msg;
    for (auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    throw Error("invalid-config", msg);
}

Classification contains(const DomainSpec& spec, cx z, double eps) {
    double d0 = std::abs(z) - 1.0;
    if (std::abs(d0) <= eps) return {Region::boundary, 0};
    for (int k = 1; k <= 2; ++k) {
        double dk = std::abs(z - spec.center(k)) - spec.radius(k);
        if (std::abs(dk) <= eps * std::max(1.0, spec.radius(k))) return {Region::boundary, k};
    }
    if (d0 > 0) return {Region::exterior, -1};
    for (int k = 1; k <= 2; ++k)
        if (std::abs(z - spec.center(k)) < spec.radius(k)) return {Region::exterior, -1};
    return {Region::interior, -1};
}

cx point(const DomainSpec& spec, const BoundaryPoint& q) {
    return spec.center(q.component) + spec.radius(q.component) * std::polar(1.0, q.angle);
}

cx outward_normal(const DomainSpec&, const BoundaryPoint& q) {
    cx u = std::polar(1.0, q.angle);
    return q.component == 0 ? u : -u;
}

BoundaryPoint conj(const BoundaryPoint& q) {
    double a = std::fmod(2.0 * kPi - q.angle, 2.0 * kPi);
    if (a < 0) a += 2.0 * kPi;
    return {q.component, a};
}

bool on_boundary(const DomainSpec& spec, cx z, double eps) {
    return contains(spec, z, eps).region == Region::boundary;
}

DoublePoint reflect_J(const DomainSpec& spec, const DoublePoint& p) {
    if (on_boundary(spec, p.base)) return p;
    return {p.base, p.sheet == Sheet::front ? Sheet::back : Sheet::front};
}

DoublePoint involution_iota(const DomainSpec& spec, const DoublePoint& p) {
    return reflect_J(spec, {std::conj(p.base), p.sheet});
}

bool same_point(const DomainSpec& spec, const DoublePoint& a, const DoublePoint& b, double tol) {
    if (std::abs(a.base - b.base) > tol) return false;
    if (on_boundary(spec, a.base)) return true;
    return a.sheet == b.sheet;
}

cx back_chart(cx base) { return 1.0 / std::conj(base); }
cx from_back_chart(cx w) { return 1.0 / std::conj(w); }

double boundary_distance(const DomainSpec& spec, cx z) {
    double d = std::abs(1.0 - std::abs(z));
    for (int k = 1; k <= 2; ++k)
        d = std::min(d, std::abs(std::abs(z - spec.center(k)) - spec.radius(k)));
    return d;
}

}  // namespace tridisk
