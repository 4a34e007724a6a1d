#pragma once

#include <array>
#include <string>
#include <vector>

#include "tridisk/common.hpp"

namespace tridisk {

constexpr double kEpsGeo = 1e-12;
constexpr double kMinSeparation = 1e-3;

// Unit disk minus the closed disks |z - c1| <= r1 and |z - c2| <= r2.
struct DomainSpec {
    double c1 = -0.4;
    double r1 = 0.15;
    double c2 = 0.45;
    double r2 = 0.15;

    // Component 0 is the unit circle.
    double center(int k) const { return k == 0 ? 0.0 : (k == 1 ? c1 : c2); }
    double radius(int k) const { return k == 0 ? 1.0 : (k == 1 ? r1 : r2); }
    double circumference(int k) const { return 2.0 * kPi * radius(k); }
    // Total length of the boundary; normalized arc length is ds / total_length().
    double total_length() const { return 2.0 * kPi * (1.0 + r1 + r2); }
};

// Every violated invariant, empty when valid.
std::vector<std::string> validate(const DomainSpec& spec);
void require_valid(const DomainSpec& spec);

enum class Region { interior, boundary, exterior };

struct Classification {
    Region region;
    int component;  // meaningful for boundary only, -1 otherwise
};

Classification contains(const DomainSpec& spec, cx z, double eps = kEpsGeo);

struct BoundaryPoint {
    int component = 0;
    double angle = 0.0;
};

cx point(const DomainSpec& spec, const BoundaryPoint& q);
// Outward normal of R: away from the origin on the unit circle, into the hole on inner circles.
cx outward_normal(const DomainSpec& spec, const BoundaryPoint& q);
// Conjugate boundary point (reflection in the real axis).
BoundaryPoint conj(const BoundaryPoint& q);

enum class Sheet { front, back };

struct DoublePoint {
    cx base;
    Sheet sheet = Sheet::front;
};

bool on_boundary(const DomainSpec& spec, cx z, double eps = kEpsGeo);
// Sheet swap; points of B are fixed.
DoublePoint reflect_J(const DomainSpec& spec, const DoublePoint& p);
// iota(p) = J(conj(p)).
DoublePoint involution_iota(const DomainSpec& spec, const DoublePoint& p);
bool same_point(const DomainSpec& spec, const DoublePoint& a, const DoublePoint& b,
                double tol = 1e-12);
// Planar chart of the back sheet obtained by inversion in the unit circle.
cx back_chart(cx base);
cx from_back_chart(cx w);

// Distance from z to the nearest boundary circle.
double boundary_distance(const DomainSpec& spec, cx z);

}  // namespace tridisk
