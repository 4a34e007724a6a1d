#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tridisk/laplace.hpp"

namespace tridisk {

using cx2 = Eigen::Vector2cd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// P_{jl} = flux of h_j through B_l (physical arc length, outward normal). The Abel-Jacobi map
// chi = (1/2) int d(h + i h~) has lattice Z^2 + i T Z^2 with T = P / 2; all theta functions use T.
struct PeriodMatrix {
    Mat2 P;
    Mat2 T;
    double asymmetry = 0.0;
    double lambda_min = 0.0;
};

PeriodMatrix period_matrix(const DomainSpec& spec, const SolverParams& params = {});

struct HalfPeriod {
    Vec2 u;  // integer entries
    Vec2 v;
    cx2 e;   // (u + i T v) / 2
};

class ThetaContext {
public:
    explicit ThetaContext(const Mat2& T, double tail = 1e-16);

    const Mat2& T() const { return T_; }
    int radius() const { return radius_; }

    cx theta(const cx2& z) const;
    // theta and its gradient.
    cx theta(const cx2& z, cx2* grad) const;
    // log theta(z); avoids overflow for arguments far from the fundamental domain.
    cx log_theta(const cx2& z) const;
    // Direct truncated sum without reduction, used as an oracle.
    cx theta_direct(const cx2& z, int radius) const;
    // |theta(z)| exp(-pi <T^{-1} Im z, Im z>), invariant under lattice translation.
    double theta_norm(const cx2& z) const;

    // e = u + i T v.
    void decompose(const cx2& e, Vec2* u, Vec2* v) const;
    cx theta_char(const cx2& e, const cx2& z) const;
    cx theta_char(const cx2& e, const cx2& z, cx2* grad) const;

    // Reduce z modulo the lattice: z = zr + l + i T m.
    cx2 reduce(const cx2& z, Vec2* l = nullptr, Vec2* m = nullptr) const;
    // Distance of z to the lattice in the coordinates (Re, T^{-1} Im), rounded components.
    double lattice_distance(const cx2& z) const;

    std::optional<HalfPeriod> estar;

private:
    Mat2 T_;
    Mat2 Tinv_;
    int radius_;
    cx sum_reduced(const cx2& z, cx2* grad) const;
};

std::vector<HalfPeriod> odd_half_periods(const Mat2& T);

class AbelJacobi;

// First odd half period with theta(e) = 0 and theta(chi(.) - e) not identically zero on a probe grid.
HalfPeriod find_odd_half_period(ThetaContext& ctx, const AbelJacobi& aj);

// chi(p) = (1/2) int_{-1}^{p} d(h_j + i h~_j), j = 1, 2.
class AbelJacobi {
public:
    AbelJacobi(const DomainSpec& spec, const SolverParams& params = {});

    const DomainSpec& spec() const { return spec_; }

    // Default path in the cut domain; front sheet only.
    std::vector<cx> default_path(cx z) const;
    cx2 operator()(const DoublePoint& p) const;
    cx2 front(cx z) const { return (*this)(DoublePoint{z, Sheet::front}); }
    // Explicit polyline starting at -1; segments must stay in the closure of R. Throws "path-invalid".
    cx2 along(const std::vector<cx>& path) const;
    // d chi / dz on the front sheet.
    cx2 differential(cx z) const;

    bool segment_in_domain(cx a, cx b) const;
    bool segment_in_cut_domain(cx a, cx b) const;

private:
    DomainSpec spec_;
    std::array<SeriesHarmonic, 2> h_;
    std::vector<cx> anchors_;
    std::vector<std::vector<int>> adj_;
    std::vector<int> parent_;
    cx2 segment_increment(cx u, cx v) const;
};

// theta(chi(zeta) - chi(z) - e*) / theta(chi(zeta) - chi(w) - e*), front-sheet arguments.
cx prime_ratio(const ThetaContext& ctx, const AbelJacobi& aj, cx zeta, cx z, cx w);

// Boundary point P != -1 with theta(chi(P) - e*) = 0, located by a scan along B and refinement.
struct BoundaryZero {
    BoundaryPoint q;
    cx point;
    double residual;
};
BoundaryZero theta_boundary_zero(const ThetaContext& ctx, const AbelJacobi& aj);

// Period matrix, theta context with e* fixed, Abel-Jacobi map and Green critical points of a spec.
struct Surface {
    Surface(const DomainSpec& spec, const SolverParams& params);
    DomainSpec spec;
    SolverParams params;
    PeriodMatrix pm;
    ThetaContext ctx;
    AbelJacobi aj;
    CriticalPoints w;
};

std::shared_ptr<const Surface> get_surface(const DomainSpec& spec, const SolverParams& params = {});

}  // namespace tridisk
