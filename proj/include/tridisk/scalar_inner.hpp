#pragma once

#include <array>
#include <string>
#include <vector>

#include "tridisk/laplace.hpp"
#include "tridisk/zeros.hpp"

namespace tridisk {

constexpr double kEpsInner = 1e-6;
constexpr double kEpsSep = 1e-3;

using Triple = std::array<BoundaryPoint, 3>;

// p(t) = (1, c1 - r1 e^{i t1}, c2 - r2 e^{i t2}).
Triple p_of_t(double t1, double t2);

// Extreme point f_p of the normalized Herglotz cone: analytic, Re f > 0, f(0) = 1.
class HerglotzFn {
public:
    Triple p;
    std::array<double, 3> tau{};
    double h0 = 1.0;  // sum tau_j P(p_j, 0) before rescaling
    AnalyticFn fn;

    cx value(cx z) const { return fn.value(z); }
    cx deriv(cx z) const { return fn.deriv(z); }
};

HerglotzFn build_f_p(const DomainSpec& spec, const Triple& p, const SolverParams& params = {});

class InnerEvaluator {
public:
    DomainSpec spec;
    HerglotzFn f;
    std::vector<cx> zeros;       // with multiplicity
    std::vector<int> multiplicity;
    int winding = 0;

    cx phi(cx z) const;
    cx phi_deriv(cx z) const;
    cx f_value(cx z) const { return f.value(z); }
};

InnerEvaluator build_phi_p(const DomainSpec& spec, const Triple& p, const SolverParams& params = {},
                           const ZeroSearchOptions& zopt = {});
InnerEvaluator psi_t(const DomainSpec& spec, double t1, double t2, const SolverParams& params = {});

struct ScanEntry {
    double t1, t2;
    bool accepted;
    std::string reason;
    std::vector<cx> zeros;
};

struct NonrealT {
    double t1 = 0.0, t2 = 0.0;
    std::vector<cx> zeros;  // {0, z1, z2}, Im z1 > 0
    std::vector<ScanEntry> scan;
};

// Zeros are acceptable when they are {0, z1, z2}, distinct and with z1, z2 off the real axis by eps_sep.
bool nonreal_distinct(const std::vector<cx>& zeros, double eps_sep = kEpsSep, std::string* why = nullptr);

// Deterministic scan. Candidates with t2 = 0 are rejected: the matrix family built on top of psi_t
// needs q2 off the real axis. The reflected parameter (t1, -t2) must also give nonreal distinct zeros.
NonrealT find_nonreal_t(const DomainSpec& spec, const std::vector<std::pair<double, double>>& candidates = {},
                        const SolverParams& params = {});
std::vector<std::pair<double, double>> default_t_grid();

double herglotz_identity_residual(const InnerEvaluator& psi, cx z, cx w);

// Quadratic extrapolation to a boundary point from samples at distances d, 2d, 3d along the inward normal.
cx boundary_limit(const DomainSpec& spec, const BoundaryPoint& q, double delta, const std::function<cx(cx)>& F);

// max | |phi| - 1 | over n points per circle, boundary-limit sampled at offset delta.
double boundary_unimodularity_residual(const InnerEvaluator& psi, int n_per_circle = 240, double delta = 1e-3);

// sum_l h_j(z_l) - 1 for j = 1, 2.
std::array<double, 2> h_sum_residuals(const DomainSpec& spec, const std::vector<cx>& zeros,
                                      const SolverParams& params = {});

}  // namespace tridisk
