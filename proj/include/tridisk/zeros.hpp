#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tridisk/geometry.hpp"

namespace tridisk {

using CFun = std::function<cx(cx)>;

struct ZeroSearchOptions {
    double collar = 1e-3;       // contour offset inside R
    int nodes = 1024;           // initial trapezoid nodes per circle
    int max_nodes = 1 << 15;
    double moment_tol = 1e-9;
    double newton_tol = 1e-12;
    double eps_contour = 1e-10; // relative |f| threshold on the contour
    int retries = 3;
    double cluster_tol = 1e-4;  // roots closer than this are merged into one multiple root
};

struct ZeroResult {
    std::vector<cx> zeros;          // with multiplicity, polished
    std::vector<int> multiplicity;  // per distinct zero
    std::vector<cx> distinct;
    int winding = 0;                // phase-tracking count
    double moment_count = 0.0;      // (1/2 pi i) contour integral of f'/f
    double collar = 0.0;            // collar actually used
    int nodes = 0;
};

// Trapezoid approximations of (1/2 pi i) oint z^k f'/f dz over the collar contour, k = 0..kmax.
std::vector<cx> contour_moments(const DomainSpec& spec, const CFun& f, const CFun& df, double collar, int nodes,
                                int kmax);
// Winding count of f around the collar contour by phase tracking.
int winding_count(const DomainSpec& spec, const CFun& f, double collar, int nodes, double* min_rel_abs = nullptr);

// Zeros of f in R. Errors: "contour-zero", "count-mismatch".
ZeroResult zeros_in_R(const DomainSpec& spec, const CFun& f, const CFun& df, std::optional<int> expected = std::nullopt,
                      const ZeroSearchOptions& opt = {});

// Roots of the monic polynomial with the given power sums p_1..p_m.
std::vector<cx> roots_from_power_sums(const std::vector<cx>& p);

}  // namespace tridisk
