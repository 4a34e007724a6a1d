#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tridisk/theta.hpp"

namespace tridisk {

constexpr double kEpsFay = 1e-6;

// Boundary nodes with harmonic-measure weights for a point a and positively oriented dz.
struct BoundaryQuadrature {
    std::vector<cx> z;
    std::vector<double> w;  // d omega_a
    std::vector<cx> dz;     // outer circle counterclockwise, holes clockwise
    std::vector<int> component;
};

BoundaryQuadrature harmonic_quadrature(const DomainSpec& spec, cx a, int nodes_per_circle = 512,
                                       const SolverParams& params = {});

// Basis 1, z^n, (r1/(z-c1))^n, (r2/(z-c2))^n for n = 1..basis_size, in this order.
Eigen::VectorXcd fay_basis(const DomainSpec& spec, int basis_size, cx z);

// Reproducing kernel of the Hardy space over omega_a by Gram orthonormalization.
class FayKernel {
public:
    DomainSpec spec;
    cx a;
    int basis_size = 0;
    double min_pivot_ratio = 0.0;
    Eigen::MatrixXcd C;  // orthonormal functions e(z)^T = b(z)^T C
    Eigen::MatrixXcd G;  // C C^*
    BoundaryQuadrature quad;

    Eigen::VectorXcd basis(cx z) const { return fay_basis(spec, basis_size, z); }
    cx operator()(cx zeta, cx z) const;
    // Gram matrix (K(z_i, z_j)).
    Eigen::MatrixXcd gram(const std::vector<cx>& pts) const;
};

// Errors: "gram-singular".
FayKernel fay_kernel_gram(const DomainSpec& spec, cx a, int basis_size = 24, int nodes_per_circle = 512,
                          const SolverParams& params = {});

// Critical points of g(., a), located as zeros of (z - a) dg/dz.
std::vector<cx> green_critical_points_at(const DomainSpec& spec, cx a, const SolverParams& params = {});

// Four-theta form of K^a on the double.
class FayTheta {
public:
    FayTheta(std::shared_ptr<const Surface> surface, cx a, const cx2& e);

    const Surface& surface() const { return *s_; }
    cx a() const { return a_; }
    const cx2& e() const { return e_; }

    // Abel-Jacobi image of a point of the double.
    cx2 chi(const DoublePoint& p) const { return s_->aj(p); }
    cx operator()(const DoublePoint& zeta, const DoublePoint& z) const;
    cx front(cx zeta, cx z) const { return (*this)(DoublePoint{zeta, Sheet::front}, DoublePoint{z, Sheet::front}); }
    // Kernel from chi(zeta) and chi(z)^*; optional gradient with respect to e. Errors: "theta-zero-hit".
    cx from_chi(const cx2& chi_zeta, const cx2& chi_z_conj, cx2* grad_e = nullptr) const;

private:
    std::shared_ptr<const Surface> s_;
    cx a_;
    cx2 e_;
    cx2 chia_;
    cx log_theta_star(const cx2& z) const;
};

struct FitOptions {
    int grid = 10;
    int max_iter = 60;
    double tol = 1e-3;  // rms mismatch above this is a failure
};

struct FitResult {
    cx2 e;
    double train_rms = 0.0;
    double train_max = 0.0;
    double holdout_max = 0.0;
    int iterations = 0;
    std::vector<cx2> candidates;  // pole-condition solutions, reduced mod L
};

// Probe pairs for fitting: a grid x grid set of (zeta, z) pairs on the front sheet.
std::vector<std::pair<cx, cx>> fit_probes(const DomainSpec& spec, int grid, bool holdout);

// Solutions of theta(chi(P_k(a)) + chi(a)^* + e) = 0, k = 1, 2, from a fixed grid of seeds.
std::vector<cx2> pole_condition_solutions(const Surface& s, cx a, const std::vector<cx>& crit);

// Gauss-Newton refinement of e against the Gram form from a given seed.
FitResult refine_e(std::shared_ptr<const Surface> s, cx a, const FayKernel& gram, const cx2& seed,
                   const FitOptions& opt = {});
// Errors: "fit-failed".
FitResult fit_e(std::shared_ptr<const Surface> s, cx a, const FayKernel& gram, const FitOptions& opt = {});

// Residues R_1(a), R_2(a) of zeta -> K^0(zeta, a) at P_k = J w_k, in the back-sheet chart 1/conj(zeta).
struct Residues {
    std::array<cx, 2> R{};
    double refinement = 0.0;  // change when the contour radius is halved
};

// Contour integral on back-sheet circles of the theta form. Errors: "pole-collision".
Residues residues_theta(const FayTheta& K0, cx a, double radius = 1e-2, int nodes = 96);
// Independent route from boundary values of the Gram form of K^0 and the Green function of 0.
Residues residues_reflection(const FayKernel& K0, cx a, const SolverParams& params = {});

using ResidueFn = std::function<std::array<cx, 2>(cx)>;

struct ResidueMatrix {
    std::array<cx, 4> a{};
    std::array<Eigen::Vector2cd, 4> delta{};
    Eigen::Matrix4cd F;
    Eigen::Vector4d singular_values;
    double sigma_min = 0.0;
    double condition = 0.0;
};

// Rows (R_1 delta_j; R_2 delta_j), columns j. Errors: "degenerate-points".
ResidueMatrix residue_matrix(const DomainSpec& spec, const CriticalPoints& w, const std::array<cx, 4>& a,
                             const std::array<Eigen::Vector2cd, 4>& delta, const ResidueFn& residues);

using MatrixFn = std::function<Eigen::Matrix2cd(cx)>;

struct PickMatrix {
    Eigen::MatrixXcd M;
    Eigen::VectorXd eigenvalues;  // descending
};

// ((I - F(z)F(w)^*) K(z, w)) over Q.
PickMatrix pick_block_matrix(const MatrixFn& F, const std::vector<cx>& Q, const std::function<cx(cx, cx)>& kernel);

}  // namespace tridisk
