#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tridisk/matrix_inner.hpp"

namespace tridisk {

constexpr double kEpsSdp = 1e-7;
constexpr int kSdpMaxIter = 50000;

// One generator of the sampled cone: phi_p for a grid parameter, or the zero function.
struct GridPoint {
    double t1 = 0.0, t2 = 0.0;
    bool anchor = false;
    std::optional<InnerEvaluator> phi;  // empty for the zero generator

    cx value(cx z) const { return phi ? phi->phi(z) : cx(0.0); }
    std::string label() const;
};

struct PiGrid {
    std::vector<GridPoint> points;
    std::vector<std::string> dropped;  // "t1,t2: reason"
    std::vector<std::string> refined;  // built only with a longer series
};

// p(t) on an n1 x n2 uniform angle grid, then the extra anchor parameters.
// Failed grid points are dropped and logged.
PiGrid sample_Pi(const DomainSpec& spec, int n1, int n2, const std::vector<std::pair<double, double>>& anchors = {},
                 const SolverParams& params = {});

class ConeSample {
public:
    ConeSample(DomainSpec spec, std::vector<cx> S, PiGrid grid, bool zero_generator = true);

    const DomainSpec& spec() const { return spec_; }

    const std::vector<cx>& S() const { return S_; }
    const PiGrid& grid() const { return grid_; }
    int points() const { return static_cast<int>(S_.size()); }
    int generators() const { return static_cast<int>(gens_.size()); }
    const GridPoint& generator(int g) const { return gens_[g]; }
    // k_g(z_i, z_j) = 1 - phi(z_i) phi(z_j)^*.
    const Eigen::MatrixXcd& kernel(int g) const { return k_[g]; }
    // k_g expanded to 2|S| x 2|S| with index 2 i + a.
    const Eigen::MatrixXcd& block_kernel(int g) const { return kb_[g]; }
    // sum_g |block_kernel(g)|^2 entrywise.
    const Eigen::MatrixXd& weight() const { return W_; }
    // Smallest diagonal entry 1 - |phi(z_i)|^2 over all generators.
    double diagonal_floor() const { return floor_; }

private:
    DomainSpec spec_;
    std::vector<cx> S_;
    PiGrid grid_;
    std::vector<GridPoint> gens_;
    std::vector<Eigen::MatrixXcd> k_, kb_;
    Eigen::MatrixXd W_;
    double floor_ = 1.0;
};

// a_1..a_4, 0 and two fixed extra points: the seven-point set.
std::vector<cx> uniqueness_points(const ZeroData& zd);
// Seven-point set plus one generic point.
std::vector<cx> default_S(const ZeroData& zd);

std::vector<Mat2c> values_on(const MatrixFn& F, const std::vector<cx>& pts);
// Block matrix (I - rho^2 F(z_i) F(z_j)^*).
Eigen::MatrixXcd target_matrix(const std::vector<Mat2c>& FS, double rho);
// Sum_g block_kernel(g) o Gamma_g.
Eigen::MatrixXcd cone_map(const ConeSample& s, const std::vector<Eigen::MatrixXcd>& Gamma);

// 1 / (2 tau_max) with tau_max the largest column sup-norm of F over pts; +infinity when F vanishes there.
double absorb_lower_bound(const std::vector<Mat2c>& F);

enum class Decision { primal, dual, inconclusive };
std::string to_string(Decision d);

enum class SdpMethod { interior, splitting };

struct SdpOptions {
    SdpMethod method = SdpMethod::interior;
    double eps = kEpsSdp;
    int max_iter = kSdpMaxIter;  // splitting iterations
    int check_every = 250;
    int ipm_max_iter = 100;
    double ipm_tol = 1e-10;
    double inflation = 10.0;
    bool parallel = true;
};

struct DualCheck {
    bool valid = false;
    double shift = 0.0;      // multiple of the identity added to Lambda
    double slice_min = 0.0;  // smallest eigenvalue over the p-slices after the shift
    double value = 0.0;      // <Lambda, T> after the shift
    double margin = 0.0;     // -value / (|Lambda| |T|)
    Eigen::MatrixXcd Lambda;
};

struct ConeCertificate {
    Decision decision = Decision::inconclusive;
    double rho = 0.0;
    int iterations = 0;
    double primal_residual = INFINITY;  // |cone_map(Gamma) - T|_F / max(1, |T|_F)
    double t_star = NAN;                // interior method: largest t with T - t I in the sampled cone
    // Primal: Gamma_g = mu_g * Gamma_tilde_g with mu a probability vector.
    std::vector<Eigen::MatrixXcd> Gamma;
    std::vector<double> mu;
    // Dual.
    DualCheck dual;
};

// Post-processes a raw functional: shift by a multiple of I so every slice is positive with inflated margin,
// then test <Lambda, T> < 0 with the same inflation.
DualCheck certify_dual(const ConeSample& s, const Eigen::MatrixXcd& T, const Eigen::MatrixXcd& Lambda,
                       double eps = kEpsSdp, double inflation = 10.0);

// Hermitian projection of every block onto the PSD cone.
void project_psd(std::vector<Eigen::MatrixXcd>& blocks, bool parallel = true);

struct MarginSolution {
    double t = 0.0;                    // max t with T - t I = sum_g k_g o Gamma_g, Gamma_g PSD
    std::vector<Eigen::MatrixXcd> Gamma;
    Eigen::MatrixXcd Lambda;           // dual: slices PSD, tr Lambda = 1, <Lambda, T> = t
    int iterations = 0;
    double primal_infeasibility = 0.0, dual_infeasibility = 0.0, gap = 0.0;
    bool converged = false;
};

// Primal-dual interior point (HKM direction, Mehrotra corrector). Requires the zero generator.
MarginSolution cone_margin(const ConeSample& s, const Eigen::MatrixXcd& T, const SdpOptions& opt = {});

// Interior method: cone_margin then certificate checks. Splitting method: Douglas-Rachford on
// {sum_g k_g o Gamma_g = T} and the PSD cones.
ConeCertificate feasibility(const ConeSample& s, const std::vector<Mat2c>& FS, double rho, const SdpOptions& opt = {});

struct RhoStep {
    double rho;
    Decision decision;
    double margin;
    int iterations;
};

struct RhoBracket {
    double lo = 0.0, hi = 0.0;
    ConeCertificate lo_cert, hi_cert;
    bool hi_found = false;  // false when no dual certificate was found up to rho_cap
    bool stalled = false;   // an interior step was inconclusive; the bracket is the last decisive one
    std::vector<RhoStep> trace;
};

// Errors: "bracket-failed" when an endpoint is inconclusive.
RhoBracket rho_bisect(const ConeSample& s, const std::vector<Mat2c>& FS, double tol = 1e-2, double rho_cap = 2.0,
                      const SdpOptions& opt = {});

// Unitary colligation (U, K, mu) over the sampled generators.
class Colligation {
public:
    std::vector<GridPoint> gens;  // generators carrying state
    std::vector<int> dims;        // state dimension per generator
    std::vector<double> mu;
    Eigen::MatrixXcd U;           // [[A, B], [C, D]], state first

    int state_dim() const { return static_cast<int>(U.rows()) - 2; }
    Eigen::MatrixXcd A() const;
    Eigen::MatrixXcd B() const;
    Eigen::MatrixXcd C() const;
    Eigen::MatrixXcd D() const;
    Eigen::VectorXcd Phi(cx z) const;  // diagonal of Phi(z)
    Mat2c W(cx z) const;
    double unitarity_residual() const;  // |U^* U - I|
    // |I - W(z)W(w)^* - C (I - Phi(z)A)^{-1} (I - Phi(z)Phi(w)^*) (I - Phi(w)A)^{-*} C^*|
    double transfer_identity_residual(cx z, cx w) const;
};

// Lurking isometry from a primal certificate. Errors: "not-primal", "defect-mismatch".
Colligation realize(const ConeSample& s, const std::vector<Mat2c>& FS, const ConeCertificate& primal,
                    double rank_tol = 1e-13);

struct UniquenessReport {
    std::vector<cx> S;
    Eigen::VectorXd singular_values;  // of M_S, descending
    int rank = 0;
    double rank_gap = 0.0;            // sigma_7 / sigma_6
    double max_deviation = 0.0;       // max |G - F| over the grid
    double ablation_deviation = 0.0;  // same with a_1 removed from S
};

// Interpolant determined by M_S X = 0 with X(w) = diag(y1(w), y2(w)).
class KernelInterpolant {
public:
    KernelInterpolant(std::vector<cx> S, std::vector<Mat2c> FS, std::function<cx(cx, cx)> kernel);
    Mat2c operator()(cx zeta) const;

    Eigen::MatrixXcd M;  // ((I - F(z)F(w)^*) K(z, w)), rows z
    Eigen::VectorXd singular_values;
    Eigen::VectorXcd y1, y2;
    double null_residual = 0.0;  // |M x_k| for the chosen null vectors

private:
    std::vector<cx> S_;
    std::vector<Mat2c> FS_;
    std::function<cx(cx, cx)> kernel_;
};

UniquenessReport uniqueness_check(const MatrixInner& F, const std::function<cx(cx, cx)>& kernel,
                                  const std::vector<cx>& grid, double rank_tol = 1e-6);

// Interior sample grid: n points on a golden spiral at boundary distance at least d.
std::vector<cx> interior_grid(const DomainSpec& spec, int n, double d = 0.05);

struct TestFunction {
    std::string name;
    std::function<cx(cx)> f;
    double sup_norm;  // over the closure of R
};
std::vector<TestFunction> spectral_test_family(const DomainSpec& spec, const ConeSample& s);

struct GnsReport {
    double lambda_I = 0.0;          // Lambda(I)
    double pairing = 0.0;           // Lambda(I - F F^*)
    double pairing_operator = 0.0;  // |e|^2 - |F^t(T) e|^2 in the quotient space
    double gram_min_eig = 0.0;      // relative to the largest
    int rank = 0;                   // dimension of the quotient
    double cone_min = INFINITY;     // min Lambda(h k h^*) / |h|^2 over sampled cone elements
    int cone_samples = 0;
    std::vector<std::pair<std::string, double>> spectral;  // |f(T)| - |f|_R
    double spectral_max = -INFINITY;
};

// Errors: "not-dual", "semidefinite-failure".
GnsReport gns_evidence(const ConeSample& s, const ConeCertificate& dual, const std::vector<Mat2c>& FS,
                       int basis_degree = 6, int cone_samples = 50, unsigned seed = 7);

}  // namespace tridisk
