#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "tridisk/geometry.hpp"

namespace tridisk {

struct SolverParams {
    int N = 32;         // series truncation
    int M_factor = 8;   // collocation points per circle = M_factor * N
    double eps_dirichlet = 1e-8;
    double eps_period = 1e-8;
    double eps_lin = 1e-10;
    double kappa_max = 1e12;
};

// h(z) = a00 + sum_k b_k log|z - c_k| + Re( sum_n outer_n z^n + sum_{k,n} laurent_kn (r_k/(z - c_k))^n ).
// Laurent coefficients are stored against the scaled powers (r_k/(z-c_k))^n.
class SeriesHarmonic {
public:
    SeriesHarmonic() = default;
    SeriesHarmonic(const DomainSpec& spec, int N);

    DomainSpec spec;
    int N = 0;
    double a00 = 0.0;
    std::array<double, 2> b{0.0, 0.0};
    std::vector<cx> outer;                  // n = 1..N at index n-1
    std::array<std::vector<cx>, 2> laurent; // hole k = 1,2 at index k-1
    double residual = 0.0;
    double cond = 0.0;
    bool converged = true;

    double value(cx z) const;
    // Series part without a00 and logs: sum outer z^n + sum laurent (r/(z-c))^n.
    cx analytic_part(cx z) const;
    cx analytic_deriv(cx z) const;
    cx analytic_deriv2(cx z) const;
    // h_x - i h_y, the derivative of any local analytic completion.
    cx complex_derivative(cx z) const;
    // Derivative of complex_derivative.
    cx complex_derivative2(cx z) const;
    // h_x + i h_y
    cx gradient(cx z) const { return std::conj(complex_derivative(z)); }
    double normal_derivative(const BoundaryPoint& q) const;
    // Conjugate period counterclockwise around hole k (1 or 2): 2 pi b_k.
    double conjugate_period(int k) const { return 2.0 * kPi * b[k - 1]; }

    SeriesHarmonic& operator+=(const SeriesHarmonic& o);
    SeriesHarmonic& operator*=(double s);
    // Reference coefficient magnitude used to make period checks scale-aware.
    double scale() const;
};

SeriesHarmonic operator+(SeriesHarmonic a, const SeriesHarmonic& b);
SeriesHarmonic operator*(double s, SeriesHarmonic a);

using BoundaryData = std::function<double(int component, double angle, cx z)>;

// Least-squares collocation solver with a cached pseudo-inverse per (spec, N, M).
class DirichletSolver {
public:
    DirichletSolver(const DomainSpec& spec, const SolverParams& params = {});

    SeriesHarmonic solve(const BoundaryData& data) const;
    const DomainSpec& spec() const { return spec_; }
    const SolverParams& params() const { return params_; }
    int collocation_count() const { return M_; }
    double condition() const { return cond_; }
    int unknowns() const { return static_cast<int>(pinv_.rows()); }

    // Shared instance keyed by spec and parameters.
    static std::shared_ptr<const DirichletSolver> get(const DomainSpec& spec, const SolverParams& params = {});

private:
    DomainSpec spec_;
    SolverParams params_;
    int M_;
    Eigen::MatrixXd pinv_;
    double cond_;
    SeriesHarmonic unpack(const Eigen::VectorXd& x) const;
};

// Collocation matrix for the series basis; the OpenMP and serial versions must agree exactly.
Eigen::MatrixXd collocation_matrix(const DomainSpec& spec, int N, int M);
Eigen::MatrixXd collocation_matrix_serial(const DomainSpec& spec, int N, int M);

SeriesHarmonic solve_dirichlet(const DomainSpec& spec, const BoundaryData& data,
                               const SolverParams& params = {});
// Throws "unconverged" or "ill-conditioned".
void require_converged(const SeriesHarmonic& h, const SolverParams& params = {});

// h_j, memoized per spec and parameters.
const SeriesHarmonic& harmonic_measure(const DomainSpec& spec, int j, const SolverParams& params = {});

// Outward normal derivative of h_j at q.
double normal_derivative_Q(const DomainSpec& spec, int j, const BoundaryPoint& q,
                           const SolverParams& params = {});

struct TauWeights {
    std::array<BoundaryPoint, 3> p;
    std::array<double, 3> values{};
    Eigen::Matrix<double, 2, 3> M;
};

Eigen::Matrix<double, 2, 3> period_rows(const DomainSpec& spec, const std::array<BoundaryPoint, 3>& p,
                                        const SolverParams& params = {});
TauWeights tau(const DomainSpec& spec, const std::array<BoundaryPoint, 3>& p,
               const SolverParams& params = {});

// Regular part u of g(z, a) = -log|z - a| + u(z).
SeriesHarmonic greens_function(const DomainSpec& spec, cx a, const SolverParams& params = {});
double green_value(const SeriesHarmonic& u, cx a, cx z);
// d/dz of the local analytic completion of g(., a) at z, i.e. (g_x - i g_y).
cx green_complex_derivative(const SeriesHarmonic& u, cx a, cx z);

// Analytic function: constant + series part + explicit boundary poles of Herglotz type.
struct HerglotzPole {
    double weight;   // multiplies the kernel below
    int component;
    cx q;            // boundary point
    double center;
    double radius;
};

class AnalyticFn {
public:
    cx constant{0.0, 0.0};
    SeriesHarmonic series;   // logs must vanish; a00 ignored (folded into constant)
    std::vector<HerglotzPole> poles;

    cx value(cx z) const;
    cx deriv(cx z) const;
    AnalyticFn& operator*=(double s);
};

// Analytic function whose real part is the Poisson-type kernel of the disk/exterior disk at q,
// per unit physical arc length.
cx herglotz_pole_value(const HerglotzPole& p, cx z);
cx herglotz_pole_deriv(const HerglotzPole& p, cx z);

// P(q, .) as density with respect to normalized arc length: L * (S_q - v_q).
class PoissonKernel {
public:
    PoissonKernel(const DomainSpec& spec, const BoundaryPoint& q, const SolverParams& params = {});
    double operator()(cx z) const;
    const SeriesHarmonic& correction() const { return v_; }
    const BoundaryPoint& source() const { return q_; }
    HerglotzPole pole(double weight) const;
    // Conjugate period of P(q, .) counterclockwise around hole k.
    double conjugate_period(int k) const { return -L_ * v_.conjugate_period(k); }

private:
    DomainSpec spec_;
    BoundaryPoint q_;
    cx qpt_;
    double L_;
    SeriesHarmonic v_;
};

// P(q, z) = -(L / 2 pi) dg(., z)/dn at q, via the Green function for z.
double poisson_kernel(const DomainSpec& spec, const BoundaryPoint& q, cx z, const SolverParams& params = {});

// Positive combination sum w_i P(q_i, .) completed to an analytic function with Im = 0 at anchor.
// Throws "has-periods" if the combination carries conjugate periods.
AnalyticFn herglotz_completion(const DomainSpec& spec, const std::vector<std::pair<double, BoundaryPoint>>& terms,
                               cx anchor, const SolverParams& params = {});

// Analytic completion of a period-free series; Im f(anchor) = 0.
AnalyticFn analytic_completion(const SeriesHarmonic& h, cx anchor, const SolverParams& params = {});

struct CriticalPoints {
    double w1;
    double w2;
};
CriticalPoints green_critical_points(const DomainSpec& spec, const SolverParams& params = {});
// g_x(x, 0) on the real axis.
double green_dx_on_axis(const SeriesHarmonic& u0, double x);

}  // namespace tridisk
