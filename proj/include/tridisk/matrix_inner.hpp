#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tridisk/fay.hpp"
#include "tridisk/scalar_inner.hpp"

namespace tridisk {

constexpr double kEpsMat = 1e-4;
constexpr double kEpsDiag = 1e-4;

using Mat2c = Eigen::Matrix2cd;
using Vec2c = Eigen::Vector2cd;

// H = tau0 P(.,1) I + tau1 [P(.,q1) P1+ + P(.,q1*) P1-] + tau2 [P(.,q2) Peta+ + P(.,q2*) Peta-], completed
// entrywise to G with G(0) = I.
class HarmonicMatrix {
public:
    DomainSpec spec;
    double eta = 0.0;
    double t1 = 0.0, t2 = 0.0;
    std::array<double, 3> tau{};
    double h0 = 1.0;          // common diagonal value of H(0) before rescaling
    double h0_mismatch = 0.0; // |H22(0) - H11(0)| before rescaling
    std::array<AnalyticFn, 3> g;  // entries 11, 12 (= 21), 22

    std::array<cx, 2> q() const;  // q1, q2
    Vec2 v_plus() const;   // eta e1 + sqrt(1 - eta^2) e2
    Vec2 v_minus() const;  // sqrt(1 - eta^2) e1 - eta e2

    Mat2c G(cx z) const;
    Mat2c dG(cx z) const;
    Eigen::Matrix2d H(cx z) const { return G(z).real(); }
};

HarmonicMatrix build_H(const DomainSpec& spec, double eta, double t1, double t2, const SolverParams& params = {});

struct ZeroData {
    std::vector<cx> zeros;  // det zeros with multiplicity
    int winding = 0;
    std::array<cx, 4> a{};
    std::array<Vec2c, 4> delta{};
    bool complete = false;  // double zero at 0 and four further simple zeros
};

class MatrixInner {
public:
    HarmonicMatrix Hm;
    ZeroData zd;

    // Errors: "singular-G".
    Mat2c Psi(cx z) const;
    Mat2c dPsi(cx z) const;
    cx det(cx z) const;
    cx ddet(cx z) const;
    const DomainSpec& spec() const { return Hm.spec; }
    double eta() const { return Hm.eta; }
};

MatrixInner build_Psi(const DomainSpec& spec, double eta, double t1, double t2, const SolverParams& params = {});

// Boundary value by quadratic extrapolation from inward offsets delta, 2 delta, 3 delta.
Mat2c boundary_value(const MatrixInner& psi, const BoundaryPoint& q, double delta = 1e-3);
// max || Psi Psi^* - I || over n points per circle.
double boundary_unitarity_residual(const MatrixInner& psi, int n_per_circle = 240, double delta = 1e-3);

// Unit vector spanning ker Psi(a)^*, phase fixed so the largest entry is real positive.
Vec2c left_null_vector(const Mat2c& M);

// max pairwise |det(d_i, d_j)| within the triple; small means the three are collinear.
double triple_spread(const Vec2c& a, const Vec2c& b, const Vec2c& c);
// min over triples of triple_spread.
double collinearity_margin(const std::array<Vec2c, 4>& delta);
// max sine of the angle between delta_j and the reference pattern (e1, e1, e2, e2).
double pattern_distance(const std::array<Vec2c, 4>& delta);

// Residuals of the defining properties of Psi: unitary boundary values, Psi(0) = 0, Psi(1) = I,
// Psi(q1) e1 = e1, Psi(q1^*) e2 = e2, Psi(q2) v+ = v+, Psi(q2^*) v- = v-, and for eta = 0 the diagonal
// form diag(psi_(t1,-t2), psi_(-t1,t2)).
struct PsiOneReport {
    double unitarity = 0.0;
    double at0 = 0.0;
    double at1 = 0.0;
    double q1_e1 = 0.0, q1c_e2 = 0.0;
    double q2_vplus = 0.0, q2c_vminus = 0.0;
    double diagonal_at_eta0 = 0.0;  // max deviation of Psi_{0,t} from the diagonal scalar pair
    double max() const;
};

PsiOneReport psione_report(const MatrixInner& psi, const SolverParams& params = {}, int n_per_circle = 120);

struct ZeroSetReport {
    bool complete = false;
    double psi0_norm = 0.0;
    double zero_separation = 0.0;   // min pairwise distance among 0, a_1..a_4
    double collinearity = 0.0;      // collinearity_margin
    double pole_separation = 0.0;   // min |a_j - w_k|
    double pattern = 0.0;           // pattern_distance
    double sigma_min = 0.0;         // residue matrix
    double condition = INFINITY;
    bool ok_zero0 = false, ok_distinct = false, ok_collinear = false, ok_poles = false, ok_proximity = false;
    bool passes = false;
    std::vector<std::string> failures;
};

constexpr double kPatternMax = 0.5;
constexpr double kConditionMax = 1e8;

ZeroSetReport standard_zero_set_check(const MatrixInner& psi, const FayTheta& K0, double margin = kEpsSep);

struct EtaScanEntry {
    double eta;
    ZeroSetReport report;
};

struct EtaChoice {
    double eta = 0.0;
    std::vector<EtaScanEntry> scan;
};

// Largest eta = 2^-k, k = 3..12, passing with margins 2 eps_sep. Errors: "no-eta-found".
EtaChoice choose_eta(const DomainSpec& spec, double t1, double t2, const FayTheta& K0,
                     const SolverParams& params = {});

struct Witness {
    bool found = false;
    double commutator = 0.0;
    std::array<cx, 4> pairs{};  // (z1, w1, z2, w2)
};

std::vector<std::pair<cx, cx>> witness_probe_pairs();
Witness diagonalizability_witness(const std::function<Mat2c(cx)>& F,
                                  const std::vector<std::pair<cx, cx>>& pairs = witness_probe_pairs(),
                                  double eps = kEpsDiag);

}  // namespace tridisk
