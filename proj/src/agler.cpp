#include "tridisk/agler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace tridisk {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

std::string GridPoint::label() const {
    if (!phi) return "zero";
    char buf[64];
    std::snprintf(buf, sizeof buf, "t=(%.6f,%.6f)%s", t1, t2, anchor ? " anchor" : "");
    return buf;
}

PiGrid sample_Pi(const DomainSpec& spec, int n1, int n2, const std::vector<std::pair<double, double>>& anchors,
                 const SolverParams& params) {
    if (n1 <= 0 || n2 <= 0) throw Error("invalid-argument", "grid sizes must be positive");
    std::vector<std::pair<double, double>> ts;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) ts.emplace_back(2.0 * kPi * i / n1, 2.0 * kPi * j / n2);
    const size_t n_grid = ts.size();
    for (auto [a1, a2] : anchors) {
        bool dup = false;
        for (auto [b1, b2] : ts) {
            cx d1 = std::polar(1.0, a1) - std::polar(1.0, b1), d2 = std::polar(1.0, a2) - std::polar(1.0, b2);
            if (std::abs(d1) < 1e-12 && std::abs(d2) < 1e-12) dup = true;
        }
        if (!dup) ts.emplace_back(a1, a2);
    }
    std::vector<std::optional<InnerEvaluator>> built(ts.size());
    std::vector<std::string> why(ts.size());
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < static_cast<int>(ts.size()); ++k) {
        // Sources close to the outer circle need a longer series; retry once with N * 3/2.
        for (int attempt = 0; attempt < 2 && !built[k]; ++attempt) {
            SolverParams pk = params;
            if (attempt == 1) pk.N = params.N * 3 / 2;
            try {
                InnerEvaluator e = build_phi_p(spec, p_of_t(ts[k].first, ts[k].second), pk);
                if (e.winding != 3) throw Error("zero-count", "winding " + std::to_string(e.winding));
                built[k] = std::move(e);
                if (attempt == 1) why[k] = "refined to N = " + std::to_string(pk.N);
            } catch (const Error& err) {
                why[k] = err.what();
            }
        }
    }
    PiGrid out;
    for (size_t k = 0; k < ts.size(); ++k) {
        if (built[k] && !why[k].empty()) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f,%.6f: ", ts[k].first, ts[k].second);
            out.refined.push_back(buf + why[k]);
        }
        if (!built[k]) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f,%.6f: ", ts[k].first, ts[k].second);
            out.dropped.push_back(buf + why[k]);
            continue;
        }
        GridPoint g;
        g.t1 = ts[k].first;
        g.t2 = ts[k].second;
        g.anchor = k >= n_grid;
        g.phi = std::move(built[k]);
        out.points.push_back(std::move(g));
    }
    return out;
}

namespace {

// Entry (i, j) of k repeated over the 2 x 2 block (2 i + a, 2 j + b).
MatrixXcd expand2(const MatrixXcd& k) {
    MatrixXcd K(2 * k.rows(), 2 * k.cols());
    for (int i = 0; i < k.rows(); ++i)
        for (int j = 0; j < k.cols(); ++j) K.block<2, 2>(2 * i, 2 * j).setConstant(k(i, j));
    return K;
}

}  // namespace

ConeSample::ConeSample(DomainSpec spec, std::vector<cx> S, PiGrid grid, bool zero_generator)
    : spec_(spec), S_(std::move(S)), grid_(std::move(grid)) {
    if (S_.empty()) throw Error("invalid-argument", "empty point set");
    gens_ = grid_.points;
    if (zero_generator) gens_.push_back(GridPoint{});
    const int m = points(), G = generators();
    k_.resize(G);
    kb_.resize(G);
#pragma omp parallel for
    for (int g = 0; g < G; ++g) {
        VectorXcd v(m);
        for (int i = 0; i < m; ++i) v(i) = gens_[g].value(S_[i]);
        k_[g] = MatrixXcd::Ones(m, m) - v * v.adjoint();
        kb_[g] = expand2(k_[g]);
    }
    W_ = MatrixXd::Zero(2 * m, 2 * m);
    for (int g = 0; g < G; ++g) {
        W_ += kb_[g].cwiseAbs2();
        for (int i = 0; i < m; ++i) floor_ = std::min(floor_, k_[g](i, i).real());
    }
    if (!(W_.minCoeff() > 0.0)) throw Error("invalid-argument", "sampled kernels vanish at some entry");
}

namespace {

const cx kA7{0.2, 0.45};
const cx kA8{-0.25, -0.42};
const cx kGeneric{0.1, -0.6};

}  // namespace

std::vector<cx> uniqueness_points(const ZeroData& zd) {
    if (!zd.complete) throw Error("invalid-argument", "zero data incomplete");
    return {zd.a[0], zd.a[1], zd.a[2], zd.a[3], 0.0, kA7, kA8};
}

std::vector<cx> default_S(const ZeroData& zd) {
    auto S = uniqueness_points(zd);
    S.push_back(kGeneric);
    return S;
}

std::vector<Mat2c> values_on(const MatrixFn& F, const std::vector<cx>& pts) {
    std::vector<Mat2c> v;
    v.reserve(pts.size());
    for (cx z : pts) v.push_back(F(z));
    return v;
}

MatrixXcd target_matrix(const std::vector<Mat2c>& FS, double rho) {
    const int m = static_cast<int>(FS.size());
    MatrixXcd T(2 * m, 2 * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            T.block<2, 2>(2 * i, 2 * j) = Mat2c::Identity() - rho * rho * FS[i] * FS[j].adjoint();
    return T;
}

MatrixXcd cone_map(const ConeSample& s, const std::vector<MatrixXcd>& Gamma) {
    const int n = 2 * s.points();
    MatrixXcd A = MatrixXcd::Zero(n, n);
    for (int g = 0; g < s.generators(); ++g) A += s.block_kernel(g).cwiseProduct(Gamma[g]);
    return A;
}

double absorb_lower_bound(const std::vector<Mat2c>& F) {
    double tau = 0.0;
    for (const Mat2c& M : F) tau = std::max(tau, M.cwiseAbs().maxCoeff());
    if (tau == 0.0) return INFINITY;
    return 1.0 / (2.0 * tau);
}

std::string to_string(Decision d) {
    switch (d) {
        case Decision::primal: return "primal";
        case Decision::dual: return "dual";
        default: return "inconclusive";
    }
}

namespace {

double slice_min_eig(const ConeSample& s, const MatrixXcd& Lambda, int g) {
    MatrixXcd slice = s.block_kernel(g).conjugate().cwiseProduct(Lambda);
    slice = 0.5 * (slice + slice.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(slice, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double inner(const MatrixXcd& A, const MatrixXcd& B) { return (A.adjoint() * B).trace().real(); }

}  // namespace

DualCheck certify_dual(const ConeSample& s, const MatrixXcd& T, const MatrixXcd& Lambda, double eps, double inflation) {
    DualCheck d;
    MatrixXcd L = 0.5 * (Lambda + Lambda.adjoint());
    double nrm = L.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) return d;
    L /= nrm;
    const double tol = inflation * eps;
    const int G = s.generators();
    std::vector<double> mins(G);
#pragma omp parallel for
    for (int g = 0; g < G; ++g) mins[g] = slice_min_eig(s, L, g);
    double need = 0.0;
    for (double v : mins) need = std::max(need, tol - v);
    d.shift = need / s.diagonal_floor();
    L += d.shift * MatrixXcd::Identity(L.rows(), L.cols());
#pragma omp parallel for
    for (int g = 0; g < G; ++g) mins[g] = slice_min_eig(s, L, g);
    d.slice_min = *std::min_element(mins.begin(), mins.end());
    d.value = inner(L, T);
    d.margin = -d.value / (L.norm() * std::max(1.0, T.norm()));
    d.Lambda = L;
    d.valid = d.slice_min >= tol * (1.0 - 1e-9) && d.margin >= tol;
    return d;
}

void project_psd(std::vector<MatrixXcd>& blocks, bool parallel) {
#pragma omp parallel for if (parallel)
    for (int g = 0; g < static_cast<int>(blocks.size()); ++g) {
        MatrixXcd H = 0.5 * (blocks[g] + blocks[g].adjoint());
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(H);
        VectorXd lam = es.eigenvalues().cwiseMax(0.0);
        blocks[g] = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
    }
}

namespace {

MatrixXcd herm(const MatrixXcd& A) { return 0.5 * (A + A.adjoint()); }

// Largest alpha in (0, 1] keeping X + alpha dX positive definite, scaled by gamma.
double step_to_boundary(const MatrixXcd& X, const MatrixXcd& dX, double gamma) {
    Eigen::LLT<MatrixXcd> llt(X);
    MatrixXcd Li = llt.matrixL().solve(MatrixXcd::Identity(X.rows(), X.cols()));
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(herm(Li * dX * Li.adjoint()), Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues()(0);
    return lmin >= 0.0 ? 1.0 : std::min(1.0, -gamma / lmin);
}

double scalar_step(double x, double dx, double gamma) { return dx >= 0.0 ? 1.0 : std::min(1.0, -gamma * x / dx); }

}  // namespace

MarginSolution cone_margin(const ConeSample& s, const MatrixXcd& T, const SdpOptions& opt) {
    const int G = s.generators(), n = 2 * s.points(), nn = n * n;
    if (s.generator(G - 1).phi) throw Error("invalid-argument", "the interior method needs the zero generator");
    const MatrixXcd I = MatrixXcd::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eT(herm(T), Eigen::EigenvaluesOnly);
    const double t_low = eT.eigenvalues()(0) - 1.0;
    const MatrixXcd b = T - t_low * I;
    const double bn = b.norm();

    std::vector<MatrixXcd> X(G, I), Z(G, I), Zi(G), dX(G), dZ(G), dXa(G), dZa(G), Rd(G);
    double xu = 1.0, zu = 1.0;
    MatrixXcd Y = MatrixXcd::Zero(n, n);
    const double N = static_cast<double>(G) * n + 1.0;
    MarginSolution out;
    struct Iterate {
        std::vector<MatrixXcd> X;
        double xu;
        MatrixXcd Y;
        double rp, rd, gap;
    } best{X, xu, Y, INFINITY, INFINITY, INFINITY};
    double best_merit = INFINITY;
    int stall = 0;

    auto A = [&](const std::vector<MatrixXcd>& V, double vu) -> MatrixXcd { return cone_map(s, V) + vu * I; };
    for (int it = 1; it <= opt.ipm_max_iter; ++it) {
        out.iterations = it;
        MatrixXcd rp = b - A(X, xu);
        double rdn = 0.0;
        for (int g = 0; g < G; ++g) {
            Rd[g] = -Z[g] - s.block_kernel(g).conjugate().cwiseProduct(Y);
            rdn += Rd[g].squaredNorm();
        }
        double rdu = -1.0 - zu - Y.trace().real();
        rdn = std::sqrt(rdn + rdu * rdu);
        double xz = xu * zu;
        for (int g = 0; g < G; ++g) xz += (X[g] * Z[g]).trace().real();
        const double mu = xz / N;
        const double pobj = -xu, dobj = (b * Y).trace().real();
        out.primal_infeasibility = rp.norm() / (1.0 + bn);
        out.dual_infeasibility = rdn;
        out.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        if (std::getenv("TRIDISK_IPM_TRACE"))
            std::fprintf(stderr, "ipm %d mu=%.3e rp=%.3e rd=%.3e gap=%.3e t=%.6e\n", it, mu, out.primal_infeasibility, rdn, out.gap, t_low + xu);
        const double merit = std::max({out.primal_infeasibility, out.dual_infeasibility, out.gap});
        if (merit < best_merit) {
            best_merit = merit;
            best = {X, xu, Y, out.primal_infeasibility, out.dual_infeasibility, out.gap};
            stall = 0;
        } else if (++stall >= 5) {
            break;
        }
        if (merit < opt.ipm_tol) {
            out.converged = true;
            break;
        }
        if (!(mu > 0.0)) break;

        // Schur complement of the HKM system.
        MatrixXcd M = MatrixXcd::Zero(nn, nn);
        for (int g = 0; g < G; ++g) Zi[g] = Eigen::LLT<MatrixXcd>(Z[g]).solve(I);
        for (int g = 0; g < G; ++g) {
            const MatrixXcd& K = s.block_kernel(g);
            MatrixXcd ZiT = Zi[g].transpose(), XT = X[g].transpose();
            Eigen::VectorXcd kr(nn);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) kr(i * n + j) = K(i, j);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < n; ++k) {
                    cx xik = X[g](i, k), zik = Zi[g](i, k);
                    MatrixXcd blk = 0.5 * (xik * ZiT + zik * XT);
                    blk = kr.segment(i * n, n).asDiagonal() * blk * kr.segment(k * n, n).conjugate().asDiagonal();
                    M.block(i * n, k * n, n, n) += blk;
                }
        }
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) M(i * n + i, k * n + k) += xu / zu;
        Eigen::PartialPivLU<MatrixXcd> lu(M);

        auto direction = [&](const std::vector<MatrixXcd>& P, double pu) {
            MatrixXcd rhs = rp - (pu - xu * rdu / zu) * I;
            for (int g = 0; g < G; ++g)
                rhs -= s.block_kernel(g).cwiseProduct(herm(P[g] - X[g] * Rd[g] * Zi[g]));
            Eigen::VectorXcd r(nn);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) r(i * n + j) = rhs(i, j);
            Eigen::VectorXcd y = lu.solve(r);
            MatrixXcd dY(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) dY(i, j) = y(i * n + j);
            dY = herm(dY);
            for (int g = 0; g < G; ++g) {
                dZ[g] = Rd[g] - s.block_kernel(g).conjugate().cwiseProduct(dY);
                dX[g] = herm(P[g] - X[g] * dZ[g] * Zi[g]);
            }
            double dzu = rdu - dY.trace().real();
            double dxu = pu - xu * dzu / zu;
            return std::make_tuple(dY, dxu, dzu);
        };
        auto steps = [&](double dxu, double dzu, double gamma) {
            double ap = scalar_step(xu, dxu, gamma), ad = scalar_step(zu, dzu, gamma);
            for (int g = 0; g < G; ++g) {
                ap = std::min(ap, step_to_boundary(X[g], dX[g], gamma));
                ad = std::min(ad, step_to_boundary(Z[g], dZ[g], gamma));
            }
            return std::make_pair(ap, ad);
        };

        // Predictor.
        std::vector<MatrixXcd> P(G);
        for (int g = 0; g < G; ++g) P[g] = -X[g];
        auto [dYa, dxua, dzua] = direction(P, -xu);
        auto [apa, ada] = steps(dxua, dzua, 1.0);
        double xza = (xu + apa * dxua) * (zu + ada * dzua);
        for (int g = 0; g < G; ++g) {
            dXa[g] = dX[g];
            dZa[g] = dZ[g];
            xza += ((X[g] + apa * dX[g]) * (Z[g] + ada * dZ[g])).trace().real();
        }
        const double sigma = std::pow(std::max(0.0, xza / N) / mu, 3.0);
        // Corrector.
        for (int g = 0; g < G; ++g) P[g] = sigma * mu * Zi[g] - X[g] - dXa[g] * dZa[g] * Zi[g];
        auto [dYc, dxu, dzu] = direction(P, sigma * mu / zu - xu - dxua * dzua / zu);
        auto [ap, ad] = steps(dxu, dzu, 0.95);
        for (int g = 0; g < G; ++g) {
            X[g] = herm(X[g] + ap * dX[g]);
            Z[g] = herm(Z[g] + ad * dZ[g]);
        }
        xu += ap * dxu;
        zu += ad * dzu;
        Y += ad * dYc;
    }
    out.t = t_low + best.xu;
    out.Gamma = best.X;
    out.Lambda = -best.Y;
    out.primal_infeasibility = best.rp;
    out.dual_infeasibility = best.rd;
    out.gap = best.gap;
    return out;
}

namespace {

ConeCertificate feasibility_interior(const ConeSample& s, const MatrixXcd& T, const SdpOptions& opt) {
    ConeCertificate c;
    MarginSolution ms = cone_margin(s, T, opt);
    c.iterations = ms.iterations;
    c.t_star = ms.t;
    const int G = s.generators();
    std::vector<MatrixXcd> Gamma = ms.Gamma;
    if (ms.t > 0.0) {
        // The zero generator has the all-ones kernel, so it absorbs the remainder exactly.
        MatrixXcd rest = T - cone_map(s, Gamma) + Gamma[G - 1];
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(herm(rest));
        VectorXd ev = es.eigenvalues().cwiseMax(0.0);
        Gamma[G - 1] = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    }
    c.primal_residual = (cone_map(s, Gamma) - T).norm() / std::max(1.0, T.norm());
    DualCheck d = certify_dual(s, T, ms.Lambda, opt.eps, opt.inflation);
    c.dual = d;
    if (d.valid) {
        c.decision = Decision::dual;
    } else if (c.primal_residual <= opt.eps) {
        c.decision = Decision::primal;
        c.Gamma = Gamma;
        double tot = 0.0;
        for (const auto& Gm : Gamma) tot += Gm.trace().real();
        for (const auto& Gm : Gamma) c.mu.push_back(Gm.trace().real() / tot);
    }
    return c;
}

}  // namespace

ConeCertificate feasibility(const ConeSample& s, const std::vector<Mat2c>& FS, double rho, const SdpOptions& opt) {
    if (static_cast<int>(FS.size()) != s.points()) throw Error("invalid-argument", "F values do not match S");
    if (!(rho > 0.0)) throw Error("invalid-argument", "rho must be positive");
    if (opt.method == SdpMethod::interior) {
        ConeCertificate c = feasibility_interior(s, target_matrix(FS, rho), opt);
        c.rho = rho;
        return c;
    }
    ConeCertificate c;
    c.rho = rho;
    const MatrixXcd T = target_matrix(FS, rho);
    const double Tn = std::max(1.0, T.norm());
    const int G = s.generators(), n = 2 * s.points();
    const MatrixXd Winv = s.weight().cwiseInverse();
    std::vector<MatrixXcd> Y(G, MatrixXcd::Zero(n, n)), Z, X(G);
    MatrixXcd AY = MatrixXcd::Zero(n, n);
    for (int it = 1; it <= opt.max_iter; ++it) {
        Z = Y;
        project_psd(Z, opt.parallel);
        MatrixXcd AZ = cone_map(s, Z);
        // Affine projection of 2Z - Y.
        MatrixXcd corr = Winv.cast<cx>().cwiseProduct(2.0 * AZ - AY - T);
#pragma omp parallel for if (opt.parallel)
        for (int g = 0; g < G; ++g) X[g] = 2.0 * Z[g] - Y[g] - s.block_kernel(g).conjugate().cwiseProduct(corr);
        for (int g = 0; g < G; ++g) Y[g] += X[g] - Z[g];
        AY += T - AZ;
        if (it % opt.check_every != 0 && it != opt.max_iter) continue;
        c.iterations = it;
        double res = (AZ - T).norm() / Tn;
        c.primal_residual = res;
        if (res <= opt.eps) {
            c.decision = Decision::primal;
            c.Gamma = Z;
            double tot = 0.0;
            for (const auto& Gm : Z) tot += Gm.trace().real();
            for (const auto& Gm : Z) c.mu.push_back(Gm.trace().real() / tot);
            return c;
        }
        // Dual candidates: the weighted residual at the PSD iterate and the displacement direction.
        MatrixXcd D1 = Winv.cast<cx>().cwiseProduct(AZ - T);
        std::vector<MatrixXcd> disp(G);
        for (int g = 0; g < G; ++g) disp[g] = X[g] - Z[g];
        MatrixXcd D2 = -Winv.cast<cx>().cwiseProduct(cone_map(s, disp));
        for (const MatrixXcd* L : {&D1, &D2}) {
            DualCheck d = certify_dual(s, T, *L, opt.eps, opt.inflation);
            if (d.valid) {
                c.decision = Decision::dual;
                c.dual = d;
                return c;
            }
            if (d.margin > c.dual.margin || c.dual.Lambda.size() == 0) c.dual = d;
        }
    }
    c.decision = Decision::inconclusive;
    return c;
}

RhoBracket rho_bisect(const ConeSample& s, const std::vector<Mat2c>& FS, double tol, double rho_cap,
                      const SdpOptions& opt) {
    RhoBracket b;
    auto run = [&](double rho) {
        ConeCertificate c = feasibility(s, FS, rho, opt);
        b.trace.push_back({rho, c.decision, c.decision == Decision::dual ? c.dual.margin : c.primal_residual,
                           c.iterations});
        return c;
    };
    double lo = std::min(absorb_lower_bound(FS), rho_cap);
    ConeCertificate clo = run(lo);
    for (int k = 0; k < 10 && clo.decision == Decision::dual; ++k) {
        lo *= 0.5;
        clo = run(lo);
    }
    if (clo.decision != Decision::primal) throw Error("bracket-failed", "no primal certificate at the lower end");
    b.lo = lo;
    b.lo_cert = clo;
    double hi = std::max(1.0, lo * 1.25);
    ConeCertificate chi;
    while (true) {
        if (hi > rho_cap) {
            b.hi = rho_cap;
            b.hi_found = false;
            return b;
        }
        chi = run(hi);
        if (chi.decision == Decision::inconclusive)
            throw Error("bracket-failed", "inconclusive at rho = " + std::to_string(hi));
        if (chi.decision == Decision::dual) break;
        b.lo = hi;
        b.lo_cert = chi;
        hi *= 1.25;
    }
    b.hi = hi;
    b.hi_cert = chi;
    b.hi_found = true;
    while (b.hi - b.lo > tol) {
        double mid = 0.5 * (b.lo + b.hi);
        ConeCertificate c = run(mid);
        if (c.decision == Decision::primal) {
            b.lo = mid;
            b.lo_cert = c;
        } else if (c.decision == Decision::dual) {
            b.hi = mid;
            b.hi_cert = c;
        } else {
            b.stalled = true;
            break;
        }
    }
    return b;
}

MatrixXcd Colligation::A() const {
    int d = state_dim();
    return U.topLeftCorner(d, d);
}
MatrixXcd Colligation::B() const { return U.topRightCorner(state_dim(), 2); }
MatrixXcd Colligation::C() const { return U.bottomLeftCorner(2, state_dim()); }
MatrixXcd Colligation::D() const { return U.bottomRightCorner(2, 2); }

VectorXcd Colligation::Phi(cx z) const {
    VectorXcd v(state_dim());
    int o = 0;
    for (size_t g = 0; g < gens.size(); ++g) {
        v.segment(o, dims[g]).setConstant(gens[g].value(z));
        o += dims[g];
    }
    return v;
}

Mat2c Colligation::W(cx z) const {
    const int d = state_dim();
    VectorXcd ph = Phi(z);
    MatrixXcd M = MatrixXcd::Identity(d, d) - A() * ph.asDiagonal();
    MatrixXcd X = M.partialPivLu().solve(B());
    return D() + C() * ph.asDiagonal() * X;
}

double Colligation::unitarity_residual() const {
    return (U.adjoint() * U - MatrixXcd::Identity(U.rows(), U.cols())).norm();
}

double Colligation::transfer_identity_residual(cx z, cx w) const {
    const int d = state_dim();
    VectorXcd pz = Phi(z), pw = Phi(w);
    MatrixXcd I = MatrixXcd::Identity(d, d);
    MatrixXcd Lz = (I - pz.asDiagonal() * A()).partialPivLu().solve(I);
    MatrixXcd Lw = (I - pw.asDiagonal() * A()).partialPivLu().solve(I);
    VectorXcd mid = VectorXcd::Ones(d) - pz.cwiseProduct(pw.conjugate());
    Mat2c rhs = C() * Lz * mid.asDiagonal() * Lw.adjoint() * C().adjoint();
    Mat2c lhs = Mat2c::Identity() - W(z) * W(w).adjoint();
    return (lhs - rhs).norm();
}

Colligation realize(const ConeSample& s, const std::vector<Mat2c>& FS, const ConeCertificate& primal, double rank_tol) {
    if (primal.decision != Decision::primal) throw Error("not-primal", "realization needs a primal certificate");
    if (std::abs(primal.rho - 1.0) > 1e-12) throw Error("not-primal", "realization needs rho = 1");
    const int m = s.points(), n = 2 * m;
    std::vector<MatrixXcd> H;
    Colligation col;
    double top = 0.0;
    std::vector<Eigen::SelfAdjointEigenSolver<MatrixXcd>> es(s.generators());
    for (int g = 0; g < s.generators(); ++g) {
        es[g].compute(0.5 * (primal.Gamma[g] + primal.Gamma[g].adjoint()));
        top = std::max(top, es[g].eigenvalues().maxCoeff());
    }
    for (int g = 0; g < s.generators(); ++g) {
        std::vector<int> keep;
        for (int k = 0; k < n; ++k)
            if (es[g].eigenvalues()(k) > rank_tol * top) keep.push_back(k);
        if (keep.empty()) continue;
        MatrixXcd Hg(n, keep.size());
        for (size_t k = 0; k < keep.size(); ++k)
            Hg.col(k) = es[g].eigenvectors().col(keep[k]) * std::sqrt(es[g].eigenvalues()(keep[k]));
        H.push_back(Hg);
        col.gens.push_back(s.generator(g));
        col.dims.push_back(static_cast<int>(keep.size()));
        col.mu.push_back(primal.mu[g]);
    }
    int D = 0;
    for (int d : col.dims) D += d;
    MatrixXcd E = MatrixXcd::Zero(D + 2, n), F = MatrixXcd::Zero(D + 2, n);
    for (int c = 0; c < n; ++c) {
        int i = c / 2, a = c % 2;
        int o = 0;
        for (size_t g = 0; g < H.size(); ++g) {
            VectorXcd h = H[g].row(c).adjoint();
            E.col(c).segment(o, col.dims[g]) = h;
            F.col(c).segment(o, col.dims[g]) = std::conj(col.gens[g].value(s.S()[i])) * h;
            o += col.dims[g];
        }
        for (int b = 0; b < 2; ++b) {
            E(D + b, c) = std::conj(FS[i](a, b));
            F(D + b, c) = (a == b) ? 1.0 : 0.0;
        }
    }
    double mismatch = (E.adjoint() * E - F.adjoint() * F).norm() / std::max(1.0, (F.adjoint() * F).norm());
    if (mismatch > 1e-5) throw Error("defect-mismatch", "Gram matrices differ by " + std::to_string(mismatch));
    // Procrustes: the unitary closest to mapping F onto E.
    Eigen::BDCSVD<MatrixXcd> svd(E * F.adjoint(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    col.U = svd.matrixU() * svd.matrixV().adjoint();
    return col;
}

KernelInterpolant::KernelInterpolant(std::vector<cx> S, std::vector<Mat2c> FS, std::function<cx(cx, cx)> kernel)
    : S_(std::move(S)), FS_(std::move(FS)), kernel_(std::move(kernel)) {
    const int m = static_cast<int>(S_.size());
    M.resize(2 * m, 2 * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            M.block<2, 2>(2 * i, 2 * j) = (Mat2c::Identity() - FS_[i] * FS_[j].adjoint()) * kernel_(S_[i], S_[j]);
    Eigen::JacobiSVD<MatrixXcd> svd(M);
    singular_values = svd.singularValues();
    for (int a = 0; a < 2; ++a) {
        MatrixXcd Ma(2 * m, m);
        for (int j = 0; j < m; ++j) Ma.col(j) = M.col(2 * j + a);
        Eigen::JacobiSVD<MatrixXcd> sa(Ma, Eigen::ComputeFullV);
        VectorXcd y = sa.matrixV().col(m - 1);
        null_residual = std::max(null_residual, (Ma * y).norm());
        (a == 0 ? y1 : y2) = y;
    }
}

Mat2c KernelInterpolant::operator()(cx zeta) const {
    Mat2c L = Mat2c::Zero(), R = Mat2c::Zero();
    for (size_t j = 0; j < S_.size(); ++j) {
        cx k = kernel_(zeta, S_[j]);
        Mat2c X = Mat2c::Zero();
        X(0, 0) = y1(j);
        X(1, 1) = y2(j);
        L += k * X;
        R += k * FS_[j].adjoint() * X;
    }
    return L * R.inverse();
}

UniquenessReport uniqueness_check(const MatrixInner& F, const std::function<cx(cx, cx)>& kernel,
                                  const std::vector<cx>& grid, double rank_tol) {
    UniquenessReport r;
    r.S = uniqueness_points(F.zd);
    auto Ffn = [&](cx z) { return F.Psi(z); };
    KernelInterpolant G(r.S, values_on(Ffn, r.S), kernel);
    r.singular_values = G.singular_values;
    for (int k = 0; k < r.singular_values.size(); ++k)
        if (r.singular_values(k) > rank_tol * r.singular_values(0)) ++r.rank;
    if (r.singular_values.size() > 6) r.rank_gap = r.singular_values(6) / r.singular_values(5);
    std::vector<cx> S1(r.S.begin() + 1, r.S.end());
    KernelInterpolant G1(S1, values_on(Ffn, S1), kernel);
    for (cx z : grid) {
        Mat2c f = F.Psi(z);
        r.max_deviation = std::max(r.max_deviation, (G(z) - f).operatorNorm());
        r.ablation_deviation = std::max(r.ablation_deviation, (G1(z) - f).operatorNorm());
    }
    return r;
}

std::vector<cx> interior_grid(const DomainSpec& spec, int n, double d) {
    std::vector<cx> pts;
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int k = 0; static_cast<int>(pts.size()) < n && k < 100 * n + 1000; ++k) {
        cx z = std::polar(std::sqrt((k + 0.5) / (1.6 * n)), k * golden);
        if (std::abs(z) >= 1.0) continue;
        if (contains(spec, z).region != Region::interior || boundary_distance(spec, z) < d) continue;
        pts.push_back(z);
    }
    return pts;
}

namespace {

double boundary_sup(const DomainSpec& spec, const std::function<cx(cx)>& f, int n = 2048) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < n; ++k) s = std::max(s, std::abs(f(point(spec, BoundaryPoint{c, 2.0 * kPi * (k + 0.5) / n}))));
    return s;
}

}  // namespace

std::vector<TestFunction> spectral_test_family(const DomainSpec& spec, const ConeSample& s) {
    std::vector<TestFunction> fam;
    auto add = [&](std::string name, std::function<cx(cx)> f, double sup = -1.0) {
        if (sup < 0.0) sup = boundary_sup(spec, f);
        fam.push_back({std::move(name), std::move(f), sup});
    };
    for (int k = 1; k <= 3; ++k) add("z^" + std::to_string(k), [k](cx z) { return std::pow(z, k); });
    for (cx a : {cx(0.3, 0.0), cx(0.0, -0.5), cx(0.2, 0.6)})
        add("mobius", [a](cx z) { return (z - a) / (1.0 - std::conj(a) * z); });
    const double c1 = spec.c1, r1 = spec.r1, c2 = spec.c2, r2 = spec.r2;
    for (int k = 1; k <= 2; ++k) {
        add("hole1^" + std::to_string(k), [=](cx z) { return std::pow(r1 / (z - c1), k); });
        add("hole2^" + std::to_string(k), [=](cx z) { return std::pow(r2 / (z - c2), k); });
    }
    add("z*hole1", [=](cx z) { return z * r1 / (z - c1); });
    add("z*hole2", [=](cx z) { return z * r2 / (z - c2); });
    add("hole1*hole2", [=](cx z) { return r1 / (z - c1) * r2 / (z - c2); });
    // Generators of the sampled cone have sup norm one.
    int taken = 0;
    for (int g = 0; g < s.generators() && taken < 6; ++g) {
        const GridPoint& gp = s.generator(g);
        if (!gp.phi || g % std::max(1, s.generators() / 6) != 0) continue;
        add("phi " + gp.label(), [gp](cx z) { return gp.value(z); }, 1.0);
        ++taken;
    }
    while (static_cast<int>(fam.size()) < 20) {
        const GridPoint& gp = s.generator(0);
        int k = static_cast<int>(fam.size());
        add("z*phi", [gp, k](cx z) { return z * std::pow(gp.value(z), k % 3 + 1); }, 1.0);
    }
    fam.resize(20);
    return fam;
}

GnsReport gns_evidence(const ConeSample& s, const ConeCertificate& dual, const std::vector<Mat2c>& FS,
                       int basis_degree, int cone_samples, unsigned seed) {
    if (dual.decision != Decision::dual) throw Error("not-dual", "GNS evidence needs a dual certificate");
    const MatrixXcd& L = dual.dual.Lambda;
    const int m = s.points(), n = 2 * m;
    const DomainSpec& spec = s.spec();
    GnsReport r;
    MatrixXcd E = MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i % 2; j < n; j += 2) E(i, j) = 1.0;
    r.lambda_I = (L * E).trace().real();
    r.pairing = (L * target_matrix(FS, 1.0)).trace().real();
    double fnorm = 0.0;
    for (int k = 0; k < 2; ++k) {
        VectorXcd v(n);
        for (int i = 0; i < m; ++i) v.segment<2>(2 * i) = FS[i].col(k);
        fnorm += (v.adjoint() * L * v)(0).real();
    }
    r.pairing_operator = r.lambda_I - fnorm;

    // Degree-capped rational subspace: b(z) e_a with b in 1, z^j, (r_k / (z - c_k))^j.
    std::vector<std::function<cx(cx)>> basis{[](cx) { return cx(1.0); }};
    for (int j = 1; j <= basis_degree; ++j) {
        basis.push_back([j](cx z) { return std::pow(z, j); });
        basis.push_back([j, spec](cx z) { return std::pow(spec.r1 / (z - spec.c1), j); });
        basis.push_back([j, spec](cx z) { return std::pow(spec.r2 / (z - spec.c2), j); });
    }
    const int nb = 2 * static_cast<int>(basis.size());
    MatrixXcd V = MatrixXcd::Zero(n, nb);
    for (int i = 0; i < m; ++i)
        for (size_t k = 0; k < basis.size(); ++k) {
            cx b = basis[k](s.S()[i]);
            V(2 * i, 2 * k) = b;
            V(2 * i + 1, 2 * k + 1) = b;
        }
    MatrixXcd Gm = V.adjoint() * L * V;
    Gm = 0.5 * (Gm + Gm.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(Gm);
    const double gmax = es.eigenvalues().maxCoeff();
    r.gram_min_eig = es.eigenvalues()(0) / gmax;
    if (r.gram_min_eig < -1e-8) throw Error("semidefinite-failure", "Gram of the form is indefinite");
    std::vector<int> keep;
    for (int k = 0; k < nb; ++k)
        if (es.eigenvalues()(k) > 1e-10 * gmax) keep.push_back(k);
    r.rank = static_cast<int>(keep.size());
    MatrixXcd Q(nb, r.rank);
    for (int k = 0; k < r.rank; ++k) Q.col(k) = es.eigenvectors().col(keep[k]) / std::sqrt(es.eigenvalues()(keep[k]));
    MatrixXcd VQ = V * Q;  // values of an orthonormal family in the quotient

    for (const TestFunction& tf : spectral_test_family(spec, s)) {
        VectorXcd d(n);
        for (int i = 0; i < m; ++i) d(2 * i) = d(2 * i + 1) = tf.f(s.S()[i]);
        MatrixXcd FV = d.asDiagonal() * VQ;
        MatrixXcd P = FV.adjoint() * L * FV;
        Eigen::SelfAdjointEigenSolver<MatrixXcd> ep(0.5 * (P + P.adjoint()), Eigen::EigenvaluesOnly);
        double nrm = std::sqrt(std::max(0.0, ep.eigenvalues().maxCoeff()));
        r.spectral.emplace_back(tf.name, nrm - tf.sup_norm);
        r.spectral_max = std::max(r.spectral_max, nrm - tf.sup_norm);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> pick(0, s.generators() - 1);
    for (int k = 0; k < cone_samples; ++k) {
        VectorXcd h(n);
        for (int i = 0; i < n; ++i) h(i) = cx(nd(rng), nd(rng));
        int g = pick(rng);
        MatrixXcd K = s.block_kernel(g).cwiseProduct(h * h.adjoint());
        r.cone_min = std::min(r.cone_min, (L * K).trace().real() / h.squaredNorm());
    }
    r.cone_samples = cone_samples;
    return r;
}

}  // namespace tridisk
