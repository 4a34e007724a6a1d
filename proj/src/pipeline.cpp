#include "tridisk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tridisk {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatVersion = "tridisk-report-1";

json cval(double v, double tol) { return json{{"value", v}, {"tol", tol}}; }
json cplx(cx z) { return json::array({z.real(), z.imag()}); }

json cplx_list(const std::vector<cx>& v) {
    json a = json::array();
    for (cx z : v) a.push_back(cplx(z));
    return a;
}

json matrix_json(const Eigen::MatrixXcd& M) {
    json re = json::array(), im = json::array();
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) {
            re.push_back(M(i, j).real());
            im.push_back(M(i, j).imag());
        }
    return json{{"rows", M.rows()}, {"cols", M.cols()}, {"re", re}, {"im", im}};
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
void read(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

void require_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error("invalid-config", where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw Error("invalid-config", "unknown key " + where + "." + it.key());
}

json without_output(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("output");
    return j;
}

Mat2c diag2(cx a, cx b) {
    Mat2c M = Mat2c::Zero();
    M(0, 0) = a;
    M(1, 1) = b;
    return M;
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        require_keys(j, {"spec", "solver", "t_scan", "eta", "grid", "S_mode", "rho", "output"}, "config");
        if (j.contains("spec")) {
            const json& s = j.at("spec");
            require_keys(s, {"c1", "r1", "c2", "r2"}, "spec");
            read(s, "c1", c.spec.c1);
            read(s, "r1", c.spec.r1);
            read(s, "c2", c.spec.c2);
            read(s, "r2", c.spec.r2);
        }
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            require_keys(s, {"N", "M_factor", "eps_dirichlet", "eps_period", "eps_lin", "kappa_max"}, "solver");
            read(s, "N", c.params.N);
            read(s, "M_factor", c.params.M_factor);
            read(s, "eps_dirichlet", c.params.eps_dirichlet);
            read(s, "eps_period", c.params.eps_period);
            read(s, "eps_lin", c.params.eps_lin);
            read(s, "kappa_max", c.params.kappa_max);
        }
        if (j.contains("t_scan"))
            for (const json& p : j.at("t_scan")) c.t_scan.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        if (j.contains("eta") && !j.at("eta").is_null()) c.eta = j.at("eta").get<double>();
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            require_keys(g, {"n1", "n2", "refine"}, "grid");
            read(g, "n1", c.grid_n1);
            read(g, "n2", c.grid_n2);
            read(g, "refine", c.grid_refine);
        }
        read(j, "S_mode", c.s_mode);
        if (j.contains("rho")) {
            const json& r = j.at("rho");
            require_keys(r, {"tol", "cap", "eps_sdp", "inflation"}, "rho");
            read(r, "tol", c.rho_tol);
            read(r, "cap", c.rho_cap);
            read(r, "eps_sdp", c.eps_sdp);
            read(r, "inflation", c.inflation);
        }
        if (j.contains("output")) {
            const json& o = j.at("output");
            require_keys(o, {"dir", "cache"}, "output");
            read(o, "dir", c.out_dir);
            read(o, "cache", c.use_cache);
        }
    } catch (const json::exception& e) {
        throw Error("invalid-config", e.what());
    }
    auto probs = config_problems(c);
    if (!probs.empty()) {
        std::string msg;
        for (const auto& p : probs) msg += (msg.empty() ? "" : "; ") + p;
        throw Error("invalid-config", msg);
    }
    return c;
}

json config_to_json(const RunConfig& c) {
    json t = json::array();
    for (auto [a, b] : c.t_scan) t.push_back(json::array({a, b}));
    return json{
        {"spec", {{"c1", c.spec.c1}, {"r1", c.spec.r1}, {"c2", c.spec.c2}, {"r2", c.spec.r2}}},
        {"solver",
         {{"N", c.params.N},
          {"M_factor", c.params.M_factor},
          {"eps_dirichlet", c.params.eps_dirichlet},
          {"eps_period", c.params.eps_period},
          {"eps_lin", c.params.eps_lin},
          {"kappa_max", c.params.kappa_max}}},
        {"t_scan", t},
        {"eta", c.eta ? json(*c.eta) : json(nullptr)},
        {"grid", {{"n1", c.grid_n1}, {"n2", c.grid_n2}, {"refine", c.grid_refine}}},
        {"S_mode", c.s_mode},
        {"rho", {{"tol", c.rho_tol}, {"cap", c.rho_cap}, {"eps_sdp", c.eps_sdp}, {"inflation", c.inflation}}},
        {"output", {{"dir", c.out_dir}, {"cache", c.use_cache}}},
    };
}

json config_schema() {
    const RunConfig d;
    auto field = [](const char* type, json def, const char* desc) {
        return json{{"type", type}, {"default", def}, {"description", desc}};
    };
    return json{
        {"title", "tridisk run configuration"},
        {"type", "object"},
        {"properties",
         {{"spec",
           {{"type", "object"},
            {"properties",
             {{"c1", field("number", d.spec.c1, "center of the left hole, negative")},
              {"r1", field("number", d.spec.r1, "radius of the left hole")},
              {"c2", field("number", d.spec.c2, "center of the right hole, positive")},
              {"r2", field("number", d.spec.r2, "radius of the right hole")}}}}},
          {"solver",
           {{"type", "object"},
            {"properties",
             {{"N", field("integer", d.params.N, "series truncation per family")},
              {"M_factor", field("integer", d.params.M_factor, "collocation points per circle divided by N")},
              {"eps_dirichlet", field("number", d.params.eps_dirichlet, "boundary residual tolerance")},
              {"eps_period", field("number", d.params.eps_period, "conjugate period tolerance")},
              {"eps_lin", field("number", d.params.eps_lin, "linear solve tolerance")},
              {"kappa_max", field("number", d.params.kappa_max, "largest accepted condition number")}}}}},
          {"t_scan", field("array", json::array(), "candidate (t1, t2) pairs; empty uses the built-in scan")},
          {"eta", field("number|null", nullptr, "forced eta; null chooses eta = 2^-k, k = 3..12")},
          {"grid",
           {{"type", "object"},
            {"properties",
             {{"n1", field("integer", d.grid_n1, "grid size in t1")},
              {"n2", field("integer", d.grid_n2, "grid size in t2")},
              {"refine", field("integer", d.grid_refine, "refined square grid for the drift check; 0 disables")}}}}},
          {"S_mode", field("string", d.s_mode, "\"default\": seven-point set plus one generic point; \"seven\"")},
          {"rho",
           {{"type", "object"},
            {"properties",
             {{"tol", field("number", d.rho_tol, "bisection bracket width")},
              {"cap", field("number", d.rho_cap, "largest rho probed")},
              {"eps_sdp", field("number", d.eps_sdp, "primal residual and dual margin tolerance")},
              {"inflation", field("number", d.inflation, "tolerance inflation for dual certification")}}}}},
          {"output",
           {{"type", "object"},
            {"properties",
             {{"dir", field("string", d.out_dir, "output directory")},
              {"cache", field("boolean", d.use_cache, "reuse stage reports keyed by every solver field")}}}}}}},
    };
}

std::vector<std::string> config_problems(const RunConfig& c) {
    std::vector<std::string> p = tridisk::validate(c.spec);
    const SolverParams& s = c.params;
    if (s.N < 4) p.push_back("solver.N must be at least 4");
    if (s.M_factor < 2) p.push_back("solver.M_factor must be at least 2");
    for (auto [name, v] : {std::pair{"solver.eps_dirichlet", s.eps_dirichlet}, {"solver.eps_period", s.eps_period},
                           {"solver.eps_lin", s.eps_lin}, {"solver.kappa_max", s.kappa_max}, {"rho.tol", c.rho_tol},
                           {"rho.eps_sdp", c.eps_sdp}, {"rho.inflation", c.inflation}, {"rho.cap", c.rho_cap}})
        if (!(v > 0.0)) p.push_back(std::string(name) + " must be positive");
    if (c.grid_n1 < 1 || c.grid_n2 < 1) p.push_back("grid sizes must be positive");
    if (c.grid_refine < 0) p.push_back("grid.refine must be nonnegative");
    if (c.eta && !(*c.eta >= 0.0 && *c.eta < 1.0)) p.push_back("eta must lie in [0, 1)");
    if (c.s_mode != "default" && c.s_mode != "seven") p.push_back("S_mode must be \"default\" or \"seven\"");
    return p;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string cache_key(const RunConfig& c, const std::string& stage) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(std::string(kFormatVersion) + "|" + stage + "|" +
                                                        without_output(c).dump())));
    return buf;
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"validate", "harmonic", "inner", "theta",         "fay",
                                                "psi",      "rho",      "realize", "counterexample"};
    return names;
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {}

const Surface& Pipeline::surface() {
    if (!surface_) surface_ = get_surface(cfg_.spec, cfg_.params);
    return *surface_;
}

const FayKernel& Pipeline::gram() {
    if (!gram_) gram_ = fay_kernel_gram(cfg_.spec, cx(0.0), 32, 512, cfg_.params);
    return *gram_;
}

const FayTheta& Pipeline::K0() {
    if (!K0_) {
        surface();
        fit_ = fit_e(surface_, cx(0.0), gram());
        K0_.emplace(surface_, cx(0.0), fit_->e);
    }
    return *K0_;
}

const NonrealT& Pipeline::t() {
    if (!t_) t_ = find_nonreal_t(cfg_.spec, cfg_.t_scan, cfg_.params);
    return *t_;
}

const MatrixInner& Pipeline::Psi() {
    if (!psi_) {
        const NonrealT& tt = t();
        double eta;
        if (cfg_.eta) {
            eta = *cfg_.eta;
        } else {
            eta_choice_ = choose_eta(cfg_.spec, tt.t1, tt.t2, K0(), cfg_.params);
            eta = eta_choice_->eta;
        }
        psi_ = build_Psi(cfg_.spec, eta, tt.t1, tt.t2, cfg_.params);
    }
    return *psi_;
}

std::vector<cx> Pipeline::S() {
    return cfg_.s_mode == "seven" ? uniqueness_points(Psi().zd) : default_S(Psi().zd);
}

ConeSample Pipeline::cone(int n1, int n2) {
    const NonrealT& tt = t();
    const double t1 = tt.t1, t2 = tt.t2;
    return ConeSample(cfg_.spec, S(), sample_Pi(cfg_.spec, n1, n2, {{t1, t2}, {-t1, -t2}, {t1, -t2}, {-t1, t2}},
                                                  cfg_.params));
}

SdpOptions Pipeline::sdp() const {
    SdpOptions o;
    o.eps = cfg_.eps_sdp;
    o.inflation = cfg_.inflation;
    return o;
}

StageResult Pipeline::validate() {
    StageResult r;
    auto probs = config_problems(cfg_);
    if (!probs.empty()) {
        std::string msg;
        for (const auto& p : probs) msg += (msg.empty() ? "" : "; ") + p;
        throw Error("invalid-config", msg);
    }
    const DomainSpec& s = cfg_.spec;
    std::array<double, 3> h0{};
    for (int j = 0; j < 3; ++j) h0[j] = harmonic_measure(s, j, cfg_.params).value(0.0);
    const double sum = h0[0] + h0[1] + h0[2];
    bool triple = true;
    for (double v : h0) triple = triple && std::abs(v - 1.0 / 3.0) <= 1e-6;
    const SeriesHarmonic& h1 = harmonic_measure(s, 1, cfg_.params);
    const double x_lo = s.c1 + s.r1, x_hi = s.c2 - s.r2;
    const double x_probe = x_lo + 0.01 * (x_hi - x_lo);
    const double h1x = h1.value(x_probe);
    json rec = nullptr;
    if (triple) {
        // Move the point where h_1 = 2/3 to the origin.
        double a = x_lo + 1e-6, b = x_hi - 1e-6;
        for (int k = 0; k < 100; ++k) {
            double m = 0.5 * (a + b);
            (h1.value(m) > 2.0 / 3.0 ? a : b) = m;
        }
        rec = json{{"x", 0.5 * (a + b)}, {"mobius", "z -> (z - x) / (1 - x z)"}};
    }
    r.report = json{
        {"spec", config_to_json(cfg_).at("spec")},
        {"spec_valid", true},
        {"h_at_0", json::array({h0[0], h0[1], h0[2]})},
        {"h_sum_residual", cval(std::abs(sum - 1.0), 1e-8)},
        {"triple_zero_at_0_possible", triple},
        {"h1_probe", {{"x", x_probe}, {"h1", h1x}, {"above_one_third", h1x > 1.0 / 3.0}}},
        {"recenter", rec},
    };
    return r;
}

StageResult Pipeline::harmonic() {
    StageResult r;
    const DomainSpec& s = cfg_.spec;
    json solves = json::array();
    std::array<const SeriesHarmonic*, 3> h{};
    for (int j = 0; j < 3; ++j) {
        h[j] = &harmonic_measure(s, j, cfg_.params);
        solves.push_back(json{{"j", j},
                              {"boundary_residual", cval(h[j]->residual, cfg_.params.eps_dirichlet)},
                              {"condition", h[j]->cond},
                              {"conjugate_periods", json::array({h[j]->conjugate_period(1), h[j]->conjugate_period(2)})}});
    }
    double sum_res = 0.0;
    for (cx z : interior_grid(s, 1000, 1e-3))
        sum_res = std::max(sum_res, std::abs(h[0]->value(z) + h[1]->value(z) + h[2]->value(z) - 1.0));
    CsvTable q{"Q", {"component", "angle", "Q0", "Q1", "Q2"}, {}};
    int violations = 0;
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 360; ++k) {
            BoundaryPoint bp{c, 2.0 * kPi * (k + 0.5) / 360.0};
            std::vector<std::string> row{std::to_string(c), num(bp.angle)};
            for (int j = 0; j < 3; ++j) {
                double v = normal_derivative_Q(s, j, bp, cfg_.params);
                if ((j == c) != (v > 0.0)) ++violations;
                row.push_back(num(v));
            }
            q.rows.push_back(row);
        }
    CriticalPoints w = green_critical_points(s, cfg_.params);
    r.report = json{
        {"solves", solves},
        {"sum_residual_1000", cval(sum_res, 1e-8)},
        {"Q_samples", 3 * 360},
        {"Q_sign_violations", violations},
        {"green_critical_points", json::array({w.w1, w.w2})},
    };
    r.tables.push_back(q);
    return r;
}

StageResult Pipeline::inner() {
    StageResult r;
    const NonrealT& tt = t();
    CsvTable scan{"t_scan", {"t1", "t2", "accepted", "reason"}, {}};
    for (const auto& e : tt.scan) scan.rows.push_back({num(e.t1), num(e.t2), e.accepted ? "1" : "0", e.reason});
    InnerEvaluator psi = psi_t(cfg_.spec, tt.t1, tt.t2, cfg_.params);
    auto hs = h_sum_residuals(cfg_.spec, psi.zeros, cfg_.params);
    PiGrid grid = sample_Pi(cfg_.spec, cfg_.grid_n1, cfg_.grid_n2, {}, cfg_.params);
    CsvTable gt{"grid", {"t1", "t2", "winding", "unimodularity", "zeros"}, {}};
    double worst = 0.0;
    for (const GridPoint& g : grid.points) {
        double u = boundary_unimodularity_residual(*g.phi);
        worst = std::max(worst, u);
        std::string zs;
        for (cx z : g.phi->zeros) zs += (zs.empty() ? "" : " ") + num(z.real()) + (z.imag() < 0 ? "" : "+") + num(z.imag()) + "i";
        gt.rows.push_back({num(g.t1), num(g.t2), std::to_string(g.phi->winding), num(u), zs});
    }
    r.report = json{
        {"t", json::array({tt.t1, tt.t2})},
        {"zeros", cplx_list(psi.zeros)},
        {"winding", psi.winding},
        {"unimodularity", cval(boundary_unimodularity_residual(psi), 1e-4)},
        {"h_sum_residuals", json::array({cval(hs[0], 1e-6), cval(hs[1], 1e-6)})},
        {"grid", {{"n1", cfg_.grid_n1}, {"n2", cfg_.grid_n2}, {"points", grid.points.size()},
                  {"dropped", grid.dropped}, {"refined", grid.refined}, {"max_unimodularity", cval(worst, 1e-4)}}},
    };
    r.tables.push_back(scan);
    r.tables.push_back(gt);
    return r;
}

StageResult Pipeline::theta() {
    StageResult r;
    const Surface& sf = surface();
    json e = nullptr;
    if (sf.ctx.estar) {
        const HalfPeriod& hp = *sf.ctx.estar;
        e = json{{"u", json::array({hp.u(0), hp.u(1)})},
                 {"v", json::array({hp.v(0), hp.v(1)})},
                 {"e", json::array({cplx(hp.e(0)), cplx(hp.e(1))})},
                 {"theta", cval(std::abs(sf.ctx.theta(hp.e)), 1e-10)}};
    }
    BoundaryZero bz = theta_boundary_zero(sf.ctx, sf.aj);
    r.report = json{
        {"P", json::array({json::array({sf.pm.P(0, 0), sf.pm.P(0, 1)}), json::array({sf.pm.P(1, 0), sf.pm.P(1, 1)})})},
        {"T", json::array({json::array({sf.pm.T(0, 0), sf.pm.T(0, 1)}), json::array({sf.pm.T(1, 0), sf.pm.T(1, 1)})})},
        {"asymmetry", cval(sf.pm.asymmetry, 1e-8)},
        {"lambda_min", sf.pm.lambda_min},
        {"odd_half_period", e},
        {"boundary_zero", {{"component", bz.q.component}, {"angle", bz.q.angle}, {"point", cplx(bz.point)},
                           {"residual", cval(bz.residual, 1e-8)}}},
    };
    return r;
}

StageResult Pipeline::fay() {
    StageResult r;
    const FayKernel& g = gram();
    const FayTheta& k = K0();
    CsvTable probes{"kernel_probes", {"zeta_re", "zeta_im", "z_re", "z_im", "gram_re", "gram_im", "theta_re", "theta_im"}, {}};
    double diff = 0.0;
    for (auto [zeta, z] : fit_probes(cfg_.spec, 6, true)) {
        cx a = g(zeta, z), b = k.front(zeta, z);
        diff = std::max(diff, std::abs(a - b));
        probes.rows.push_back({num(zeta.real()), num(zeta.imag()), num(z.real()), num(z.imag()), num(a.real()),
                               num(a.imag()), num(b.real()), num(b.imag())});
    }
    double at0 = 0.0;
    for (cx zeta : {cx(0.2, 0.3), cx(-0.1, -0.6), cx(0.7, 0.1)}) at0 = std::max(at0, std::abs(g(zeta, 0.0) - 1.0));
    const cx a(0.1, 0.3);
    Residues rt = residues_theta(k, a), rr = residues_reflection(g, a, cfg_.params);
    double rdiff = std::max(std::abs(rt.R[0] - rr.R[0]), std::abs(rt.R[1] - rr.R[1]));
    r.report = json{
        {"gram", {{"basis_size", g.basis_size}, {"min_pivot_ratio", g.min_pivot_ratio}}},
        {"K_at_0", cval(at0, 1e-6)},
        {"fit", {{"e", json::array({cplx(fit_->e(0)), cplx(fit_->e(1))})},
                 {"train_rms", fit_->train_rms},
                 {"holdout_max", cval(fit_->holdout_max, 1e-4)}}},
        {"theta_gram_agreement", cval(diff, 1e-4)},
        {"green_critical_points", json::array({surface().w.w1, surface().w.w2})},
        {"residues",
         {{"a", cplx(a)},
          {"theta", json::array({cplx(rt.R[0]), cplx(rt.R[1])})},
          {"reflection", json::array({cplx(rr.R[0]), cplx(rr.R[1])})},
          {"agreement", cval(rdiff, 1e-6)}}},
    };
    r.tables.push_back(probes);
    return r;
}

namespace {

json zero_data_json(const ZeroData& zd) {
    json d = json::array();
    for (int j = 0; j < 4; ++j)
        d.push_back(json{{"a", cplx(zd.a[j])}, {"delta", json::array({cplx(zd.delta[j](0)), cplx(zd.delta[j](1))})}});
    return json{{"zeros", cplx_list(zd.zeros)}, {"winding", zd.winding}, {"complete", zd.complete}, {"points", d}};
}

json zero_set_json(const ZeroSetReport& z) {
    return json{{"passes", z.passes},
                {"failures", z.failures},
                {"psi0_norm", cval(z.psi0_norm, kEpsMat)},
                {"zero_separation", cval(z.zero_separation, 2 * kEpsSep)},
                {"collinearity", cval(z.collinearity, 2 * kEpsSep)},
                {"pole_separation", cval(z.pole_separation, 2 * kEpsSep)},
                {"pattern", cval(z.pattern, kPatternMax)},
                {"sigma_min", z.sigma_min},
                {"condition", cval(z.condition, kConditionMax)}};
}

json witness_json(const Witness& w) {
    return json{{"found", w.found},
                {"commutator", cval(w.commutator, kEpsDiag)},
                {"pairs", json::array({cplx(w.pairs[0]), cplx(w.pairs[1]), cplx(w.pairs[2]), cplx(w.pairs[3])})}};
}

json psione_json(const PsiOneReport& p) {
    return json{{"unitarity", cval(p.unitarity, kEpsMat)},   {"at0", cval(p.at0, kEpsMat)},
                {"at1", cval(p.at1, kEpsMat)},               {"q1_e1", cval(p.q1_e1, kEpsMat)},
                {"q1c_e2", cval(p.q1c_e2, kEpsMat)},         {"q2_vplus", cval(p.q2_vplus, kEpsMat)},
                {"q2c_vminus", cval(p.q2c_vminus, kEpsMat)}, {"diagonal_at_eta0", cval(p.diagonal_at_eta0, kEpsMat)}};
}

json dual_json(const DualCheck& d, double tol) {
    return json{{"valid", d.valid},
                {"margin", cval(d.margin, tol)},
                {"shift", d.shift},
                {"slice_min", cval(d.slice_min, tol)},
                {"value", d.value},
                {"Lambda", matrix_json(d.Lambda)}};
}

}  // namespace

StageResult Pipeline::psi() {
    StageResult r;
    const MatrixInner& m = Psi();
    ZeroSetReport zr = standard_zero_set_check(m, K0(), 2 * kEpsSep);
    Witness w = diagonalizability_witness([&](cx z) { return m.Psi(z); });
    CsvTable scan{"eta_scan", {"eta", "passes", "pattern", "sigma_min", "condition", "failures"}, {}};
    if (eta_choice_)
        for (const auto& e : eta_choice_->scan) {
            std::string f;
            for (const auto& x : e.report.failures) f += (f.empty() ? "" : "; ") + x;
            scan.rows.push_back({num(e.eta), e.report.passes ? "1" : "0", num(e.report.pattern),
                                 num(e.report.sigma_min), num(e.report.condition), f});
        }
    r.report = json{
        {"t", json::array({m.Hm.t1, m.Hm.t2})},
        {"eta", m.eta()},
        {"eta_forced", cfg_.eta.has_value()},
        {"zero_data", zero_data_json(m.zd)},
        {"standard_zero_set", zero_set_json(zr)},
        {"psione", psione_json(psione_report(m, cfg_.params))},
        {"witness", witness_json(w)},
    };
    r.tables.push_back(scan);
    return r;
}

json Pipeline::rho_block(const ConeSample& s, const std::vector<Mat2c>& FS, std::vector<CsvTable>* tables,
                         const std::string& tag, RhoBracket* out) {
    RhoBracket b = rho_bisect(s, FS, cfg_.rho_tol, cfg_.rho_cap, sdp());
    CsvTable tr{"rho_trace_" + tag, {"rho", "decision", "margin_or_residual", "iterations"}, {}};
    for (const RhoStep& st : b.trace)
        tr.rows.push_back({num(st.rho), to_string(st.decision), num(st.margin), std::to_string(st.iterations)});
    if (tables) tables->push_back(tr);
    const double tol = cfg_.eps_sdp * cfg_.inflation;
    json j{{"grid", tag},
           {"generators", s.generators()},
           {"dropped", s.grid().dropped},
           {"refined", s.grid().refined.size()},
           {"absorb_lower_bound", absorb_lower_bound(FS)},
           {"rho_lo", b.lo},
           {"rho_hi", b.hi},
           {"hi_found", b.hi_found},
           {"stalled", b.stalled},
           {"bracket_tol", cfg_.rho_tol},
           {"lo_residual", cval(b.lo_cert.primal_residual, cfg_.eps_sdp)}};
    if (b.hi_found) j["dual"] = dual_json(b.hi_cert.dual, tol);
    if (out) *out = std::move(b);
    return j;
}

StageResult Pipeline::rho() {
    StageResult r;
    const MatrixInner& m = Psi();
    ConeSample s = cone(cfg_.grid_n1, cfg_.grid_n2);
    auto FS = values_on([&](cx z) { return m.Psi(z); }, s.S());
    RhoBracket b;
    json main = rho_block(s, FS, &r.tables, std::to_string(cfg_.grid_n1) + "x" + std::to_string(cfg_.grid_n2), &b);
    json refined = nullptr;
    double drift = NAN;
    if (cfg_.grid_refine > 0) {
        ConeSample s2 = cone(cfg_.grid_refine, cfg_.grid_refine);
        RhoBracket b2;
        refined = rho_block(s2, FS, &r.tables, std::to_string(cfg_.grid_refine) + "x" + std::to_string(cfg_.grid_refine), &b2);
        drift = std::max(std::abs(b.lo - b2.lo), std::abs(b.hi - b2.hi));
    }
    const bool separated = b.hi_found && b.hi < 1.0 && b.hi_cert.dual.valid;
    r.exit_code = separated ? kExitEvidence : (b.lo >= 1.0 - 1e-3 ? kExitNoSeparation : kExitInconclusive);
    r.report = json{{"eta", m.eta()},
                    {"S", cplx_list(s.S())},
                    {"bracket", main},
                    {"refined", refined},
                    {"drift", std::isnan(drift) ? json(nullptr) : cval(drift, 1e-2)},
                    {"separated", separated}};
    return r;
}

StageResult Pipeline::realize() {
    StageResult r;
    const NonrealT& tt = t();
    InnerEvaluator a = psi_t(cfg_.spec, tt.t1, tt.t2, cfg_.params), b = psi_t(cfg_.spec, -tt.t1, -tt.t2, cfg_.params);
    ConeSample s = cone(cfg_.grid_n1, cfg_.grid_n2);
    auto F = [&](cx z) { return diag2(a.phi(z), b.phi(z)); };
    auto FS = values_on(F, s.S());
    ConeCertificate c = feasibility(s, FS, 1.0, sdp());
    json real = nullptr;
    if (c.decision == Decision::primal) {
        Colligation col = tridisk::realize(s, FS, c, 1e-10);
        double ws = 0.0, contr = 0.0, ident = 0.0;
        for (size_t i = 0; i < FS.size(); ++i) ws = std::max(ws, (col.W(s.S()[i]) - FS[i]).norm());
        std::vector<cx> grid = interior_grid(cfg_.spec, 200);
        for (cx z : grid) contr = std::max(contr, col.W(z).operatorNorm() - 1.0);
        for (int k = 0; k < 20; ++k) ident = std::max(ident, col.transfer_identity_residual(grid[k], grid[199 - k]));
        real = json{{"state_dim", col.state_dim()},
                    {"unitarity", cval(col.unitarity_residual(), 1e-10)},
                    {"W_minus_F_on_S", cval(ws, 1e-6)},
                    {"contractivity_excess", cval(contr, 1e-8)},
                    {"transfer_identity", cval(ident, 1e-8)}};
    }
    const MatrixInner& m = Psi();
    const FayKernel& g = gram();
    UniquenessReport u = uniqueness_check(m, [&](cx z, cx w) { return g(z, w); }, interior_grid(cfg_.spec, 200));
    json sv = json::array();
    for (int k = 0; k < u.singular_values.size(); ++k) sv.push_back(u.singular_values(k));
    r.report = json{
        {"diagonal", {{"t", json::array({tt.t1, tt.t2})},
                      {"decision", to_string(c.decision)},
                      {"primal_residual", cval(c.primal_residual, cfg_.eps_sdp)},
                      {"realization", real}}},
        {"uniqueness", {{"eta", m.eta()},
                        {"S", cplx_list(u.S)},
                        {"singular_values", sv},
                        {"rank", u.rank},
                        {"rank_gap", u.rank_gap},
                        {"max_deviation", cval(u.max_deviation, 1e-4)},
                        {"ablation_deviation", u.ablation_deviation}}},
    };
    if (c.decision != Decision::primal) r.exit_code = kExitInconclusive;
    return r;
}

StageResult Pipeline::counterexample() {
    StageResult r;
    const MatrixInner& m = Psi();
    ZeroSetReport zr = standard_zero_set_check(m, K0(), 2 * kEpsSep);
    Witness w = diagonalizability_witness([&](cx z) { return m.Psi(z); });
    ConeSample s = cone(cfg_.grid_n1, cfg_.grid_n2);
    auto FS = values_on([&](cx z) { return m.Psi(z); }, s.S());
    RhoBracket b;
    json main = rho_block(s, FS, &r.tables, std::to_string(cfg_.grid_n1) + "x" + std::to_string(cfg_.grid_n2), &b);
    json refined = nullptr, drift = nullptr;
    if (cfg_.grid_refine > 0) {
        ConeSample s2 = cone(cfg_.grid_refine, cfg_.grid_refine);
        RhoBracket b2;
        refined = rho_block(s2, FS, &r.tables, std::to_string(cfg_.grid_refine) + "x" + std::to_string(cfg_.grid_refine), &b2);
        drift = cval(std::max(std::abs(b.lo - b2.lo), std::abs(b.hi - b2.hi)), 1e-2);
    }
    const bool separated = b.hi_found && b.hi < 1.0 && b.hi_cert.dual.valid;
    json gns = nullptr;
    if (separated) {
        GnsReport g = gns_evidence(s, b.hi_cert, FS);
        json spec_rows = json::array();
        for (auto& [name, v] : g.spectral) spec_rows.push_back(json{{"f", name}, {"excess", v}});
        gns = json{{"lambda_I", g.lambda_I},
                   {"pairing", g.pairing},
                   {"pairing_operator", g.pairing_operator},
                   {"gram_min_eig", cval(g.gram_min_eig, 1e-8)},
                   {"rank", g.rank},
                   {"cone_min", g.cone_min},
                   {"cone_samples", g.cone_samples},
                   {"spectral_max", g.spectral_max},
                   {"spectral", spec_rows}};
    }
    std::string verdict;
    if (separated && w.found) {
        verdict = "separation-certified";
        r.exit_code = kExitEvidence;
    } else if (b.lo >= 1.0 - 1e-3) {
        verdict = w.found ? "no-separation" : "diagonalizable-candidate";
        r.exit_code = kExitNoSeparation;
    } else {
        verdict = "inconclusive";
        r.exit_code = kExitInconclusive;
    }
    r.report = json{
        {"t", json::array({m.Hm.t1, m.Hm.t2})},
        {"eta", m.eta()},
        {"zero_data", zero_data_json(m.zd)},
        {"standard_zero_set", zero_set_json(zr)},
        {"witness", witness_json(w)},
        {"rho", main},
        {"rho_refined", refined},
        {"drift", drift},
        {"gns", gns},
        {"verdict", verdict},
    };
    return r;
}

StageResult Pipeline::run(const std::string& stage) {
    if (stage == "validate") return validate();
    if (stage == "harmonic") return harmonic();
    if (stage == "inner") return inner();
    if (stage == "theta") return theta();
    if (stage == "fay") return fay();
    if (stage == "psi") return psi();
    if (stage == "rho") return rho();
    if (stage == "realize") return realize();
    if (stage == "counterexample") return counterexample();
    throw Error("invalid-argument", "unknown stage " + stage);
}

namespace {

json tables_json(const std::vector<CsvTable>& tables) {
    json a = json::array();
    for (const auto& t : tables) a.push_back(json{{"name", t.name}, {"header", t.header}, {"rows", t.rows}});
    return a;
}

std::vector<CsvTable> tables_from_json(const json& a) {
    std::vector<CsvTable> out;
    for (const json& t : a)
        out.push_back({t.at("name").get<std::string>(), t.at("header").get<std::vector<std::string>>(),
                       t.at("rows").get<std::vector<std::vector<std::string>>>()});
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void write_csv(const fs::path& p, const CsvTable& t) {
    std::ofstream f(p);
    for (size_t i = 0; i < t.header.size(); ++i) f << (i ? "," : "") << csv_field(t.header[i]);
    f << "\n";
    for (const auto& row : t.rows) {
        for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << csv_field(row[i]);
        f << "\n";
    }
}

}  // namespace

int run_stage(const std::string& stage, const RunConfig& cfg, json* report) {
    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "cache");
    StageResult res;
    const std::string key = cache_key(cfg, stage);
    const fs::path cached = out / "cache" / (stage + "-" + key + ".json");
    bool hit = false;
    if (cfg.use_cache && fs::exists(cached)) {
        std::ifstream f(cached);
        json c = json::parse(f, nullptr, false);
        if (!c.is_discarded() && c.value("key", "") == key) {
            res.report = c.at("report");
            res.tables = tables_from_json(c.at("tables"));
            res.exit_code = c.at("exit_code").get<int>();
            hit = true;
        }
    }
    if (!hit) {
        try {
            Pipeline p(cfg);
            res = p.run(stage);
            json head{{"stage", stage}, {"format", kFormatVersion}, {"cache_key", key}, {"exit_code", res.exit_code}};
            head.update(res.report);
            res.report = head;
        } catch (const Error& e) {
            res.report = json{{"stage", stage}, {"format", kFormatVersion}, {"cache_key", key},
                              {"exit_code", kExitStageFailure}, {"error", e.code()}, {"message", e.what()}};
            res.tables.clear();
            res.exit_code = kExitStageFailure;
        }
        if (cfg.use_cache && res.exit_code != kExitStageFailure) {
            std::ofstream f(cached);
            f << json{{"key", key}, {"report", res.report}, {"tables", tables_json(res.tables)},
                      {"exit_code", res.exit_code}}
                     .dump();
        }
    }
    std::ofstream(out / (stage + ".json")) << res.report.dump(2) << "\n";
    for (const auto& t : res.tables) write_csv(out / (stage + "_" + t.name + ".csv"), t);
    if (report) *report = res.report;
    return res.exit_code;
}

}  // namespace tridisk
