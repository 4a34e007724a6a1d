#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tridisk/agler.hpp"

namespace tridisk {

using json = nlohmann::ordered_json;

struct RunConfig {
    DomainSpec spec;
    SolverParams params;
    std::vector<std::pair<double, double>> t_scan;  // empty: built-in scan
    std::optional<double> eta;                      // forced eta; otherwise 2^-k, k = 3..12, by scan
    int grid_n1 = 8, grid_n2 = 8;
    int grid_refine = 12;                           // refined grid edge for the drift check; 0 disables
    std::string s_mode = "default";                 // "default" (eight points) or "seven"
    double rho_tol = 1e-4;
    double rho_cap = 2.0;
    double eps_sdp = kEpsSdp;
    double inflation = 10.0;
    std::string out_dir = "tridisk_out";
    bool use_cache = true;
};

// Errors: "invalid-config".
RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);
// Every field with its default value and a one-line description.
json config_schema();
// Violated invariants, empty when valid.
std::vector<std::string> config_problems(const RunConfig& c);

// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& s);
// Key over every solver-relevant field of the config, the stage name and the report format version.
std::string cache_key(const RunConfig& c, const std::string& stage);

struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct StageResult {
    json report;
    std::vector<CsvTable> tables;
    int exit_code = 0;
};

// Exit codes.
constexpr int kExitEvidence = 0;      // stage finished; for rho and counterexample: separation certified
constexpr int kExitNoSeparation = 1;  // rho / counterexample: primal up to the cap, no dual certificate
constexpr int kExitInconclusive = 2;
constexpr int kExitStageFailure = 3;

const std::vector<std::string>& stage_names();

// Lazily built shared objects of one run.
class Pipeline {
public:
    explicit Pipeline(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }

    StageResult validate();
    StageResult harmonic();
    StageResult inner();
    StageResult theta();
    StageResult fay();
    StageResult psi();
    StageResult rho();
    StageResult realize();
    StageResult counterexample();

    StageResult run(const std::string& stage);

private:
    RunConfig cfg_;
    std::shared_ptr<const Surface> surface_;
    std::optional<FayKernel> gram_;
    std::optional<FitResult> fit_;
    std::optional<FayTheta> K0_;
    std::optional<NonrealT> t_;
    std::optional<EtaChoice> eta_choice_;
    std::optional<MatrixInner> psi_;

    const Surface& surface();
    const FayKernel& gram();
    const FayTheta& K0();
    const NonrealT& t();
    const MatrixInner& Psi();
    std::vector<cx> S();
    ConeSample cone(int n1, int n2);
    SdpOptions sdp() const;
    json rho_block(const ConeSample& s, const std::vector<Mat2c>& FS, std::vector<CsvTable>* tables,
                   const std::string& tag, RhoBracket* out);
};

// Runs a stage with caching and writes <out>/<stage>.json plus CSV tables. Stage failures are reported
// as {"stage", "error", "message"} with exit code 3.
int run_stage(const std::string& stage, const RunConfig& cfg, json* report = nullptr);

}  // namespace tridisk
