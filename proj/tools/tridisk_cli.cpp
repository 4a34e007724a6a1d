#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tridisk/pipeline.hpp"

using namespace tridisk;

int main(int argc, char** argv) {
    CLI::App app{"Rational dilation counterexample pipeline on a triply connected circular domain"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, out_dir;
    int grid_refine = -1;
    bool no_cache = false;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--grid-refine", grid_refine, "refined grid edge for the drift check (0 disables)");
    app.add_flag("--no-cache", no_cache, "recompute even when a cached report exists");
    for (const std::string& s : stage_names()) app.add_subcommand(s, "run the " + s + " stage");
    app.add_subcommand("schema", "print the configuration schema with defaults");
    CLI11_PARSE(app, argc, argv);

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "schema") {
        std::cout << config_schema().dump(2) << "\n";
        return 0;
    }
    RunConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw Error("invalid-config", "cannot open " + config_path);
            json j = json::parse(f, nullptr, false);
            if (j.is_discarded()) throw Error("invalid-config", "malformed JSON in " + config_path);
            cfg = config_from_json(j);
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (grid_refine >= 0) cfg.grid_refine = grid_refine;
        if (no_cache) cfg.use_cache = false;
        auto probs = config_problems(cfg);
        if (!probs.empty()) throw Error("invalid-config", probs.front());
    } catch (const Error& e) {
        std::cout << json{{"stage", cmd}, {"exit_code", kExitStageFailure}, {"error", e.code()}, {"message", e.what()}}.dump(2)
                  << "\n";
        return kExitStageFailure;
    }
    json report;
    int code = run_stage(cmd, cfg, &report);
    std::cout << report.dump(2) << "\n";
    return code;
}
