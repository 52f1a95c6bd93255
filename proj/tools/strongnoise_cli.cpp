// Command-line front end: strongnoise --mode <mode> [--config file.ini] [--key value ...]

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment.hpp"

int main(int argc, char** argv) {
    using namespace strongnoise;
    CLI::App app{"Strong-noise two-state experiments"};
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");

    cli::ExperimentConfig cfg;
    std::string output_dir = "out";
    app.add_option("--mode", cfg.mode, "Experiment mode")->required()->check(CLI::IsMember(cli::modes()));
    app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    app.add_option("--output_dir,--output-dir", output_dir, "Directory for CSV files and manifest.json")
        ->envname("STRONGNOISE_OUTPUT_DIR")
        ->capture_default_str();
    app.add_option("--workers", cfg.workers, "Worker threads for ensembles")->check(CLI::Range(1u, 1024u));

    std::map<std::string, std::vector<std::string>> raw;
    std::map<std::string, CLI::Option*> options;
    for (const auto& key : cli::parameter_keys()) {
        auto* opt = app.add_option("--" + key, raw[key], "Model parameter");
        if (key == "gammas" || key == "criteria") opt->delimiter(',')->expected(1, 1000);
        else opt->expected(1);
        options[key] = opt;
    }

    CLI11_PARSE(app, argc, argv);
    for (const auto& [key, opt] : options)
        if (opt->count() > 0) {
            std::string joined;
            for (const auto& v : raw[key]) joined += (joined.empty() ? "" : ",") + v;
            cfg.params[key] = joined;
        }
    cfg.output_dir = output_dir;

    try {
        const auto result = cli::run(cfg, [](const CriterionResult& r) {
            std::printf("criterion %2d %-24s %s (%.1f s)\n", r.id, r.name.c_str(), r.passed ? "PASS" : "FAIL",
                        r.seconds);
            std::fflush(stdout);
        });
        std::printf("wrote %zu files and manifest.json to %s\n", result.files.size(), cfg.output_dir.c_str());
        if (cfg.mode == "validate") return result.summary["passed"] == result.summary["total"] ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
