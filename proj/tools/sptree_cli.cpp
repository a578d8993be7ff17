// Experiment runner: each registered experiment is a subcommand; common
// flags --seed/--config/--out/--replicas; key=value overrides via --set.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sptree/config.hpp"
#include "sptree/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"spatial-tree simulation and verification toolkit"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "enumerate the registered experiments");

    struct Options {
        std::uint64_t seed = 20090401;
        std::string config_path;
        std::string out_dir = "out";
        std::int64_t replicas = -1;
        std::vector<std::string> overrides;
    };
    std::map<std::string, Options> options;
    std::map<std::string, CLI::App*> subs;
    for (const auto& info : sptree::experiment_registry()) {
        auto* sub = app.add_subcommand(info.name, info.description);
        auto& opt = options[info.name];
        sub->add_option("--seed", opt.seed, "64-bit RNG seed");
        sub->add_option("--config", opt.config_path, "key = value config file");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--replicas", opt.replicas,
                        "replica count (maps to the experiment's replica key)");
        sub->add_option("--set", opt.overrides, "extra key=value overrides")
            ->expected(-1);
        subs[info.name] = sub;
    }

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) {
        for (const auto& info : sptree::experiment_registry())
            std::printf("%-22s %s\n", info.name.c_str(), info.description.c_str());
        return 0;
    }

    for (const auto& info : sptree::experiment_registry()) {
        if (!subs[info.name]->parsed()) continue;
        const auto& opt = options[info.name];
        sptree::ExperimentConfig cfg;
        cfg.experiment = info.name;
        cfg.seed = opt.seed;
        if (!opt.config_path.empty()) cfg.load_file(opt.config_path);
        if (opt.replicas >= 0) {
            // each experiment names its replica-like knob differently
            if (info.name == "cov-check") cfg.set("replicas", std::to_string(opt.replicas));
            else if (info.name == "walk-scaling") cfg.set("replicas", std::to_string(opt.replicas));
            else if (info.name == "spectral-dim") cfg.set("walks", std::to_string(opt.replicas));
            else if (info.name == "bm-properties") cfg.set("runs", std::to_string(opt.replicas));
            else if (info.name == "superprocess-sanity") cfg.set("forests", std::to_string(opt.replicas));
            else if (info.name == "mass-identity") cfg.set("excursions", std::to_string(opt.replicas));
            else if (info.name == "tour-convergence") cfg.set("trees", std::to_string(opt.replicas));
            else if (info.name == "hausdorff-calibrate") cfg.set("reps", std::to_string(opt.replicas));
            else if (info.name == "hausdorff-verify") cfg.set("paths_per_duration", std::to_string(opt.replicas));
            else if (info.name == "reduced-subtree-check") cfg.set("pairs", std::to_string(opt.replicas));
            else if (info.name == "alpha-uniformity") cfg.set("trees", std::to_string(opt.replicas));
        }
        for (const auto& kv : opt.overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "--set expects key=value, got `%s`\n", kv.c_str());
                return 2;
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        try {
            const auto t0 = std::chrono::steady_clock::now();
            sptree::Report report = sptree::run_experiment(cfg, opt.out_dir);
            const auto t1 = std::chrono::steady_clock::now();
            const double ms =
                std::chrono::duration<double, std::milli>(t1 - t0).count();
            {
                // timing lives outside the report so reruns stay bit-identical
                std::ofstream timing(opt.out_dir + "/timing.txt");
                timing << report.experiment << " wall_ms " << ms << '\n';
            }
            for (const auto& m : report.metrics) {
                std::printf("  %-28s %-14.6g %-36s %s\n", m.name.c_str(), m.value,
                            m.threshold.c_str(), m.pass ? "pass" : "FAIL");
            }
            std::printf("%s: %s (report: %s/report.json)\n", report.experiment.c_str(),
                        report.pass ? "PASS" : "FAIL", opt.out_dir.c_str());
            return report.pass ? 0 : 1;
        } catch (const std::exception& err) {
            std::fprintf(stderr, "error: %s\n", err.what());
            return 2;
        }
    }
    return 2;
}
