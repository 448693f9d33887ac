#include "riskalloc/scenario.hpp"

#include "riskalloc/errors.hpp"
#include "riskalloc/lti_model.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace riskalloc;

int main(int argc, char** argv) {
    CLI::App app{"riskalloc: risk-based actuator protection allocation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false, out_set = false;
    int threads = 0;
    double solver_tol = 0.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("config", config_path, "scenario config (JSON)")->required();
        cmd->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
            seed_set = true;
        });
        cmd->add_option("--out-dir", out_dir, "override the output directory")
            ->each([&](const std::string&) { out_set = true; });
        cmd->add_option("--threads", threads, "worker threads for per-sample solves");
        cmd->add_option("--solver-tol", solver_tol, "SDP solver tolerance");
    };

    auto* run_cmd = app.add_subcommand("run", "run a scenario and write reports");
    add_common(run_cmd);

    auto* bench_cmd = app.add_subcommand("bench", "time the configured methods");
    add_common(bench_cmd);

    auto* presets_cmd = app.add_subcommand("presets", "list built-in model presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets_cmd->parsed()) {
            for (const auto& name : preset_names()) {
                auto model = make_preset(name);
                auto sys = model.assemble(ProtectionMask::all_attackable(model.nu()),
                                          Eigen::VectorXd::Zero(model.uncertainty.dims()));
                std::printf("%-24s n=%d n_u=%d\n", name.c_str(), sys.n(), sys.nu());
            }
            return 0;
        }

        ScenarioConfig config = ScenarioConfig::load(config_path);
        if (seed_set) config.seed = seed;
        if (out_set) config.output_dir = out_dir;
        if (threads > 0) config.threads = threads;
        if (solver_tol > 0.0) config.solver_tol = solver_tol;

        if (run_cmd->parsed()) {
            auto report = run_scenario(config);
            for (const auto& f : report.files_written) std::printf("wrote %s\n", f.c_str());
            const auto& methods = report.summary.contains("methods")
                                      ? report.summary["methods"]
                                      : nlohmann::json::object();
            for (const auto& [name, r] : methods.items()) {
                if (r["status"] == "ok") {
                    std::string prot;
                    for (const auto& a : r["protected_actuators"])
                        prot += (prot.empty() ? "" : ",") + a.get<std::string>();
                    std::printf("%-16s protects {%s}  achieved risk %.6g\n", name.c_str(),
                                prot.c_str(), r["achieved_risk"].get<double>());
                } else {
                    std::printf("%-16s FAILED: %s\n", name.c_str(),
                                r["message"].get<std::string>().c_str());
                }
            }
            return 0;
        }

        // bench
        auto rows = compare_timings(config, config.methods);
        std::printf("method,N,wall_seconds\n");
        for (const auto& row : rows)
            std::printf("%s,%d,%.3f\n", row.method.c_str(), row.N, row.wall_seconds);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
