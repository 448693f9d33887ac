#pragma once

#include "riskalloc/allocation.hpp"
#include "riskalloc/impact.hpp"
#include "riskalloc/lti_model.hpp"
#include "riskalloc/risk.hpp"
#include "riskalloc/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Scenario ingestion and experiment orchestration: risk comparison across
// allocation methods, per-sample impact tables, simulation ensembles, and
// timing benchmarks, emitted as JSON + CSV reports.

namespace riskalloc {

struct SimulationBlock {
    double dt = 1e-3;
    double T = 10.0;
    int n_samples = 500;
    // Allocation methods whose rounded masks get simulated; the literal
    // "none" simulates the unprotected loop.
    std::vector<std::string> masks;
    int trace_stride = 100;
};

struct ScenarioConfig {
    int version = 1;
    std::string preset;  // empty when the model is inline
    std::optional<PlantEnsemble> inline_model;
    int N = 100;
    std::uint64_t seed = 0;
    double alpha = 0.8;
    double eps_r = 1.0;
    double eps_a = 300.0;
    int n_w = 0;
    std::vector<std::string> methods;
    ImpactFunctional impact = ImpactFunctional::relaxed;
    RiskMeasure risk_measure = RiskMeasure::cvar;
    bool per_sample_impacts = true;
    bool boxplot = true;
    int test_N = 0;  // 0: same size as N
    std::optional<SimulationBlock> simulation;
    std::string output_dir = "out";
    double solver_tol = 1e-8;
    int threads = 1;
    long exhaustive_cap = 100000;

    static ScenarioConfig from_json(const nlohmann::json& j);
    static ScenarioConfig load(const std::string& path);
    void validate() const;
};

struct ScenarioReport {
    nlohmann::json summary;
    std::vector<std::string> files_written;
};

ScenarioReport run_scenario(const ScenarioConfig& config);

struct TimingRow {
    std::string method;
    int N = 0;
    double wall_seconds = 0.0;
};

std::vector<TimingRow> compare_timings(const ScenarioConfig& config,
                                       const std::vector<std::string>& methods);

// Model (de)serialization for inline configs and presets.
nlohmann::json model_to_json(const PlantEnsemble& model);
PlantEnsemble model_from_json(const nlohmann::json& j);

nlohmann::json certificate_to_json(const ImpactCertificate& cert);

// Deterministic per-purpose substream from the single scenario seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace riskalloc
