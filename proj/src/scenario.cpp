#include "riskalloc/scenario.hpp"

#include "parallel.hpp"
#include "riskalloc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace riskalloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double wall_now() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

json matrix_to_json(const Eigen::MatrixXd& M) {
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError("model: '" + what + "' must be an array of row arrays");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Eigen::MatrixXd M(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw ConfigError("model: ragged rows in '" + what + "'");
        for (int c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
    }
    return M;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError("model: '" + what + "' must be an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json entries_to_json(const std::vector<DeltaEntry>& entries) {
    json out = json::array();
    for (const auto& e : entries) out.push_back({e.param, e.row, e.col, e.coeff});
    return out;
}

std::vector<DeltaEntry> entries_from_json(const json& j, const std::string& what) {
    std::vector<DeltaEntry> out;
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 4)
            throw ConfigError("model: '" + what + "' entries are [param,row,col,coeff]");
        out.push_back({item[0].get<int>(), item[1].get<int>(), item[2].get<int>(),
                       item[3].get<double>()});
    }
    return out;
}

UncertaintySpec uncertainty_from_json(const json& j) {
    UncertaintySpec u;
    u.lower = vector_from_json(j.at("lower"), "uncertainty.lower");
    u.upper = vector_from_json(j.at("upper"), "uncertainty.upper");
    u.validate();
    return u;
}

std::string csv_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over the (seed, stream) pair
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

json model_to_json(const PlantEnsemble& model) {
    json j;
    j["name"] = model.name;
    j["uncertainty"] = {{"lower", json::array()}, {"upper", json::array()}};
    for (int i = 0; i < model.uncertainty.dims(); ++i) {
        j["uncertainty"]["lower"].push_back(model.uncertainty.lower[i]);
        j["uncertainty"]["upper"].push_back(model.uncertainty.upper[i]);
    }
    if (const auto* s = std::get_if<StructuredPlant>(&model.model)) {
        j["A"] = matrix_to_json(s->process.A);
        j["B"] = matrix_to_json(s->process.B);
        j["C"] = matrix_to_json(s->process.C);
        j["C_j"] = matrix_to_json(s->process.Cj);
        j["delta_a_entries"] = entries_to_json(s->process.delta_map.a_entries);
        j["delta_b_entries"] = entries_to_json(s->process.delta_map.b_entries);
        j["K"] = matrix_to_json(s->detector.K);
        j["eps_r"] = s->detector.eps_r;
        if (s->detector.observer_model)
            j["observer_model"] = matrix_to_json(*s->detector.observer_model);
        if (const auto* of = std::get_if<ObserverFeedback>(&s->controller)) {
            j["type"] = "observer_feedback";
            j["L"] = matrix_to_json(of->L);
        } else {
            const auto& dc = std::get<DynamicController>(s->controller);
            j["type"] = "dynamic_controller";
            j["A_c"] = matrix_to_json(dc.Ac);
            j["B_c"] = matrix_to_json(dc.Bc);
            j["C_c"] = matrix_to_json(dc.Cc);
            j["D_c"] = matrix_to_json(dc.Dc);
        }
    } else {
        const auto& d = std::get<DirectClosedLoop>(model.model);
        j["type"] = "closed_loop";
        j["A_cl"] = matrix_to_json(d.A);
        j["delta_entries"] = entries_to_json(d.delta_entries);
        j["B_cl"] = matrix_to_json(d.B);
        j["C_p"] = matrix_to_json(d.Cp);
        j["C_r"] = matrix_to_json(d.Cr);
    }
    return j;
}

PlantEnsemble model_from_json(const json& j) {
    PlantEnsemble model;
    model.name = j.value("name", "inline");
    model.uncertainty = uncertainty_from_json(j.at("uncertainty"));
    const std::string type = j.at("type").get<std::string>();
    if (type == "closed_loop") {
        DirectClosedLoop d;
        d.A = matrix_from_json(j.at("A_cl"), "A_cl");
        d.B = matrix_from_json(j.at("B_cl"), "B_cl");
        d.Cp = matrix_from_json(j.at("C_p"), "C_p");
        d.Cr = matrix_from_json(j.at("C_r"), "C_r");
        if (j.contains("delta_entries"))
            d.delta_entries = entries_from_json(j["delta_entries"], "delta_entries");
        model.model = std::move(d);
        return model;
    }
    StructuredPlant s;
    s.process.A = matrix_from_json(j.at("A"), "A");
    s.process.B = matrix_from_json(j.at("B"), "B");
    s.process.C = matrix_from_json(j.at("C"), "C");
    s.process.Cj = matrix_from_json(j.at("C_j"), "C_j");
    if (j.contains("delta_a_entries"))
        s.process.delta_map.a_entries = entries_from_json(j["delta_a_entries"], "delta_a_entries");
    if (j.contains("delta_b_entries"))
        s.process.delta_map.b_entries = entries_from_json(j["delta_b_entries"], "delta_b_entries");
    s.detector.K = matrix_from_json(j.at("K"), "K");
    s.detector.eps_r = j.value("eps_r", 1.0);
    if (j.contains("observer_model"))
        s.detector.observer_model = matrix_from_json(j["observer_model"], "observer_model");
    if (type == "observer_feedback") {
        ObserverFeedback of;
        of.L = matrix_from_json(j.at("L"), "L");
        s.controller = of;
    } else if (type == "dynamic_controller") {
        DynamicController dc;
        dc.Ac = matrix_from_json(j.at("A_c"), "A_c");
        dc.Bc = matrix_from_json(j.at("B_c"), "B_c");
        dc.Cc = matrix_from_json(j.at("C_c"), "C_c");
        dc.Dc = matrix_from_json(j.at("D_c"), "D_c");
        s.controller = dc;
    } else {
        throw ConfigError("model: unknown type '" + type + "'");
    }
    s.process.validate();
    model.model = std::move(s);
    return model;
}

json certificate_to_json(const ImpactCertificate& cert) {
    return json{{"value", cert.value},
                {"gamma1", cert.gamma1},
                {"gamma2", cert.gamma2},
                {"kind", cert.kind == CertificateKind::exact ? "exact" : "relaxed"},
                {"status", sdp::to_string(cert.status)},
                {"gamma1_at_lower_bound", cert.gamma1_at_lower_bound},
                {"iterations", cert.stats.iterations},
                {"wall_seconds", cert.stats.wall_seconds}};
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
    ScenarioConfig c;
    c.version = j.value("version", 1);
    if (c.version != 1) throw ConfigError("config: unsupported version");
    if (j.contains("model")) {
        if (j["model"].is_string())
            c.preset = j["model"].get<std::string>();
        else
            c.inline_model = model_from_json(j["model"]);
    } else {
        throw ConfigError("config: missing 'model'");
    }
    c.N = j.value("N", 100);
    c.seed = j.value("seed", std::uint64_t{0});
    c.alpha = j.value("alpha", 0.8);
    c.eps_r = j.value("eps_r", 1.0);
    c.eps_a = j.value("eps_a", 300.0);
    c.n_w = j.value("n_w", 0);
    if (j.contains("methods"))
        for (const auto& m : j["methods"]) c.methods.push_back(m.get<std::string>());
    if (j.contains("impact")) {
        const std::string s = j["impact"].get<std::string>();
        if (s == "exact")
            c.impact = ImpactFunctional::exact;
        else if (s == "relaxed")
            c.impact = ImpactFunctional::relaxed;
        else
            throw ConfigError("config: impact must be 'exact' or 'relaxed'");
    }
    if (j.contains("risk_measure"))
        c.risk_measure = risk_measure_from_string(j["risk_measure"].get<std::string>());
    c.per_sample_impacts = j.value("per_sample_impacts", true);
    c.boxplot = j.value("boxplot", true);
    c.test_N = j.value("test_N", 0);
    c.output_dir = j.value("output_dir", std::string("out"));
    c.solver_tol = j.value("solver_tol", 1e-8);
    c.threads = j.value("threads", 1);
    c.exhaustive_cap = j.value("exhaustive_cap", 100000L);
    if (j.contains("simulation")) {
        const auto& js = j["simulation"];
        SimulationBlock b;
        b.dt = js.value("dt", 1e-3);
        b.T = js.value("T", 10.0);
        b.n_samples = js.value("n_samples", 500);
        b.trace_stride = js.value("trace_stride", 100);
        if (js.contains("masks"))
            for (const auto& m : js["masks"]) b.masks.push_back(m.get<std::string>());
        c.simulation = b;
    }
    return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    ScenarioConfig c = from_json(j);
    c.validate();
    return c;
}

void ScenarioConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("config: alpha must be in (0,1)");
    if (N < 1) throw ConfigError("config: N must be >= 1");
    if (eps_r <= 0.0 || eps_a <= 0.0) throw ConfigError("config: eps_r/eps_a must be positive");
    if (methods.empty()) throw ConfigError("config: empty methods list");
    static const std::vector<std::string> known{"cvar_sdp", "worst_case_sdp", "nominal_sdp",
                                               "exhaustive", "greedy"};
    for (const auto& m : methods)
        if (std::find(known.begin(), known.end(), m) == known.end())
            throw ConfigError("config: unknown method '" + m + "'");
    if (preset.empty() && !inline_model) throw ConfigError("config: no model given");
    if (!preset.empty()) {
        auto names = preset_names();
        if (std::find(names.begin(), names.end(), preset) == names.end())
            throw ConfigError("config: unknown preset '" + preset + "'");
    }
}

namespace {

PlantEnsemble resolve_model(const ScenarioConfig& config) {
    return config.inline_model ? *config.inline_model : make_preset(config.preset);
}

std::vector<ClosedLoopSystem> assemble_ensemble(const PlantEnsemble& model,
                                                const std::vector<Eigen::VectorXd>& deltas) {
    std::vector<ClosedLoopSystem> systems;
    systems.reserve(deltas.size());
    const ProtectionMask full = ProtectionMask::all_attackable(model.nu());
    for (std::size_t i = 0; i < deltas.size(); ++i)
        systems.push_back(model.assemble(full, deltas[i], static_cast<int>(i)));
    return systems;
}

AllocationProblem build_problem(const ScenarioConfig& config, const PlantEnsemble& model,
                                std::vector<ClosedLoopSystem> ensemble) {
    AllocationProblem p;
    p.ensemble = std::move(ensemble);
    p.nominal = model.assemble(ProtectionMask::all_attackable(model.nu()),
                               Eigen::VectorXd::Zero(model.uncertainty.dims()), -1);
    p.n_w = config.n_w;
    p.budget = {config.eps_r, config.eps_a};
    p.risk = {config.risk_measure, config.alpha};
    p.impact = config.impact;
    p.options.solver_tol = config.solver_tol;
    p.options.threads = config.threads;
    p.options.exhaustive_cap = config.exhaustive_cap;
    return p;
}

AllocationResult run_method(const std::string& method, const AllocationProblem& problem) {
    if (method == "cvar_sdp") return allocate_cvar_sdp(problem);
    if (method == "worst_case_sdp") return allocate_worst_case(problem);
    if (method == "nominal_sdp") return allocate_nominal(problem);
    if (method == "exhaustive") return exhaustive_search(problem);
    if (method == "greedy") return greedy_search(problem);
    throw ConfigError("unknown method '" + method + "'");
}

std::string actuator_label(int index) { return "A" + std::to_string(index + 1); }

json result_to_json(const AllocationResult& r) {
    json j;
    j["method"] = r.method;
    j["status"] = "ok";
    json prot = json::array(), labels = json::array();
    for (int i : r.protected_set) {
        prot.push_back(i);
        labels.push_back(actuator_label(i));
    }
    j["protected_set"] = prot;
    j["protected_actuators"] = labels;
    json z = json::array();
    for (int i = 0; i < r.z.size(); ++i) z.push_back(r.z[i]);
    j["z_relaxed"] = z;
    j["achieved_risk"] = r.achieved_risk;
    if (std::isfinite(r.sdp_objective)) j["sdp_objective_bound"] = r.sdp_objective;
    return j;
}

void write_file(const fs::path& path, const std::string& contents,
                std::vector<std::string>& files) {
    std::ofstream out(path);
    out << contents;
    files.push_back(path.string());
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& config) {
    config.validate();
    const PlantEnsemble model = resolve_model(config);
    const int dims = model.uncertainty.dims();

    UncertaintySpec train_spec = model.uncertainty;
    train_spec.seed = derive_seed(config.seed, 1);
    const auto train_deltas = sample_uncertainties(train_spec, config.N);
    auto ensemble = assemble_ensemble(model, train_deltas);

    ScenarioReport report;
    fs::create_directories(config.output_dir);
    json& summary = report.summary;
    summary["version"] = 1;
    summary["model"] = model.name;
    summary["config"] = {{"N", config.N},
                         {"seed", config.seed},
                         {"alpha", config.alpha},
                         {"eps_r", config.eps_r},
                         {"eps_a", config.eps_a},
                         {"n_w", config.n_w},
                         {"impact", config.impact == ImpactFunctional::exact ? "exact"
                                                                             : "relaxed"},
                         {"risk_measure", to_string(config.risk_measure)}};

    const auto assumptions = check_assumptions(ensemble);
    int pass = 0;
    for (const auto& s : assumptions.samples) pass += s.pass() ? 1 : 0;
    summary["assumptions"] = {{"all_pass", assumptions.all_pass()},
                              {"pass_count", pass},
                              {"sample_count", assumptions.samples.size()}};

    const ImpactBudget budget{config.eps_r, config.eps_a};
    ImpactOptions io;
    io.solver_tol = config.solver_tol;

    // impacts.csv: per-sample exact and relaxed values, no protection
    if (config.per_sample_impacts) {
        std::vector<double> qe(ensemble.size()), qr(ensemble.size());
        detail::parallel_for(static_cast<int>(ensemble.size()), config.threads, [&](int i) {
            qe[i] = exact_impact(ensemble[i], budget, io).value;
            qr[i] = relaxed_impact(ensemble[i], budget, io).value;
        });
        std::ostringstream csv;
        csv << "sample_id";
        for (int d = 0; d < dims; ++d) csv << (dims == 1 ? ",delta" : ",delta" + std::to_string(d));
        csv << ",q_exact,q_relaxed\n";
        for (std::size_t i = 0; i < ensemble.size(); ++i) {
            csv << i;
            for (int d = 0; d < dims; ++d) csv << ',' << csv_num(train_deltas[i][d]);
            csv << ',' << csv_num(qe[i]) << ',' << csv_num(qr[i]) << '\n';
        }
        write_file(fs::path(config.output_dir) / "impacts.csv", csv.str(),
                   report.files_written);
        ImpactSampleSet set;
        set.values = qr;
        summary["no_protection"] = {{"cvar_relaxed", cvar(set, config.alpha).value},
                                    {"worst_case_relaxed", worst_case(set)},
                                    {"mean_relaxed", mean(set)}};
    }

    auto problem = build_problem(config, model, std::move(ensemble));

    std::map<std::string, AllocationResult> results;
    json timings = json::object();
    for (const auto& method : config.methods) {
        try {
            AllocationResult r = run_method(method, problem);
            timings[method] = r.wall_seconds;
            summary["methods"][method] = result_to_json(r);
            if (method == "exhaustive" && !r.scored_subsets.empty()) {
                std::ostringstream csv;
                csv << "subset,risk\n";
                for (const auto& [subset, risk] : r.scored_subsets) {
                    std::string label;
                    for (std::size_t i = 0; i < subset.size(); ++i)
                        label += (i ? "+" : "") + actuator_label(subset[i]);
                    csv << label << ',' << csv_num(risk) << '\n';
                }
                write_file(fs::path(config.output_dir) / "exhaustive_scores.csv", csv.str(),
                           report.files_written);
            }
            results.emplace(method, std::move(r));
        } catch (const std::exception& e) {
            summary["methods"][method] = {{"status", "error"}, {"message", e.what()}};
        }
    }

    // boxplot.csv: train/test impacts under each method's rounded mask
    if (config.boxplot && !results.empty()) {
        UncertaintySpec test_spec = model.uncertainty;
        test_spec.seed = derive_seed(config.seed, 2);
        const int test_n = config.test_N > 0 ? config.test_N : config.N;
        const auto test_deltas = sample_uncertainties(test_spec, test_n);
        auto test_ensemble = assemble_ensemble(model, test_deltas);

        std::ostringstream csv;
        csv << "method,dataset,sample_id,kind,value\n";
        for (const auto& [method, result] : results) {
            for (const auto& [dataset, systems] :
                 std::vector<std::pair<std::string, const std::vector<ClosedLoopSystem>*>>{
                     {"train", &problem.ensemble}, {"test", &test_ensemble}}) {
                std::vector<double> qe(systems->size()), qr(systems->size());
                detail::parallel_for(
                    static_cast<int>(systems->size()), config.threads, [&](int i) {
                        auto masked = apply_mask((*systems)[i], result.mask);
                        qe[i] = exact_impact(masked, budget, io).value;
                        qr[i] = relaxed_impact(masked, budget, io).value;
                    });
                for (std::size_t i = 0; i < systems->size(); ++i) {
                    csv << method << ',' << dataset << ',' << i << ",q," << csv_num(qe[i])
                        << '\n';
                    csv << method << ',' << dataset << ',' << i << ",q_relaxed,"
                        << csv_num(qr[i]) << '\n';
                }
            }
        }
        write_file(fs::path(config.output_dir) / "boxplot.csv", csv.str(),
                   report.files_written);
    }

    // simulations under selected masks
    if (config.simulation) {
        const auto& block = *config.simulation;
        UncertaintySpec sim_spec = model.uncertainty;
        sim_spec.seed = derive_seed(config.seed, 3);
        const auto sim_deltas = sample_uncertainties(sim_spec, block.n_samples);

        for (const auto& mask_name : block.masks) {
            ProtectionMask mask = ProtectionMask::all_attackable(model.nu());
            if (mask_name != "none") {
                auto it = results.find(mask_name);
                if (it == results.end()) {
                    summary["simulation"][mask_name] = {{"status", "error"},
                                                        {"message", "mask source not run"}};
                    continue;
                }
                mask = it->second.mask;
            }
            SimulateOptions so;
            so.dt = block.dt;
            so.T = block.T;
            so.alarm_threshold = config.eps_r;

            std::vector<EnergySummary> energies(sim_deltas.size());
            detail::parallel_for(
                static_cast<int>(sim_deltas.size()), config.threads, [&](int i) {
                    auto sys = model.assemble(mask, sim_deltas[i], i);
                    AttackSignal attack;
                    attack.kind = AttackSignal::Kind::step;
                    energies[i] = simulate_energies(sys, attack, so);
                });

            std::ostringstream csv;
            csv << "sample_id";
            for (int d = 0; d < dims; ++d)
                csv << (dims == 1 ? ",delta" : ",delta" + std::to_string(d));
            csv << ",performance_energy,detection_energy,alarm_time\n";
            int alarms = 0;
            double max_det = 0.0;
            for (std::size_t i = 0; i < sim_deltas.size(); ++i) {
                csv << i;
                for (int d = 0; d < dims; ++d) csv << ',' << csv_num(sim_deltas[i][d]);
                csv << ',' << csv_num(energies[i].performance) << ','
                    << csv_num(energies[i].detection) << ','
                    << (energies[i].alarm_time ? csv_num(*energies[i].alarm_time) : "");
                csv << '\n';
                alarms += energies[i].alarm_time ? 1 : 0;
                max_det = std::max(max_det, energies[i].detection);
            }
            write_file(fs::path(config.output_dir) / ("simulation_" + mask_name + ".csv"),
                       csv.str(), report.files_written);

            // one full trace for plotting
            auto sys = model.assemble(mask, sim_deltas.front(), 0);
            AttackSignal attack;
            attack.kind = AttackSignal::Kind::step;
            SimulateOptions strided = so;
            strided.store_stride = block.trace_stride;
            auto run = simulate(sys, attack, strided);
            std::ostringstream trace;
            trace << "t,performance_energy,detection_energy\n";
            for (std::size_t k = 0; k < run.time.size(); ++k)
                trace << csv_num(run.time[k]) << ',' << csv_num(run.performance_energy[k])
                      << ',' << csv_num(run.detection_energy[k]) << '\n';
            write_file(fs::path(config.output_dir) / ("simulation_" + mask_name + "_trace.csv"),
                       trace.str(), report.files_written);

            summary["simulation"][mask_name] = {{"alarm_count", alarms},
                                                {"max_detection_energy", max_det},
                                                {"n_samples", block.n_samples}};
        }
    }

    summary["timings"] = timings;

    std::ostringstream pretty;
    pretty << summary.dump(2) << '\n';
    write_file(fs::path(config.output_dir) / "summary.json", pretty.str(),
               report.files_written);

    if (!timings.empty()) {
        std::ostringstream csv;
        csv << "method,N,wall_seconds\n";
        for (const auto& [method, secs] : timings.items())
            csv << method << ',' << config.N << ',' << csv_num(secs.get<double>()) << '\n';
        write_file(fs::path(config.output_dir) / "timings.csv", csv.str(),
                   report.files_written);
    }
    return report;
}

std::vector<TimingRow> compare_timings(const ScenarioConfig& config,
                                       const std::vector<std::string>& methods) {
    if (methods.empty()) throw ConfigError("bench: no methods given");
    ScenarioConfig c = config;
    c.validate();
    const PlantEnsemble model = resolve_model(c);
    UncertaintySpec spec = model.uncertainty;
    spec.seed = derive_seed(c.seed, 1);
    auto deltas = sample_uncertainties(spec, c.N);
    auto problem = build_problem(c, model, assemble_ensemble(model, deltas));

    std::vector<TimingRow> rows;
    for (const auto& method : methods) {
        const double t0 = wall_now();
        run_method(method, problem);
        rows.push_back({method, c.N, wall_now() - t0});
    }
    return rows;
}

}  // namespace riskalloc
