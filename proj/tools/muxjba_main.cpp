// muxjba command line front end: loads a JSON run configuration, runs one of
// the experiments with a seed, writes CSV/JSON results plus a reproducibility
// manifest into the output directory.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "muxjba/config.hpp"
#include "muxjba/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace muxjba;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = "muxjba_out";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<long> shots;
};

std::optional<std::string> env_value(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

void apply_env_defaults(CliOptions& opt) {
    if (opt.config_path.empty())
        if (auto v = env_value("MUXJBA_CONFIG")) opt.config_path = *v;
    if (auto v = env_value("MUXJBA_OUT"); v && opt.out_dir == "muxjba_out")
        opt.out_dir = *v;
    if (!opt.seed)
        if (auto v = env_value("MUXJBA_SEED")) opt.seed = std::stoull(*v);
    if (!opt.threads)
        if (auto v = env_value("MUXJBA_THREADS")) opt.threads = std::stoi(*v);
    if (!opt.shots)
        if (auto v = env_value("MUXJBA_SHOTS")) opt.shots = std::stol(*v);
}

class OutputSet {
public:
    explicit OutputSet(const std::string& dir) : dir_(dir) {
        fs::create_directories(dir_);
    }

    std::string path(const std::string& name) {
        files_.push_back(name);
        return (fs::path(dir_) / name).string();
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

void write_scurve_csv(const std::string& path, const SCurve& decision,
                      const SCurve& latch, const std::vector<double>& agreement) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw std::runtime_error("cannot write " + path);
    std::fputs("power_db,p_switch,std,n_shots,p_latch,agreement\n", f);
    for (std::size_t i = 0; i < decision.size(); ++i)
        std::fprintf(f, "%.12g,%.12g,%.12g,%ld,%.12g,%.12g\n", decision.power_db[i],
                     decision.p_switch[i], decision.std_dev[i], decision.n_shots[i],
                     latch.p_switch[i], agreement[i]);
    std::fclose(f);
}

json separatrix_json(const Separatrix& s, bool valid) {
    return json{{"normal_i", s.normal_i},
                {"normal_q", s.normal_q},
                {"offset", s.offset},
                {"valid", valid}};
}

json derive_report(const ExperimentPlan& plan) {
    json cells = json::array();
    for (const auto& cell : plan.cells) {
        const auto d = derive_readout(cell);
        const DriveFrame frame{d.delta_d_hz[0], cell.params.kerr_hz, d.kappa_hz};
        const auto edges = bifurcation_edges(frame);
        json jc;
        jc["cell_id"] = cell.params.cell_id;
        jc["kappa_hz"] = d.kappa_hz;
        jc["pull_hz"] = {d.pulls.pull_hz[0], d.pulls.pull_hz[1], d.pulls.pull_hz[2]};
        jc["two_chi_hz"] = d.pulls.two_chi_hz();
        jc["two_chi_effective_hz"] = d.two_chi_effective_hz;
        jc["purcell_time_s"] = purcell_time_s(cell.params);
        jc["thermal_population"] = cell.params.thermal_excited_population;
        jc["delta_d_hz"] = {d.delta_d_hz[0], d.delta_d_hz[1], d.delta_d_hz[2]};
        jc["eps_bifurcation"] = d.eps_bif;
        if (edges) {
            jc["edge_photons_low"] = edges->n_low_edge;
            jc["edge_photons_high"] = edges->n_high_edge;
            // photon number the latched state reaches at the bifurcation drive
            const auto ss = steady_states(frame, d.eps_bif * (1.0 + 1e-9));
            jc["high_state_photons_at_bifurcation"] = ss.n[ss.count - 1];
        }
        cells.push_back(jc);
    }
    return json{{"cells", cells}};
}

int run_subcommand(const std::string& cmd, const CliOptions& opt) {
    const auto t_start = std::chrono::steady_clock::now();
    if (opt.config_path.empty())
        throw ConfigError("no config given (use --config or MUXJBA_CONFIG)");

    LoadedConfig cfg = load_config(opt.config_path);
    ExperimentPlan& plan = cfg.plan;
    if (opt.seed) plan.master_seed = *opt.seed;
    if (opt.threads) plan.threads = *opt.threads;
    if (opt.shots) plan.n_shots = *opt.shots;
    plan.validate();

    OutputSet out(opt.out_dir);
    write_text(out.path("config_copy.json"), cfg.raw_text);

    json summary;
    summary["subcommand"] = cmd;
    summary["master_seed"] = plan.master_seed;

    if (cmd == "derive") {
        const json report = derive_report(plan);
        write_text(out.path("derived.json"), report.dump(2) + "\n");
        summary["derived"] = report;
        for (const auto& jc : report.at("cells")) {
            std::printf("cell %d: kappa = %.4g MHz, 2chi = %.4g MHz",
                        jc.at("cell_id").get<int>(),
                        jc.at("kappa_hz").get<double>() / 1e6,
                        jc.at("two_chi_hz").get<double>() / 1e6);
            std::printf(", T_P = %.4g us", jc.at("purcell_time_s").get<double>() * 1e6);
            if (jc.contains("edge_photons_low"))
                std::printf(", edges = (%.4g, %.4g) photons, high state %.4g photons",
                            jc.at("edge_photons_low").get<double>(),
                            jc.at("edge_photons_high").get<double>(),
                            jc.at("high_state_photons_at_bifurcation").get<double>());
            std::printf("\n");
        }
    } else if (cmd == "scurve") {
        const auto result = run_scurve_experiment(plan);
        json jpreps = json::array();
        for (const auto& set : result.preps) {
            for (std::size_t c = 0; c < set.per_cell.size(); ++c) {
                const int id = plan.cells[c].params.cell_id;
                write_scurve_csv(out.path("scurve_" + set.prep + "_cell" +
                                          std::to_string(id) + ".csv"),
                                 set.per_cell[c], set.per_cell_latch[c],
                                 set.agreement[c]);
            }
            jpreps.push_back(set.prep);
        }
        summary["preps"] = jpreps;
        // headline numbers when the standard preps are present
        try {
            const auto& s0 = result.find("ground").per_cell[0];
            const auto& s1 = result.find("pi01").per_cell[0];
            summary["ground_width_db"] = scurve_width_db(s0);
            summary["separation_db"] = scurve_separation_db(s0, s1);
        } catch (const std::exception&) {
        }
        bool have_budget = true;
        try {
            result.find("ground");
            result.find("pi01");
            result.find("pi01_shelved");
        } catch (const std::exception&) {
            have_budget = false;
        }
        if (have_budget) {
            const auto& s0 = result.find("ground").per_cell[0];
            const auto& s1 = result.find("pi01").per_cell[0];
            const auto& s1s = result.find("pi01_shelved").per_cell[0];
            const auto prep_ns = make_prep_pulses(PrepKind::Pi01, plan.control_sigma_s);
            const auto prep_s =
                make_prep_pulses(PrepKind::Pi01Shelved, plan.control_sigma_s);
            const auto budget =
                error_budget(s0, s1, s1s, plan.cells[0].params, prep_ns, prep_s,
                             200000, derive_seed(plan.master_seed, {77}));
            summary["error_budget"] = {
                {"ground_error", budget.ground_error},
                {"excited_error_noshelve", budget.excited_error_noshelve},
                {"excited_error_shelve", budget.excited_error_shelve},
                {"thermal_component", budget.thermal_component},
                {"prep_relaxation_component", budget.prep_relaxation_component},
                {"readout_relaxation_component", budget.readout_relaxation_component},
                {"prep_relaxation_component_shelved",
                 budget.prep_relaxation_component_shelved},
                {"readout_relaxation_component_shelved",
                 budget.readout_relaxation_component_shelved},
                {"optimal_power_db", budget.optimal_power_db},
                {"optimal_power_shelved_db", budget.optimal_power_shelved_db},
                {"shelved_plateau_p", budget.shelved_plateau_p}};
            try {
                const auto ideal = reconstruct_ideal_scurves(
                    s0, s1, plan.cells[0].params.thermal_excited_population);
                const auto opt_db = budget.optimal_power_db;
                double g = 1e9, e = 1e9;
                for (std::size_t i = 0; i < ideal.ground.size(); ++i)
                    if (std::abs(ideal.ground.power_db[i] - opt_db) < 1e-9) {
                        g = ideal.ground.p_switch[i];
                        e = 1.0 - ideal.excited.p_switch[i];
                    }
                summary["ideal_ground_error_at_optimal"] = g;
                summary["ideal_excited_error_at_optimal"] = e;
            } catch (const std::exception& ex) {
                summary["ideal_reconstruction_error"] = ex.what();
            }
        }
        json jsep = json::array();
        for (std::size_t c = 0; c < result.separatrix_per_cell.size(); ++c)
            jsep.push_back(separatrix_json(result.separatrix_per_cell[c], true));
        summary["separatrices"] = jsep;
    } else if (cmd == "rabi") {
        const auto result = run_rabi_experiment(plan);
        json fits = json::array();
        for (std::size_t c = 0; c < plan.cells.size(); ++c) {
            const int id = plan.cells[c].params.cell_id;
            std::FILE* f = std::fopen(
                out.path("rabi_cell" + std::to_string(id) + ".csv").c_str(), "w");
            if (f == nullptr) throw std::runtime_error("cannot write rabi csv");
            std::fputs("t_equiv_ns,p,std\n", f);
            for (std::size_t i = 0; i < result.t_equiv_s.size(); ++i)
                std::fprintf(f, "%.12g,%.12g,%.12g\n", result.t_equiv_s[i] * 1e9,
                             result.p[c][i], result.std_dev[c][i]);
            std::fclose(f);
            fits.push_back(json{{"cell_id", id},
                                {"period_ns", result.fits[c].period_s * 1e9},
                                {"contrast", result.fits[c].contrast},
                                {"offset", result.fits[c].offset}});
        }
        summary["fits"] = fits;
    } else if (cmd == "crosstalk") {
        const auto result = run_crosstalk_experiment(plan);
        summary["crosstalk"] = {
            {"p_target_control_ground", result.p_target_control_ground},
            {"p_target_control_excited", result.p_target_control_excited},
            {"delta_p", result.delta_p},
            {"sigma", result.sigma},
            {"n_shots_per_arm", result.n_shots_per_arm},
            {"shots_per_arm_for_0p05pct", result.shots_needed(0.0005)}};
        std::printf("crosstalk delta_p = %.4f%% +- %.4f%% (%ld shots/arm; "
                    "0.05%% resolution needs %ld shots/arm)\n",
                    100.0 * result.delta_p, 100.0 * result.sigma,
                    result.n_shots_per_arm, result.shots_needed(0.0005));
    } else if (cmd == "simultaneous" || cmd == "iqcloud") {
        const auto result = run_simultaneous_readout(plan);
        json jcells = json::array();
        for (const auto& cell : result.cells) {
            write_iq_csv(cell.points,
                         out.path("iq_cell" + std::to_string(cell.cell_id) + ".csv"));
            if (cell.separatrix_valid) {
                std::FILE* f = std::fopen(
                    out.path("hist_cell" + std::to_string(cell.cell_id) + ".csv")
                        .c_str(),
                    "w");
                if (f == nullptr) throw std::runtime_error("cannot write hist csv");
                std::fputs("bin_center,count\n", f);
                for (std::size_t b = 0; b < cell.hist_centers.size(); ++b)
                    std::fprintf(f, "%.12g,%ld\n", cell.hist_centers[b],
                                 cell.hist_counts[b]);
                std::fclose(f);
            }
            jcells.push_back(
                json{{"cell_id", cell.cell_id},
                     {"p_switch", cell.p_switch},
                     {"separatrix", separatrix_json(cell.separatrix,
                                                    cell.separatrix_valid)}});
        }
        if (cmd == "simultaneous")
            write_envelope_csv(result.composed_shot0, out.path("waveform_shot0.csv"));
        summary["cells"] = jcells;
    } else {
        throw ConfigError("unknown subcommand: " + cmd);
    }

    const auto t_stop = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.artifact_version = MUXJBA_VERSION;
    manifest.config_digest_sha256 = sha256_hex(cfg.raw_text);
    manifest.master_seed = plan.master_seed;
    manifest.threads = plan.threads;
    manifest.seed_scheme =
        "splitmix64 fold of (master_seed, tag, point, shot, cell, lane) -> mt19937_64";
    manifest.warnings = cfg.warnings;
    manifest.wall_clock_s =
        std::chrono::duration<double>(t_stop - t_start).count();

    write_text(out.path("summary.json"), summary.dump(2) + "\n");
    manifest.outputs = out.files();
    manifest.outputs.push_back("manifest.json");
    manifest.write((fs::path(opt.out_dir) / "manifest.json").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiplexed bifurcation-readout simulator"};
    app.require_subcommand(1);

    CliOptions opt;
    const std::vector<std::string> names = {"scurve",    "rabi",    "simultaneous",
                                            "crosstalk", "iqcloud", "derive"};
    for (const auto& n : names) {
        auto* sub = app.add_subcommand(n);
        sub->add_option("--config", opt.config_path, "JSON run configuration");
        sub->add_option("--seed", opt.seed, "64-bit master seed override");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--threads", opt.threads, "worker threads (0 = auto)");
        sub->add_option("--shots", opt.shots, "shots-per-point override");
    }

    CLI11_PARSE(app, argc, argv);
    apply_env_defaults(opt);

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        return run_subcommand(cmd, opt);
    } catch (const ConfigError& e) {
        std::cerr << json{{"error", {{"type", "config"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << json{{"error", {{"type", "config"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 3;
    }
}
