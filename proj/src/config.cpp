#include "muxjba/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

namespace muxjba {

using nlohmann::json;

namespace {

// Reference-device cell table: resonator frequencies staggered by the
// 61 / 69 / 96 MHz separations around the f_R0 = 7.872 GHz readout carrier.
struct CellDefaults {
    double f_r_hz;
    double quality_factor;
    double readout_offset_hz;
};

constexpr CellDefaults kCellTable[4] = {
    {7.750e9, 2500.0, -122e6},
    {7.811e9, 2550.0, -61e6},
    {7.880e9, 2650.0, +8e6},
    {7.976e9, 2200.0, +104e6},
};

constexpr double kDefaultDetuningHz = -1.08e9;
constexpr double kDefaultTemperatureK = 0.070;

double get_num(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number())
        throw ConfigError(std::string("config field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

void collect_unknown(const json& j, const std::set<std::string>& known,
                     const std::string& prefix, std::vector<std::string>& warnings) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key()))
            warnings.push_back("unknown config key '" + prefix + it.key() + "'");
    }
}

}  // namespace

CellConfig default_cell(int cell_id) {
    if (cell_id < 1 || cell_id > 4)
        throw ConfigError("cell_id must lie in 1..4 (got " + std::to_string(cell_id) + ")");
    const CellDefaults& d = kCellTable[cell_id - 1];
    CellConfig cfg;
    cfg.params.cell_id = cell_id;
    cfg.params.f_r_bare_hz = d.f_r_hz;
    cfg.params.quality_factor = d.quality_factor;
    cfg.params.f01_hz = d.f_r_hz + kDefaultDetuningHz;
    cfg.params.thermal_excited_population =
        thermal_population(cfg.params.f01_hz, kDefaultTemperatureK);
    cfg.readout_offset_hz = d.readout_offset_hz;
    return cfg;
}

namespace {

CellConfig parse_cell(const json& j, std::vector<std::string>& warnings) {
    static const std::set<std::string> known = {
        "cell_id",        "f_r_hz",          "quality_factor",
        "kerr_hz",        "g_hz",            "detuning_hz",
        "f01_hz",         "anharmonicity_hz", "gamma10_hz",
        "gamma21_hz",     "thermal_population", "temperature_k",
        "two_chi_override_hz", "readout_offset_hz", "drive_offset_hz"};
    if (!j.contains("cell_id") || !j.at("cell_id").is_number_integer())
        throw ConfigError("each cell needs an integer 'cell_id'");
    const int id = j.at("cell_id").get<int>();
    CellConfig cfg = default_cell(id);
    collect_unknown(j, known, "cells[]." , warnings);

    auto& p = cfg.params;
    p.f_r_bare_hz = get_num(j, "f_r_hz", p.f_r_bare_hz);
    p.quality_factor = get_num(j, "quality_factor", p.quality_factor);
    p.kerr_hz = get_num(j, "kerr_hz", p.kerr_hz);
    p.g_hz = get_num(j, "g_hz", p.g_hz);
    p.anharmonicity_hz = get_num(j, "anharmonicity_hz", p.anharmonicity_hz);
    p.gamma10 = get_num(j, "gamma10_hz", p.gamma10);
    p.gamma21 = get_num(j, "gamma21_hz", 2.0 * p.gamma10);

    if (j.contains("f01_hz")) {
        p.f01_hz = get_num(j, "f01_hz", p.f01_hz);
        if (j.contains("detuning_hz"))
            throw ConfigError("cell " + std::to_string(id) +
                              ": give either f01_hz or detuning_hz, not both");
    } else {
        p.f01_hz = p.f_r_bare_hz + get_num(j, "detuning_hz", kDefaultDetuningHz);
    }

    const double temp = get_num(j, "temperature_k", kDefaultTemperatureK);
    if (j.contains("thermal_population"))
        p.thermal_excited_population = get_num(j, "thermal_population", 0.0);
    else
        p.thermal_excited_population = thermal_population(p.f01_hz, temp);

    cfg.readout_offset_hz = get_num(j, "readout_offset_hz", cfg.readout_offset_hz);
    cfg.drive_offset_hz = get_num(j, "drive_offset_hz", cfg.drive_offset_hz);
    if (j.contains("two_chi_override_hz"))
        cfg.two_chi_override_hz = get_num(j, "two_chi_override_hz", 0.0);

    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("cell " + std::to_string(id) + ": " + e.what());
    }
    return cfg;
}

std::vector<double> parse_grid(const json& j, const char* name, double scale) {
    if (!j.is_object() || !j.contains("start") || !j.contains("stop") ||
        !j.contains("points"))
        throw ConfigError(std::string(name) + " needs {start, stop, points}");
    const double start = j.at("start").get<double>();
    const double stop = j.at("stop").get<double>();
    const int points = j.at("points").get<int>();
    if (points < 1) throw ConfigError(std::string(name) + ".points must be >= 1");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        const double f = (points == 1) ? 0.0
                                       : static_cast<double>(i) /
                                             static_cast<double>(points - 1);
        grid.push_back((start + f * (stop - start)) * scale);
    }
    return grid;
}

std::vector<bool> parse_flags(const json& j, std::size_t n_cells,
                              const char* name) {
    std::vector<bool> flags(n_cells, false);
    if (!j.is_array())
        throw ConfigError(std::string(name) + " must be an array of booleans");
    for (std::size_t i = 0; i < j.size() && i < n_cells; ++i)
        flags[i] = j.at(i).get<bool>();
    return flags;
}

}  // namespace

LoadedConfig parse_config(const std::string& text, const std::string& origin) {
    LoadedConfig out;
    out.raw_text = text;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }

    static const std::set<std::string> known_root = {"cells", "experiment"};
    collect_unknown(root, known_root, "", out.warnings);

    ExperimentPlan& plan = out.plan;
    if (!root.contains("cells") || !root.at("cells").is_array() ||
        root.at("cells").empty())
        throw ConfigError(origin + ": config needs a non-empty 'cells' array");
    for (const auto& jc : root.at("cells"))
        plan.cells.push_back(parse_cell(jc, out.warnings));

    json exp = root.value("experiment", json::object());
    static const std::set<std::string> known_exp = {
        "n_shots",       "master_seed",      "power_grid_db", "readout",
        "demod_window_ns", "noise_photons",  "jba_coupling_hz", "threads",
        "rabi",          "crosstalk",        "simultaneous",  "preps",
        "control_sigma_ns"};
    collect_unknown(exp, known_exp, "experiment.", out.warnings);

    plan.n_shots = static_cast<long>(get_num(exp, "n_shots", 2000));
    if (exp.contains("master_seed"))
        plan.master_seed = exp.at("master_seed").get<std::uint64_t>();
    plan.noise_photons = get_num(exp, "noise_photons", plan.noise_photons);
    plan.jba_coupling_hz = get_num(exp, "jba_coupling_hz", 0.0);
    plan.threads = static_cast<int>(get_num(exp, "threads", 0));
    plan.control_sigma_s = get_num(exp, "control_sigma_ns", 4.0) * 1e-9;

    if (exp.contains("power_grid_db"))
        plan.power_grid_db = parse_grid(exp.at("power_grid_db"), "power_grid_db", 1.0);
    else
        plan.power_grid_db = parse_grid(
            json{{"start", -10.0}, {"stop", 2.0}, {"points", 25}}, "power_grid_db", 1.0);

    json jr = exp.value("readout", json::object());
    static const std::set<std::string> known_readout = {
        "step_ns", "latch_ns", "latch_fraction", "sample_rate_hz"};
    collect_unknown(jr, known_readout, "experiment.readout.", out.warnings);
    plan.readout.shape.step_duration_s = get_num(jr, "step_ns", 25.0) * 1e-9;
    plan.readout.shape.latch_duration_s = get_num(jr, "latch_ns", 2000.0) * 1e-9;
    plan.readout.shape.latch_fraction = get_num(jr, "latch_fraction", 0.85);
    plan.readout.sample_rate_hz = get_num(jr, "sample_rate_hz", 2e9);

    if (exp.contains("demod_window_ns")) {
        const json& jw = exp.at("demod_window_ns");
        if (!jw.is_object() || !jw.contains("start") || !jw.contains("stop"))
            throw ConfigError("experiment.demod_window_ns needs {start, stop}");
        plan.readout.window.t_start_s = jw.at("start").get<double>() * 1e-9;
        plan.readout.window.t_stop_s = jw.at("stop").get<double>() * 1e-9;
    } else {
        // 1 us window; start tracks the measurement-step length
        const double start = 300e-9 + plan.readout.shape.step_duration_s;
        plan.readout.window.t_start_s = start;
        plan.readout.window.t_stop_s = start + 1e-6;
    }

    if (exp.contains("preps")) {
        plan.scurve_preps.clear();
        for (const auto& jp : exp.at("preps")) {
            const std::string name = jp.get<std::string>();
            if (name == "ground") plan.scurve_preps.push_back(PrepKind::Ground);
            else if (name == "pi01") plan.scurve_preps.push_back(PrepKind::Pi01);
            else if (name == "pi01_shelved")
                plan.scurve_preps.push_back(PrepKind::Pi01Shelved);
            else if (name == "half_pi01")
                plan.scurve_preps.push_back(PrepKind::HalfPi01);
            else if (name == "half_pi01_shelved")
                plan.scurve_preps.push_back(PrepKind::HalfPi01Shelved);
            else
                throw ConfigError("unknown prep '" + name + "'");
        }
        if (plan.scurve_preps.empty())
            throw ConfigError("experiment.preps must not be empty");
    }

    json jrabi = exp.value("rabi", json::object());
    static const std::set<std::string> known_rabi = {"power_db", "grid_ns",
                                                     "amplitude_scale", "shelve"};
    collect_unknown(jrabi, known_rabi, "experiment.rabi.", out.warnings);
    plan.rabi_power_db = get_num(jrabi, "power_db", plan.rabi_power_db);
    plan.rabi_amplitude_scale = get_num(jrabi, "amplitude_scale", 1.0);
    if (jrabi.contains("grid_ns"))
        plan.rabi_equiv_s = parse_grid(jrabi.at("grid_ns"), "rabi.grid_ns", 1e-9);
    else
        plan.rabi_equiv_s = parse_grid(
            json{{"start", 0.0}, {"stop", 40.0}, {"points", 17}}, "rabi.grid_ns", 1e-9);
    if (jrabi.contains("shelve"))
        plan.rabi_shelve = parse_flags(jrabi.at("shelve"), plan.cells.size(),
                                       "experiment.rabi.shelve");

    json jx = exp.value("crosstalk", json::object());
    static const std::set<std::string> known_x = {"power_db", "control", "target"};
    collect_unknown(jx, known_x, "experiment.crosstalk.", out.warnings);
    plan.crosstalk_power_db = get_num(jx, "power_db", plan.crosstalk_power_db);
    plan.crosstalk_control_cell = static_cast<int>(get_num(jx, "control", 1));
    plan.crosstalk_target_cell = static_cast<int>(get_num(jx, "target", 2));

    json js = exp.value("simultaneous", json::object());
    static const std::set<std::string> known_s = {"power_db", "shelve"};
    collect_unknown(js, known_s, "experiment.simultaneous.", out.warnings);
    plan.simultaneous_power_db = get_num(js, "power_db", plan.simultaneous_power_db);
    if (js.contains("shelve"))
        plan.simultaneous_shelve = parse_flags(js.at("shelve"), plan.cells.size(),
                                               "experiment.simultaneous.shelve");

    try {
        plan.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return out;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256_hex: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void RunManifest::write(const std::string& path) const {
    json j;
    j["artifact_version"] = artifact_version;
    j["config_digest_sha256"] = config_digest_sha256;
    j["master_seed"] = master_seed;
    j["threads"] = threads;
    j["seed_scheme"] = seed_scheme;
    j["outputs"] = outputs;
    j["warnings"] = warnings;
    j["wall_clock_s"] = wall_clock_s;
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("RunManifest: cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace muxjba
