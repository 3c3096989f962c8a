#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "muxjba/analysis.hpp"
#include "muxjba/demod.hpp"
#include "muxjba/jba.hpp"
#include "muxjba/params.hpp"
#include "muxjba/transmon.hpp"
#include "muxjba/waveform.hpp"

namespace muxjba {

enum class PrepKind {
    Ground,          ///< no control pulse
    Pi01,            ///< pi on 0-1
    Pi01Shelved,     ///< pi on 0-1 then pi on 1-2
    HalfPi01,        ///< pi/2 on 0-1
    HalfPi01Shelved  ///< pi/2 on 0-1 then pi on 1-2
};

std::string prep_name(PrepKind k);
bool prep_shelved(PrepKind k);

/// One qubit+JBA cell as configured for a run.
struct CellConfig {
    CellParams params;
    double readout_offset_hz = -122e6;  ///< delta_Ri = f_Ri - f_R0
    double drive_offset_hz = 9e6;       ///< drive below the (ground) resonance
    std::optional<double> two_chi_override_hz;  ///< measured 2chi, rescales pulls
};

struct ReadoutSettings {
    ReadoutPulseShape shape;
    DemodWindow window;
    double sample_rate_hz = 2e9;
};

struct ExperimentPlan {
    std::vector<CellConfig> cells;
    ReadoutSettings readout;
    std::vector<double> power_grid_db;
    std::vector<PrepKind> scurve_preps = {PrepKind::Ground, PrepKind::Pi01,
                                          PrepKind::Pi01Shelved};

    // Rabi settings
    std::vector<double> rabi_equiv_s;
    double rabi_power_db = -2.5;
    double rabi_amplitude_scale = 1.0;
    std::vector<bool> rabi_shelve;  ///< per cell; empty = none

    // Crosstalk settings
    int crosstalk_control_cell = 1;
    int crosstalk_target_cell = 2;
    double crosstalk_power_db = -3.0;

    // Single-point multiplexed readout settings
    double simultaneous_power_db = -3.0;
    std::vector<bool> simultaneous_shelve;  ///< per cell; empty = none

    long n_shots = 2000;
    std::uint64_t master_seed = 20260809;
    double noise_photons = 0.21;
    double jba_coupling_hz = 0.0;
    double control_sigma_s = 4e-9;
    int threads = 0;  ///< <= 0 means hardware concurrency

    void validate() const;
};

/// Per-cell quantities derived once per run.
struct CellReadoutDerived {
    DispersivePulls pulls;                 ///< raw dispersive-model pulls
    std::array<double, 3> delta_d_hz{};    ///< drive detuning per qubit level
    double eps_bif = 0.0;                  ///< ground-level bifurcation drive
    double kappa_hz = 0.0;
    double two_chi_effective_hz = 0.0;
};

CellReadoutDerived derive_readout(const CellConfig& cell);

/// Control pulses realizing a preparation, ending at t = 0 (readout start).
std::vector<ControlPulse> make_prep_pulses(PrepKind kind, double sigma_s);

struct PrepCurveSet {
    std::string prep;
    std::vector<SCurve> per_cell;        ///< IQ-decision curves
    std::vector<SCurve> per_cell_latch;  ///< latch-flag ground truth
    /// agreement[cell][power] = fraction of shots where the separatrix
    /// decision matches latch_flag
    std::vector<std::vector<double>> agreement;
};

struct ScurveExperimentResult {
    std::vector<PrepCurveSet> preps;
    std::vector<Separatrix> separatrix_per_cell;

    const PrepCurveSet& find(const std::string& prep) const;
};

/// Full chain per shot: simulate_qubit -> pull timeline -> coupled field
/// integration -> compose/digitize/demodulate -> separatrix decision.
ScurveExperimentResult run_scurve_experiment(const ExperimentPlan& plan);

struct RabiFit {
    double period_s = 0.0;
    double contrast = 0.0;
    double offset = 0.0;
};

struct RabiResult {
    std::vector<double> t_equiv_s;
    /// p[cell][point], std[cell][point]
    std::vector<std::vector<double>> p;
    std::vector<std::vector<double>> std_dev;
    std::vector<RabiFit> fits;
};

RabiResult run_rabi_experiment(const ExperimentPlan& plan);

struct CrosstalkResult {
    double p_target_control_ground = 0.0;
    double p_target_control_excited = 0.0;
    double delta_p = 0.0;
    double sigma = 0.0;
    long n_shots_per_arm = 0;
    /// shots per arm needed to resolve delta_p at the given sigma
    long shots_needed(double sigma_target) const;
};

CrosstalkResult run_crosstalk_experiment(const ExperimentPlan& plan);

struct CellCloud {
    int cell_id = 0;
    std::vector<IQPoint> points;
    std::vector<std::uint8_t> latched;
    Separatrix separatrix;
    bool separatrix_valid = false;
    double p_switch = 0.0;
    /// histogram of the projection on the separatrix normal
    std::vector<double> hist_centers;
    std::vector<long> hist_counts;
};

struct SimultaneousResult {
    std::vector<CellCloud> cells;
    ComplexEnvelope composed_shot0;  ///< summed readout waveform of shot 0
};

/// All readout tones in one waveform, four field trajectories, four channels
/// demodulated from the single summed record.
SimultaneousResult run_simultaneous_readout(const ExperimentPlan& plan,
                                            PrepKind prep = PrepKind::HalfPi01);

/// Bisects the noise strength until the cell-0 ground-state S-curve
/// 1%-99% width matches target_width_db.
double calibrate_noise(ExperimentPlan plan, double target_width_db = 2.4,
                       double tol_db = 0.03);

/// Three-prep S-curve run followed by the error-budget attribution.
struct BudgetRun {
    ScurveExperimentResult curves;
    ErrorBudget budget;
    IdealSCurves ideal;
};

BudgetRun run_error_budget(const ExperimentPlan& plan, int cell_index = 0);

}  // namespace muxjba
