#pragma once

#include <array>

namespace muxjba {

inline constexpr double kPlanckH = 6.62607015e-34;   // J s
inline constexpr double kBoltzmann = 1.380649e-23;   // J / K

/// Static physical parameters of one qubit + JBA readout cell.
///
/// All frequencies are ordinary (per-2pi) values in Hz, all rates in s^-1.
/// Defaults correspond to cell 1 of the reference device.
struct CellParams {
    int cell_id = 1;
    double f_r_bare_hz = 7.75e9;        ///< JBA resonance (qubit in ground state)
    double quality_factor = 2500.0;
    double kerr_hz = -310e3;            ///< Kerr shift per photon, < 0
    double g_hz = 85e6;                 ///< qubit-resonator coupling
    double f01_hz = 6.67e9;             ///< |0>-|1> transition
    double anharmonicity_hz = -434e6;   ///< f12 - f01, < 0
    double gamma10 = 5.0e5;             ///< |1> -> |0> relaxation rate
    double gamma21 = 1.0e6;             ///< |2> -> |1> relaxation rate
    double thermal_excited_population = 0.0102;

    double detuning_hz() const { return f01_hz - f_r_bare_hz; }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Resonator frequency offset when the qubit sits in level 0, 1 or 2.
struct DispersivePulls {
    std::array<double, 3> pull_hz{};

    double two_chi_hz() const { return pull_hz[0] - pull_hz[1]; }
};

/// Resonator linewidth kappa = f_r / Q.
double linewidth_hz(const CellParams& p);

/// Second-order transmon dispersive shifts with ladder couplings g*sqrt(k+1).
/// A qubit below the resonator pushes the resonator up (level repulsion).
/// Throws std::invalid_argument when any |f_{k,k+1} - f_r| < 10 * linewidth.
DispersivePulls dispersive_pulls(const CellParams& p);

/// Purcell-limited relaxation time [2 pi f_r / Q * (g / Delta)^2]^-1.
/// Returns +inf for g = 0; throws std::invalid_argument for Delta = 0.
double purcell_time_s(const CellParams& p);

/// Two-level Boltzmann excited-state population at the given temperature.
double thermal_population(double f01_hz, double temperature_k);

}  // namespace muxjba
