#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "muxjba/analysis.hpp"
#include "muxjba/transmon.hpp"
#include "muxjba/waveform.hpp"

namespace muxjba {

// Semiclassical Kerr resonator in the frame rotating at the drive:
//
//   da/dt = [-i 2pi (Delta_d + K |a|^2) - pi kappa] a - i 2pi u(t) + noise
//
// with Delta_d = f_resonator_eff - f_drive (> 0 for a drive below resonance),
// K < 0 and u the drive envelope normalized so that steady states satisfy
//
//   n [(Delta_d + K n)^2 + (kappa/2)^2] = |u|^2 ,   n = |a|^2.
//
// Bistability requires Delta_d and -K of the same sign and
// Delta_d > sqrt(3) kappa / 2.

struct DriveFrame {
    double detuning_hz = 9e6;   ///< Delta_d, including the qubit-state pull
    double kerr_hz = -310e3;    ///< K
    double kappa_hz = 3.1e6;    ///< linewidth

    void validate() const;
};

struct SteadyStates {
    int count = 0;
    std::array<double, 3> n{};  ///< ascending photon numbers

    double low() const { return n[0]; }
    double unstable() const { return n[1]; }
    double high() const { return n[count - 1]; }
};

/// All real non-negative roots of the steady-state cubic at drive amplitude
/// eps = |u|, polished to relative residual < 1e-9.
SteadyStates steady_states(const DriveFrame& frame, double eps);

struct BifurcationEdges {
    double n_low_edge;   ///< photon number where the low branch terminates
    double n_high_edge;  ///< photon number where the high branch terminates
};

/// Roots of 3 K^2 n^2 + 4 Delta K n + (Delta^2 + kappa^2/4) = 0 when the
/// bistability conditions hold, nullopt otherwise.
std::optional<BifurcationEdges> bifurcation_edges(const DriveFrame& frame);

/// Drive amplitude at which the low branch disappears (deterministic
/// switching threshold). nullopt when the frame is never bistable.
std::optional<double> bifurcation_drive(const DriveFrame& frame);

/// Drive amplitude at which the high branch disappears (retrapping edge).
std::optional<double> retrap_drive(const DriveFrame& frame);

struct FieldTrajectory {
    std::vector<std::complex<double>> samples;  ///< empty when not recorded
    double dt_s = 0.5e-9;
    double t0_s = 0.0;
    bool latch_flag = false;
    std::optional<double> latch_time_s;  ///< start of the sustained crossing
    std::complex<double> final_amplitude{};
};

inline constexpr double kLatchSustainS = 50e-9;
inline constexpr double kPhotonOverflow = 1e4;

/// One resonator amplitude record for the coupled integrator.
struct CellDrive {
    DriveFrame frame;
    const ComplexEnvelope* envelope = nullptr;
    /// Additive detuning offsets versus time (already referenced to the
    /// frame's base detuning); first breakpoint must not postdate the
    /// envelope start. Empty means no offset.
    std::span<const TimedValue> detuning_offsets{};
    double ssb_offset_hz = 0.0;  ///< channel offset, sets coupling beat notes
    std::uint64_t noise_seed = 0;
    std::complex<double> initial_amplitude{0.0, 0.0};
};

/// Exponential Euler-Maruyama integration of N resonators with optional
/// linear inter-resonator coupling (rotating beat phases between frames).
/// noise_photons sets the additive white noise so that an undriven resonator
/// thermalizes to <|a|^2> = noise_photons.
std::vector<FieldTrajectory> integrate_coupled(std::span<const CellDrive> cells,
                                               double coupling_hz,
                                               double noise_photons,
                                               bool record_samples = true);

/// Single-resonator convenience wrapper.
FieldTrajectory integrate_field(const DriveFrame& frame,
                                const ComplexEnvelope& envelope,
                                double noise_photons,
                                std::span<const TimedValue> detuning_offsets,
                                std::uint64_t seed,
                                bool record_samples = true,
                                std::complex<double> initial_amplitude = {});

/// Latch fraction versus drive power on a dB grid relative to the frame's
/// deterministic bifurcation power, n_shots stochastic integrations each.
SCurve switching_probability_vs_drive(const DriveFrame& frame,
                                      const ReadoutPulseShape& shape,
                                      double noise_photons, int n_shots,
                                      std::uint64_t seed,
                                      std::span<const double> powers_db,
                                      int threads = 1);

}  // namespace muxjba
