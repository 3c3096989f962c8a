#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muxjba/params.hpp"
#include "muxjba/rng.hpp"

namespace muxjba {

class ShotRng;

/// Resonant control pulse on one transmon transition, with 3-sigma Gaussian
/// rise and fall around an optional flat top.
struct ControlPulse {
    int level_a = 0;        ///< lower level of the driven transition
    int level_b = 1;        ///< upper level, must be level_a + 1
    double angle_rad = 3.14159265358979323846;
    double sigma_s = 4e-9;
    double flat_top_s = 0.0;
    double start_s = 0.0;

    double edge_s() const { return 3.0 * sigma_s; }
    double duration_s() const { return flat_top_s + 2.0 * edge_s(); }
    double end_s() const { return start_s + duration_s(); }

    void validate() const;
};

/// Duration of the rectangular pulse with the same area and peak amplitude.
double equivalent_duration_s(const ControlPulse& pulse);

/// Envelope value in [0, 1] at absolute time t.
double control_envelope_value(const ControlPulse& pulse, double t_s);

/// Fraction of the total pulse area accumulated up to absolute time t.
double pulse_area_fraction(const ControlPulse& pulse, double t_s);

struct LevelJump {
    double t_s;
    int level;  ///< level after the jump
};

/// Piecewise-constant record of one qubit's level versus time.
struct QubitTrajectory {
    int initial_level = 0;
    double t_begin_s = 0.0;
    double t_end_s = 0.0;
    std::vector<LevelJump> events;  ///< strictly increasing times

    int level_at(double t_s) const;
    int final_level() const {
        return events.empty() ? initial_level : events.back().level;
    }
};

/// Three-level Monte Carlo: thermal initialization, stochastic population
/// transfer by the control pulses, and downward relaxation jumps (2->1 at
/// gamma21, 1->0 at gamma10) sampled continuously, including during pulses.
/// A relaxation jump inside a pulse ends that pulse's action on the shot.
/// Pulses must not overlap in time.
QubitTrajectory simulate_qubit(std::span<const ControlPulse> pulses,
                               const CellParams& params, double t_end_s,
                               ShotRng& rng);
QubitTrajectory simulate_qubit(std::span<const ControlPulse> pulses,
                               const CellParams& params, double t_end_s,
                               std::uint64_t seed);

struct TimedValue {
    double t_s;
    double value;
};

/// Maps each trajectory segment at level k to pulls.pull_hz[k].
std::vector<TimedValue> pull_timeline(const QubitTrajectory& traj,
                                      const DispersivePulls& pulls);

}  // namespace muxjba
