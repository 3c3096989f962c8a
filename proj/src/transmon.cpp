#include "muxjba/transmon.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace muxjba {

namespace {

constexpr double kSqrtHalfPi = 1.2533141373155002512;  // sqrt(pi/2)
constexpr double kTwoPi = 6.2831853071795864769;

double edge_area(double sigma) {
    // integral of exp(-(t - 3s)^2 / 2s^2) over one 3-sigma edge
    return sigma * kSqrtHalfPi * std::erf(3.0 / std::sqrt(2.0));
}

}  // namespace

void ControlPulse::validate() const {
    if (level_b != level_a + 1 || level_a < 0 || level_b > 2)
        throw std::invalid_argument("ControlPulse: transition must be (0,1) or (1,2)");
    if (!(sigma_s > 0))
        throw std::invalid_argument("ControlPulse.sigma_s: must be positive");
    if (!(flat_top_s >= 0))
        throw std::invalid_argument("ControlPulse.flat_top_s: must be non-negative");
    if (!(angle_rad >= 0 && angle_rad <= kTwoPi + 1e-12))
        throw std::invalid_argument("ControlPulse.angle_rad: must lie in [0, 2 pi]");
}

double equivalent_duration_s(const ControlPulse& pulse) {
    return pulse.flat_top_s + 2.0 * edge_area(pulse.sigma_s);
}

double control_envelope_value(const ControlPulse& pulse, double t_s) {
    const double tau = t_s - pulse.start_s;
    const double edge = pulse.edge_s();
    if (tau <= 0.0 || tau >= pulse.duration_s()) return 0.0;
    if (tau < edge) {
        const double x = (tau - edge) / pulse.sigma_s;
        return std::exp(-0.5 * x * x);
    }
    if (tau <= edge + pulse.flat_top_s) return 1.0;
    const double x = (tau - edge - pulse.flat_top_s) / pulse.sigma_s;
    return std::exp(-0.5 * x * x);
}

double pulse_area_fraction(const ControlPulse& pulse, double t_s) {
    const double tau = t_s - pulse.start_s;
    const double edge = pulse.edge_s();
    const double a_edge = edge_area(pulse.sigma_s);
    const double total = 2.0 * a_edge + pulse.flat_top_s;
    if (tau <= 0.0) return 0.0;
    if (tau >= pulse.duration_s()) return 1.0;
    double area;
    if (tau < edge) {
        const double s2 = pulse.sigma_s * std::sqrt(2.0);
        area = pulse.sigma_s * kSqrtHalfPi *
               (std::erf(3.0 / std::sqrt(2.0)) + std::erf((tau - edge) / s2));
    } else if (tau <= edge + pulse.flat_top_s) {
        area = a_edge + (tau - edge);
    } else {
        const double s2 = pulse.sigma_s * std::sqrt(2.0);
        area = a_edge + pulse.flat_top_s +
               pulse.sigma_s * kSqrtHalfPi * std::erf((tau - edge - pulse.flat_top_s) / s2);
    }
    return area / total;
}

int QubitTrajectory::level_at(double t_s) const {
    int level = initial_level;
    for (const auto& e : events) {
        if (e.t_s > t_s) break;
        level = e.level;
    }
    return level;
}

namespace {

double relax_rate(const CellParams& p, int level) {
    if (level == 2) return p.gamma21;
    if (level == 1) return p.gamma10;
    return 0.0;
}

// Advance with relaxation only, up to t_target.
void relax_until(const CellParams& p, ShotRng& rng, double& t, int& level,
                 double t_target, std::vector<LevelJump>& events) {
    while (level > 0) {
        const double rate = relax_rate(p, level);
        if (rate <= 0.0) break;
        const double wait = rng.exponential(rate);
        if (t + wait >= t_target) break;
        t += wait;
        --level;
        events.push_back({t, level});
    }
    t = t_target;
}

// Invert the monotone accumulated-area fraction: A(t) = target.
double invert_area(const ControlPulse& pulse, double target) {
    double lo = pulse.start_s;
    double hi = pulse.end_s();
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (pulse_area_fraction(pulse, mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

QubitTrajectory simulate_qubit(std::span<const ControlPulse> pulses,
                               const CellParams& params, double t_end_s,
                               ShotRng& rng) {
    std::vector<ControlPulse> sorted(pulses.begin(), pulses.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const ControlPulse& a, const ControlPulse& b) {
                  return a.start_s < b.start_s;
              });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        sorted[i].validate();
        if (i > 0 && sorted[i].start_s < sorted[i - 1].end_s() - 1e-15)
            throw std::invalid_argument("simulate_qubit: overlapping control pulses");
        if (sorted[i].end_s() > t_end_s + 1e-15)
            throw std::invalid_argument("simulate_qubit: pulse extends past t_end");
    }

    QubitTrajectory traj;
    traj.t_begin_s = std::min(0.0, sorted.empty() ? 0.0 : sorted.front().start_s);
    traj.t_end_s = t_end_s;
    int level = (rng.uniform() < params.thermal_excited_population) ? 1 : 0;
    traj.initial_level = level;
    double t = traj.t_begin_s;

    for (const auto& pulse : sorted) {
        relax_until(params, rng, t, level, pulse.start_s, traj.events);
        if (level != pulse.level_a && level != pulse.level_b) continue;

        const int base = level;
        const double u = rng.uniform();
        // times at which sin^2(theta_cum/2) crosses u; the occupied level
        // toggles at each crossing
        std::vector<double> crossings;
        const double theta_up = 2.0 * std::asin(std::sqrt(u));
        if (theta_up <= pulse.angle_rad)
            crossings.push_back(invert_area(pulse, theta_up / pulse.angle_rad));
        const double theta_down = kTwoPi - theta_up;
        if (theta_down <= pulse.angle_rad)
            crossings.push_back(invert_area(pulse, theta_down / pulse.angle_rad));

        bool flipped = false;
        bool cancelled = false;
        std::size_t next_cross = 0;
        while (t < pulse.end_s()) {
            const double seg_end =
                (next_cross < crossings.size()) ? crossings[next_cross] : pulse.end_s();
            const int occupant = flipped ? (base == pulse.level_a ? pulse.level_b
                                                                  : pulse.level_a)
                                         : base;
            if (occupant != level) {
                level = occupant;
                traj.events.push_back({t, level});
            }
            const double rate = relax_rate(params, level);
            if (rate > 0.0) {
                const double wait = rng.exponential(rate);
                if (t + wait < seg_end) {
                    t += wait;
                    --level;
                    traj.events.push_back({t, level});
                    cancelled = true;  // the jump ends the pulse's action
                    break;
                }
            }
            t = seg_end;
            if (next_cross < crossings.size()) {
                flipped = !flipped;
                ++next_cross;
            }
        }
        if (cancelled) relax_until(params, rng, t, level, pulse.end_s(), traj.events);
    }
    relax_until(params, rng, t, level, t_end_s, traj.events);
    return traj;
}

QubitTrajectory simulate_qubit(std::span<const ControlPulse> pulses,
                               const CellParams& params, double t_end_s,
                               std::uint64_t seed) {
    ShotRng rng(seed);
    return simulate_qubit(pulses, params, t_end_s, rng);
}

std::vector<TimedValue> pull_timeline(const QubitTrajectory& traj,
                                      const DispersivePulls& pulls) {
    std::vector<TimedValue> timeline;
    timeline.reserve(traj.events.size() + 1);
    timeline.push_back({traj.t_begin_s, pulls.pull_hz[traj.initial_level]});
    for (const auto& e : traj.events)
        timeline.push_back({e.t_s, pulls.pull_hz[e.level]});
    return timeline;
}

}  // namespace muxjba
