#include "muxjba/params.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace muxjba {

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw std::invalid_argument("CellParams." + field + ": " + why);
}

}  // namespace

void CellParams::validate() const {
    if (!(f_r_bare_hz > 0)) bad_field("f_r_bare_hz", "must be positive");
    if (!(quality_factor > 0)) bad_field("quality_factor", "must be positive");
    if (!(kerr_hz < 0)) bad_field("kerr_hz", "must be negative");
    if (!(f01_hz > 0)) bad_field("f01_hz", "must be positive");
    if (!(anharmonicity_hz < 0)) bad_field("anharmonicity_hz", "must be negative");
    if (!(gamma10 >= 0)) bad_field("gamma10", "must be non-negative");
    if (!(gamma21 >= 0)) bad_field("gamma21", "must be non-negative");
    if (!(thermal_excited_population >= 0 && thermal_excited_population < 0.5))
        bad_field("thermal_excited_population", "must lie in [0, 0.5)");
    // dispersive regime guard
    const double kappa = f_r_bare_hz / quality_factor;
    if (!(std::abs(f01_hz - f_r_bare_hz) > 10.0 * kappa))
        bad_field("f01_hz", "|f01 - f_r| must exceed 10 linewidths (dispersive regime)");
}

double linewidth_hz(const CellParams& p) {
    if (!(p.quality_factor > 0))
        throw std::invalid_argument("linewidth_hz: quality_factor must be positive");
    return p.f_r_bare_hz / p.quality_factor;
}

DispersivePulls dispersive_pulls(const CellParams& p) {
    const double kappa = linewidth_hz(p);
    const double g2 = p.g_hz * p.g_hz;
    // ladder transitions f_{k,k+1} = f01 + k * alpha, couplings g sqrt(k+1)
    std::array<double, 3> delta{};
    for (int k = 0; k < 3; ++k) {
        delta[k] = p.f01_hz + k * p.anharmonicity_hz - p.f_r_bare_hz;
        if (std::abs(delta[k]) < 10.0 * kappa)
            throw std::invalid_argument(
                "dispersive_pulls: transition " + std::to_string(k) + "-" +
                std::to_string(k + 1) + " is degenerate with the resonator");
    }
    DispersivePulls out;
    for (int k = 0; k < 3; ++k) {
        const double from_below = (k > 0) ? k * g2 / delta[k - 1] : 0.0;
        const double from_above = (k + 1) * g2 / delta[k];
        out.pull_hz[k] = from_below - from_above;
    }
    return out;
}

double purcell_time_s(const CellParams& p) {
    const double delta = p.detuning_hz();
    if (delta == 0.0)
        throw std::invalid_argument("purcell_time_s: zero qubit-resonator detuning");
    if (p.g_hz == 0.0) return std::numeric_limits<double>::infinity();
    const double ratio = p.g_hz / delta;
    const double rate = 2.0 * M_PI * linewidth_hz(p) * ratio * ratio;
    return 1.0 / rate;
}

double thermal_population(double f01_hz, double temperature_k) {
    if (!(temperature_k > 0))
        throw std::invalid_argument("thermal_population: temperature must be positive");
    const double x = std::exp(-kPlanckH * f01_hz / (kBoltzmann * temperature_k));
    return x / (1.0 + x);
}

}  // namespace muxjba
