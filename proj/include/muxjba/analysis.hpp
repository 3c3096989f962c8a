#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muxjba/demod.hpp"
#include "muxjba/params.hpp"
#include "muxjba/transmon.hpp"

namespace muxjba {

/// Decision boundary in the (I, Q) plane: unit normal and scalar offset.
/// side() is true on the side the second training cloud lives on.
struct Separatrix {
    double normal_i = 1.0;
    double normal_q = 0.0;
    double offset = 0.0;

    double project(const IQPoint& p) const {
        return normal_i * p.i_value + normal_q * p.q_value;
    }
    bool side(const IQPoint& p) const { return project(p) > offset; }
};

/// Switching probability versus readout power.
struct SCurve {
    std::vector<double> power_db;
    std::vector<double> p_switch;
    std::vector<double> std_dev;     ///< binomial, sqrt(p(1-p)/n)
    std::vector<long> n_shots;

    std::size_t size() const { return power_db.size(); }
};

struct ErrorBudget {
    double ground_error = 0.0;
    double excited_error_noshelve = 0.0;
    double excited_error_shelve = 0.0;
    double thermal_component = 0.0;
    double prep_relaxation_component = 0.0;          ///< no-shelving prep
    double readout_relaxation_component = 0.0;       ///< no-shelving remainder
    double prep_relaxation_component_shelved = 0.0;
    double readout_relaxation_component_shelved = 0.0;
    double optimal_power_db = 0.0;
    double optimal_power_shelved_db = 0.0;
    double shelved_plateau_p = 0.0;
};

/// sqrt(p (1 - p) / n)
double binomial_std(double p, long n);

/// Fisher discriminant between two IQ clouds; the threshold sits at the
/// center of the emptiest histogram run between the two projected modes.
/// Requires >= 50 points per cloud; throws std::runtime_error when the
/// centroids are closer than one pooled projected standard deviation.
Separatrix fit_separatrix(std::span<const IQPoint> cloud_a,
                          std::span<const IQPoint> cloud_b);

/// Power difference between the interpolated lo and hi crossings.
/// Throws std::runtime_error when the curve does not cross a level.
double scurve_width_db(const SCurve& s, double lo = 0.01, double hi = 0.99);

/// Difference of the 50% crossing powers, s1 relative to s0 (positive when
/// s0 switches at higher power).
double scurve_separation_db(const SCurve& s0, const SCurve& s1);

/// Interpolated power at which the curve first crosses `level` from below.
double scurve_crossing_db(const SCurve& s, double level);

struct IdealSCurves {
    SCurve ground;
    SCurve excited;
    double shift_db = 0.0;          ///< power shift applied to the spliced halves
    double expected_shoulder = 0.0; ///< p_th handed in by the caller, recorded
};

/// Splice reconstruction of intrinsic S-curves: the ground curve keeps its
/// p > 0.5 part and takes the power-shifted excited curve below, and vice
/// versa. The shift comes from the 50% crossings unless relax_shift_db is
/// nonzero. Throws std::runtime_error on a splice discontinuity > 0.02.
IdealSCurves reconstruct_ideal_scurves(const SCurve& s0, const SCurve& s1,
                                       double p_th = 0.0,
                                       double relax_shift_db = 0.0);

/// Reads totals at the maximum-contrast powers and attributes them to
/// thermal occupation, preparation relaxation (Monte Carlo differencing of
/// simulate_qubit with relaxation on/off) and a readout-relaxation remainder.
ErrorBudget error_budget(const SCurve& p0_curve, const SCurve& p1_curve,
                         const SCurve& p1_shelved_curve,
                         const CellParams& params,
                         std::span<const ControlPulse> prep_noshelve,
                         std::span<const ControlPulse> prep_shelve,
                         long n_mc = 200000, std::uint64_t seed = 1);

}  // namespace muxjba
