#include "muxjba/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "muxjba/rng.hpp"

namespace muxjba {

double binomial_std(double p, long n) {
    if (n < 1) throw std::invalid_argument("binomial_std: n must be >= 1");
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

namespace {

struct Stats2D {
    double mi = 0.0, mq = 0.0;       // centroid
    double sii = 0.0, siq = 0.0, sqq = 0.0;  // scatter around centroid
};

Stats2D cloud_stats(std::span<const IQPoint> cloud) {
    Stats2D st;
    const double n = static_cast<double>(cloud.size());
    for (const auto& p : cloud) {
        st.mi += p.i_value;
        st.mq += p.q_value;
    }
    st.mi /= n;
    st.mq /= n;
    for (const auto& p : cloud) {
        const double di = p.i_value - st.mi;
        const double dq = p.q_value - st.mq;
        st.sii += di * di;
        st.siq += di * dq;
        st.sqq += dq * dq;
    }
    return st;
}

}  // namespace

Separatrix fit_separatrix(std::span<const IQPoint> cloud_a,
                          std::span<const IQPoint> cloud_b) {
    if (cloud_a.size() < 50 || cloud_b.size() < 50)
        throw std::invalid_argument("fit_separatrix: need >= 50 points per cloud");
    const Stats2D sa = cloud_stats(cloud_a);
    const Stats2D sb = cloud_stats(cloud_b);
    const double dof = static_cast<double>(cloud_a.size() + cloud_b.size() - 2);
    double cii = (sa.sii + sb.sii) / dof;
    double ciq = (sa.siq + sb.siq) / dof;
    double cqq = (sa.sqq + sb.sqq) / dof;
    const double di = sb.mi - sa.mi;
    const double dq = sb.mq - sa.mq;
    // regularize so point-like clouds fall back to the centroid axis
    const double reg = 1e-12 * (cii + cqq + di * di + dq * dq) + 1e-300;
    cii += reg;
    cqq += reg;

    // w = S^-1 (mu_b - mu_a)
    const double det = cii * cqq - ciq * ciq;
    double wi = (cqq * di - ciq * dq) / det;
    double wq = (cii * dq - ciq * di) / det;
    const double wnorm = std::hypot(wi, wq);
    if (!(wnorm > 0))
        throw std::runtime_error("fit_separatrix: degenerate clouds");
    wi /= wnorm;
    wq /= wnorm;

    auto project = [&](const IQPoint& p) { return wi * p.i_value + wq * p.q_value; };
    double pa = 0.0, pb = 0.0;
    for (const auto& p : cloud_a) pa += project(p);
    for (const auto& p : cloud_b) pb += project(p);
    pa /= static_cast<double>(cloud_a.size());
    pb /= static_cast<double>(cloud_b.size());

    double va = 0.0, vb = 0.0;
    for (const auto& p : cloud_a) va += (project(p) - pa) * (project(p) - pa);
    for (const auto& p : cloud_b) vb += (project(p) - pb) * (project(p) - pb);
    const double pooled_std =
        std::sqrt((va + vb) / static_cast<double>(cloud_a.size() + cloud_b.size()));

    if (std::abs(pb - pa) < pooled_std)
        throw std::runtime_error(
            "fit_separatrix: clouds overlap (centroid separation below one "
            "pooled standard deviation)");

    // Histogram along w between the modes; the threshold sits at the center
    // of the emptiest run. Bin width emulates the 10 mV bins of the device
    // histograms via std matching.
    const double lo = std::min(pa, pb);
    const double hi = std::max(pa, pb);
    const double bin = std::max(0.3 * pooled_std, (hi - lo) * 1e-4);
    const int n_bins = std::max(4, static_cast<int>(std::ceil((hi - lo) / bin)));
    std::vector<long> counts(static_cast<std::size_t>(n_bins), 0);
    auto deposit = [&](double x) {
        if (x <= lo || x >= hi) return;
        const int b = std::min(n_bins - 1,
                               static_cast<int>((x - lo) / (hi - lo) * n_bins));
        ++counts[static_cast<std::size_t>(b)];
    };
    for (const auto& p : cloud_a) deposit(project(p));
    for (const auto& p : cloud_b) deposit(project(p));

    long best = counts[0];
    for (long c : counts) best = std::min(best, c);
    // center of the longest run of minimal-count bins
    int best_start = 0, best_len = 0, run_start = -1;
    for (int i = 0; i <= n_bins; ++i) {
        const bool is_min = (i < n_bins) && (counts[static_cast<std::size_t>(i)] == best);
        if (is_min && run_start < 0) run_start = i;
        if (!is_min && run_start >= 0) {
            if (i - run_start > best_len) {
                best_len = i - run_start;
                best_start = run_start;
            }
            run_start = -1;
        }
    }
    const double center_bin = best_start + 0.5 * best_len;
    const double offset = lo + (hi - lo) * center_bin / n_bins;

    Separatrix sep;
    sep.normal_i = wi;
    sep.normal_q = wq;
    sep.offset = offset;
    if (pb < pa) {  // orient side() toward cloud_b
        sep.normal_i = -wi;
        sep.normal_q = -wq;
        sep.offset = -offset;
    }
    return sep;
}

double scurve_crossing_db(const SCurve& s, double level) {
    if (s.size() < 2)
        throw std::runtime_error("scurve_crossing_db: need at least two points");
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double p0 = s.p_switch[i];
        const double p1 = s.p_switch[i + 1];
        if (p0 < level && p1 >= level) {
            const double f = (level - p0) / (p1 - p0);
            return s.power_db[i] + f * (s.power_db[i + 1] - s.power_db[i]);
        }
    }
    if (s.p_switch.front() >= level) return s.power_db.front();
    throw std::runtime_error("scurve_crossing_db: curve does not cross the level");
}

double scurve_width_db(const SCurve& s, double lo, double hi) {
    return scurve_crossing_db(s, hi) - scurve_crossing_db(s, lo);
}

double scurve_separation_db(const SCurve& s0, const SCurve& s1) {
    return scurve_crossing_db(s0, 0.5) - scurve_crossing_db(s1, 0.5);
}

namespace {

// linear interpolation of a curve at an arbitrary power, clamped at the ends
double curve_value_at(const SCurve& s, double power_db) {
    if (power_db <= s.power_db.front()) return s.p_switch.front();
    if (power_db >= s.power_db.back()) return s.p_switch.back();
    const auto it = std::upper_bound(s.power_db.begin(), s.power_db.end(), power_db);
    const std::size_t i1 = static_cast<std::size_t>(it - s.power_db.begin());
    const std::size_t i0 = i1 - 1;
    const double f = (power_db - s.power_db[i0]) / (s.power_db[i1] - s.power_db[i0]);
    return s.p_switch[i0] + f * (s.p_switch[i1] - s.p_switch[i0]);
}

}  // namespace

IdealSCurves reconstruct_ideal_scurves(const SCurve& s0, const SCurve& s1,
                                       double p_th, double relax_shift_db) {
    const double p50_0 = scurve_crossing_db(s0, 0.5);
    const double p50_1 = scurve_crossing_db(s1, 0.5);
    const double shift = (relax_shift_db != 0.0) ? relax_shift_db : (p50_0 - p50_1);

    IdealSCurves out;
    out.shift_db = shift;
    out.expected_shoulder = p_th;
    out.ground = s0;
    out.excited = s1;
    for (std::size_t i = 0; i < s0.size(); ++i) {
        // ground: keep p > 0.5, take the shifted excited curve below
        if (s0.p_switch[i] <= 0.5)
            out.ground.p_switch[i] = curve_value_at(s1, s0.power_db[i] - shift);
        // excited: keep p <= 0.5, take the shifted ground curve above
        if (s1.p_switch[i] > 0.5)
            out.excited.p_switch[i] = curve_value_at(s0, s1.power_db[i] + shift);
    }
    // splice continuity at the 50% point
    const double g_a = curve_value_at(s0, p50_0);
    const double g_b = curve_value_at(s1, p50_0 - shift);
    const double e_a = curve_value_at(s1, p50_1);
    const double e_b = curve_value_at(s0, p50_1 + shift);
    if (std::abs(g_a - g_b) > 0.02 || std::abs(e_a - e_b) > 0.02)
        throw std::runtime_error("reconstruct_ideal_scurves: splice discontinuity > 0.02");
    return out;
}

namespace {

// P(level == 0 at t = 0) for an ensemble prepared by `pulses`, with the
// relaxation rates optionally zeroed.
double prep_ground_fraction(std::span<const ControlPulse> pulses,
                            const CellParams& params, bool with_relaxation,
                            long n_mc, std::uint64_t seed) {
    CellParams p = params;
    p.thermal_excited_population = 0.0;  // thermal accounted separately
    if (!with_relaxation) {
        p.gamma10 = 0.0;
        p.gamma21 = 0.0;
    }
    long ground = 0;
    for (long i = 0; i < n_mc; ++i) {
        ShotRng rng(derive_seed(seed, {91, static_cast<std::uint64_t>(i)}));
        const auto traj = simulate_qubit(pulses, p, 0.0, rng);
        if (traj.final_level() == 0) ++ground;
    }
    return static_cast<double>(ground) / static_cast<double>(n_mc);
}

}  // namespace

ErrorBudget error_budget(const SCurve& p0_curve, const SCurve& p1_curve,
                         const SCurve& p1_shelved_curve, const CellParams& params,
                         std::span<const ControlPulse> prep_noshelve,
                         std::span<const ControlPulse> prep_shelve, long n_mc,
                         std::uint64_t seed) {
    if (p0_curve.size() != p1_curve.size() ||
        p0_curve.size() != p1_shelved_curve.size())
        throw std::invalid_argument("error_budget: curves must share the power grid");

    std::size_t opt = 0, opt_s = 0;
    for (std::size_t i = 0; i < p0_curve.size(); ++i) {
        if (p1_curve.p_switch[i] - p0_curve.p_switch[i] >
            p1_curve.p_switch[opt] - p0_curve.p_switch[opt])
            opt = i;
        if (p1_shelved_curve.p_switch[i] - p0_curve.p_switch[i] >
            p1_shelved_curve.p_switch[opt_s] - p0_curve.p_switch[opt_s])
            opt_s = i;
    }

    ErrorBudget b;
    b.optimal_power_db = p0_curve.power_db[opt];
    b.optimal_power_shelved_db = p0_curve.power_db[opt_s];
    b.ground_error = p0_curve.p_switch[opt];
    b.excited_error_noshelve = 1.0 - p1_curve.p_switch[opt];
    b.excited_error_shelve = 1.0 - p1_shelved_curve.p_switch[opt_s];
    b.thermal_component = params.thermal_excited_population;

    const double off_ns = prep_ground_fraction(prep_noshelve, params, false, n_mc, seed);
    const double on_ns = prep_ground_fraction(prep_noshelve, params, true, n_mc, seed + 1);
    b.prep_relaxation_component = std::max(0.0, on_ns - off_ns);
    const double off_s = prep_ground_fraction(prep_shelve, params, false, n_mc, seed + 2);
    const double on_s = prep_ground_fraction(prep_shelve, params, true, n_mc, seed + 3);
    b.prep_relaxation_component_shelved = std::max(0.0, on_s - off_s);

    b.readout_relaxation_component =
        std::max(0.0, b.excited_error_noshelve - b.thermal_component -
                          b.prep_relaxation_component);
    b.readout_relaxation_component_shelved =
        std::max(0.0, b.excited_error_shelve - b.thermal_component -
                          b.prep_relaxation_component_shelved);

    // plateau: shelved curve averaged from its optimum to +2 dB
    double acc = 0.0;
    long cnt = 0;
    for (std::size_t i = opt_s; i < p1_shelved_curve.size(); ++i) {
        if (p1_shelved_curve.power_db[i] > p1_shelved_curve.power_db[opt_s] + 2.0) break;
        acc += p1_shelved_curve.p_switch[i];
        ++cnt;
    }
    b.shelved_plateau_p = (cnt > 0) ? acc / static_cast<double>(cnt) : 0.0;
    return b;
}

}  // namespace muxjba
