#include "muxjba/jba.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "muxjba/parallel.hpp"
#include "muxjba/rng.hpp"

namespace muxjba {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Steady-state cubic K^2 n^3 + 2 Delta K n^2 + (Delta^2 + kappa^2/4) n - eps^2
double cubic_value(const DriveFrame& f, double eps, double n) {
    const double a = f.kerr_hz * f.kerr_hz;
    const double b = 2.0 * f.detuning_hz * f.kerr_hz;
    const double c = f.detuning_hz * f.detuning_hz + 0.25 * f.kappa_hz * f.kappa_hz;
    return ((a * n + b) * n + c) * n - eps * eps;
}

double cubic_scale(const DriveFrame& f, double eps, double n) {
    const double a = f.kerr_hz * f.kerr_hz;
    const double b = std::abs(2.0 * f.detuning_hz * f.kerr_hz);
    const double c = f.detuning_hz * f.detuning_hz + 0.25 * f.kappa_hz * f.kappa_hz;
    const double an = std::abs(n);
    return ((a * an + b) * an + c) * an + eps * eps + 1e-300;
}

// Drive power |u|^2 sustaining the steady photon number n.
double drive_power_at(const DriveFrame& f, double n) {
    const double det = f.detuning_hz + f.kerr_hz * n;
    return n * (det * det + 0.25 * f.kappa_hz * f.kappa_hz);
}

void polish_root(const DriveFrame& f, double eps, double& n) {
    const double a = f.kerr_hz * f.kerr_hz;
    const double b = 2.0 * f.detuning_hz * f.kerr_hz;
    const double c = f.detuning_hz * f.detuning_hz + 0.25 * f.kappa_hz * f.kappa_hz;
    for (int i = 0; i < 4; ++i) {
        const double val = ((a * n + b) * n + c) * n - eps * eps;
        const double der = (3.0 * a * n + 2.0 * b) * n + c;
        if (der == 0.0) break;
        n -= val / der;
    }
}

}  // namespace

void DriveFrame::validate() const {
    if (!(kappa_hz > 0))
        throw std::invalid_argument("DriveFrame.kappa_hz: must be positive");
}

SteadyStates steady_states(const DriveFrame& frame, double eps) {
    frame.validate();
    if (!(eps >= 0))
        throw std::invalid_argument("steady_states: drive amplitude must be >= 0");

    SteadyStates out;
    const double K = frame.kerr_hz;
    const double c = frame.detuning_hz * frame.detuning_hz +
                     0.25 * frame.kappa_hz * frame.kappa_hz;
    if (eps == 0.0) {
        out.count = 1;
        out.n[0] = 0.0;
        return out;
    }
    if (K == 0.0) {  // linear resonator
        out.count = 1;
        out.n[0] = eps * eps / c;
        return out;
    }

    const double a = K * K;
    const double b = 2.0 * frame.detuning_hz * K;
    const double d = -eps * eps;

    // depressed cubic x^3 + p x + q, n = x - b/(3a)
    const double shift = b / (3.0 * a);
    const double p = c / a - shift * shift * 3.0;
    const double q = 2.0 * shift * shift * shift - shift * c / a + d / a;

    std::array<double, 3> roots{};
    int count = 0;
    const double disc = -4.0 * p * p * p - 27.0 * q * q;
    if (disc > 0.0) {
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double phi = std::acos(arg);
        for (int k = 0; k < 3; ++k)
            roots[count++] = m * std::cos(phi / 3.0 - kTwoPi * k / 3.0) - shift;
    } else {
        const double s = std::sqrt(std::max(0.0, q * q / 4.0 + p * p * p / 27.0));
        const double x = std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s);
        roots[count++] = x - shift;
    }

    for (int k = 0; k < count; ++k) polish_root(frame, eps, roots[k]);
    std::sort(roots.begin(), roots.begin() + count);

    for (int k = 0; k < count; ++k) {
        double n = roots[k];
        if (n < 0.0) {
            if (n > -1e-9) n = 0.0;
            else continue;
        }
        if (std::abs(cubic_value(frame, eps, n)) / cubic_scale(frame, eps, n) > 1e-7)
            continue;  // spurious root from the trig branch
        if (out.count > 0 && std::abs(n - out.n[out.count - 1]) <=
                                 1e-7 * (1.0 + std::abs(n)))
            continue;
        out.n[out.count++] = n;
    }
    if (out.count == 0)
        throw std::runtime_error("steady_states: root finding failed");
    return out;
}

std::optional<BifurcationEdges> bifurcation_edges(const DriveFrame& frame) {
    frame.validate();
    const double K = frame.kerr_hz;
    const double delta = frame.detuning_hz;
    if (K == 0.0) return std::nullopt;
    if (!(delta * (-K) > 0.0)) return std::nullopt;  // Delta and -K same sign
    const double disc = delta * delta - 0.75 * frame.kappa_hz * frame.kappa_hz;
    if (disc < 0.0) return std::nullopt;  // below the critical detuning
    const double root = std::sqrt(disc);
    const double n1 = -(2.0 * delta) / (3.0 * K) - root / (3.0 * std::abs(K));
    const double n2 = -(2.0 * delta) / (3.0 * K) + root / (3.0 * std::abs(K));
    return BifurcationEdges{n1, n2};
}

std::optional<double> bifurcation_drive(const DriveFrame& frame) {
    const auto edges = bifurcation_edges(frame);
    if (!edges) return std::nullopt;
    return std::sqrt(drive_power_at(frame, edges->n_low_edge));
}

std::optional<double> retrap_drive(const DriveFrame& frame) {
    const auto edges = bifurcation_edges(frame);
    if (!edges) return std::nullopt;
    return std::sqrt(drive_power_at(frame, edges->n_high_edge));
}

namespace {

// Latch threshold bookkeeping for one cell at one effective detuning.
struct ThresholdCache {
    bool valid = false;
    bool bistable = false;
    double n_low_edge = 0.0;
    double eps_up = 0.0;
    double eps_retrap = 0.0;
    double detuning = 0.0;

    void rebuild(const DriveFrame& base, double detuning_eff) {
        DriveFrame f = base;
        f.detuning_hz = detuning_eff;
        detuning = detuning_eff;
        const auto edges = bifurcation_edges(f);
        bistable = edges.has_value();
        if (bistable) {
            n_low_edge = edges->n_low_edge;
            eps_up = std::sqrt(drive_power_at(f, edges->n_low_edge));
            eps_retrap = std::sqrt(drive_power_at(f, edges->n_high_edge));
        }
        valid = true;
    }

    double threshold(const DriveFrame& base, double eps_abs) const {
        if (!bistable) return kInf;
        if (eps_abs >= eps_up) return n_low_edge;
        if (eps_abs <= eps_retrap) return kInf;
        DriveFrame f = base;
        f.detuning_hz = detuning;
        const auto ss = steady_states(f, eps_abs);
        return (ss.count >= 3) ? ss.n[1] : kInf;
    }
};

struct CellState {
    std::complex<double> a{0.0, 0.0};
    std::size_t offset_idx = 0;
    double detuning_eff = 0.0;
    double decay = 0.0;  // exp(-pi kappa dt)
    ThresholdCache cache;
    double threshold = kInf;
    double last_u_abs = -1.0;
    double above_time = 0.0;
    double streak_start = 0.0;
    bool latched = false;
    double latch_time = 0.0;
    ShotRng rng{0};
};

}  // namespace

std::vector<FieldTrajectory> integrate_coupled(std::span<const CellDrive> cells,
                                               double coupling_hz,
                                               double noise_photons,
                                               bool record_samples) {
    if (cells.empty())
        throw std::invalid_argument("integrate_coupled: no cells");
    const ComplexEnvelope& ref = *cells.front().envelope;
    const double dt = ref.dt_s();
    if (!(dt <= 1e-9 * (1.0 + 1e-9)))
        throw std::invalid_argument("integrate_coupled: time step must be <= 1 ns");
    if (!(noise_photons >= 0))
        throw std::invalid_argument("integrate_coupled: negative noise strength");
    const std::size_t n_steps = ref.samples.size();

    std::vector<CellState> st(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        cell.frame.validate();
        if (cell.envelope == nullptr)
            throw std::invalid_argument("integrate_coupled: null envelope");
        if (cell.envelope->samples.size() != n_steps ||
            std::abs(cell.envelope->sample_rate_hz - ref.sample_rate_hz) > 1e-6 ||
            std::abs(cell.envelope->t0_s - ref.t0_s) > 1e-15)
            throw std::invalid_argument("integrate_coupled: envelopes not aligned");
        if (!cell.detuning_offsets.empty() &&
            cell.detuning_offsets.front().t_s > ref.t0_s + 1e-12)
            throw std::invalid_argument(
                "integrate_coupled: detuning timeline must cover the envelope start");
        st[c].decay = std::exp(-M_PI * cells[c].frame.kappa_hz * dt);
        st[c].detuning_eff = cell.frame.detuning_hz +
                             (cell.detuning_offsets.empty()
                                  ? 0.0
                                  : cell.detuning_offsets.front().value);
        st[c].a = cell.initial_amplitude;
        st[c].rng = ShotRng(cell.noise_seed);
    }

    std::vector<FieldTrajectory> out(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        out[c].dt_s = dt;
        out[c].t0_s = ref.t0_s;
        if (record_samples) out[c].samples.reserve(n_steps);
    }

    const bool coupled = coupling_hz != 0.0 && cells.size() > 1;

    // rotators exp(-i 2 pi delta_c t) for the coupling beat notes
    std::vector<std::complex<double>> rot(cells.size(), {1.0, 0.0});
    std::vector<std::complex<double>> rot_step(cells.size());
    if (coupled) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            rot[c] = std::polar(1.0, -kTwoPi * cells[c].ssb_offset_hz * ref.t0_s);
            rot_step[c] = std::polar(1.0, -kTwoPi * cells[c].ssb_offset_hz * dt);
        }
    }

    std::vector<std::complex<double>> lab(cells.size());
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double t = ref.t0_s + static_cast<double>(k) * dt;

        std::complex<double> lab_sum{0.0, 0.0};
        if (coupled) {
            for (std::size_t c = 0; c < cells.size(); ++c) {
                lab[c] = st[c].a * rot[c];
                lab_sum += lab[c];
            }
        }

        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            auto& s = st[c];

            // piecewise-constant qubit pull
            const auto& offs = cell.detuning_offsets;
            bool detuning_dirty = false;
            while (s.offset_idx + 1 < offs.size() &&
                   offs[s.offset_idx + 1].t_s <= t + 1e-15) {
                ++s.offset_idx;
                s.detuning_eff = cell.frame.detuning_hz + offs[s.offset_idx].value;
                detuning_dirty = true;
            }

            const std::complex<double> u = cell.envelope->samples[k];
            const double u_abs = std::abs(u);
            if (detuning_dirty || !s.cache.valid) s.cache.rebuild(cell.frame, s.detuning_eff);
            if (detuning_dirty || u_abs != s.last_u_abs) {
                s.threshold = s.cache.threshold(cell.frame, u_abs);
                s.last_u_abs = u_abs;
            }

            const double n = std::norm(s.a);
            if (n > kPhotonOverflow)
                throw std::runtime_error(
                    "integrate_coupled: photon number exceeded 1e4 (unstable step)");

            // exponential step: exact for the frozen linear part
            const std::complex<double> lambda(-M_PI * cell.frame.kappa_hz,
                                              -kTwoPi * (s.detuning_eff + cell.frame.kerr_hz * n));
            const std::complex<double> E =
                s.decay * std::polar(1.0, lambda.imag() * dt);
            const std::complex<double> B = (E - 1.0) / lambda;

            std::complex<double> drive = u;
            if (coupled)
                drive += coupling_hz * (lab_sum - lab[c]) * std::conj(rot[c]);
            s.a = E * s.a + B * (std::complex<double>(0.0, -kTwoPi) * drive);

            if (noise_photons > 0.0) {
                const double amp = std::sqrt(M_PI * cell.frame.kappa_hz *
                                             noise_photons * dt);
                s.a += std::complex<double>(amp * s.rng.gaussian(),
                                            amp * s.rng.gaussian());
            }

            // latch detection: above the unstable branch, sustained
            if (std::norm(s.a) >= s.threshold) {
                if (s.above_time == 0.0) s.streak_start = t;
                s.above_time += dt;
                if (!s.latched && s.above_time >= kLatchSustainS) {
                    s.latched = true;
                    s.latch_time = s.streak_start;
                }
            } else {
                s.above_time = 0.0;
            }

            if (record_samples) out[c].samples.push_back(s.a);
        }

        if (coupled)
            for (std::size_t c = 0; c < cells.size(); ++c) rot[c] *= rot_step[c];
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
        out[c].latch_flag = st[c].latched;
        if (st[c].latched) out[c].latch_time_s = st[c].latch_time;
        out[c].final_amplitude = st[c].a;
    }
    return out;
}

FieldTrajectory integrate_field(const DriveFrame& frame,
                                const ComplexEnvelope& envelope,
                                double noise_photons,
                                std::span<const TimedValue> detuning_offsets,
                                std::uint64_t seed, bool record_samples,
                                std::complex<double> initial_amplitude) {
    CellDrive drive;
    drive.frame = frame;
    drive.envelope = &envelope;
    drive.detuning_offsets = detuning_offsets;
    drive.noise_seed = seed;
    drive.initial_amplitude = initial_amplitude;
    auto result = integrate_coupled({&drive, 1}, 0.0, noise_photons, record_samples);
    return std::move(result.front());
}

SCurve switching_probability_vs_drive(const DriveFrame& frame,
                                      const ReadoutPulseShape& shape,
                                      double noise_photons, int n_shots,
                                      std::uint64_t seed,
                                      std::span<const double> powers_db,
                                      int threads) {
    if (n_shots < 100)
        throw std::invalid_argument("switching_probability_vs_drive: need >= 100 shots");
    const auto eps_bif = bifurcation_drive(frame);
    if (!eps_bif)
        throw std::invalid_argument("switching_probability_vs_drive: frame is not bistable");

    std::vector<ComplexEnvelope> envelopes;
    envelopes.reserve(powers_db.size());
    for (const double db : powers_db)
        envelopes.push_back(make_readout_envelope(shape, 2e9,
                                                  *eps_bif * std::pow(10.0, db / 20.0)));

    const std::size_t total = powers_db.size() * static_cast<std::size_t>(n_shots);
    std::vector<std::uint8_t> latched(total, 0);
    parallel_for(total, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t pw = idx / static_cast<std::size_t>(n_shots);
            const std::size_t shot = idx % static_cast<std::size_t>(n_shots);
            const auto traj = integrate_field(
                frame, envelopes[pw], noise_photons, {},
                derive_seed(seed, {11, pw, shot}), /*record_samples=*/false);
            latched[idx] = traj.latch_flag ? 1 : 0;
        }
    });

    SCurve curve;
    curve.power_db.assign(powers_db.begin(), powers_db.end());
    for (std::size_t pw = 0; pw < powers_db.size(); ++pw) {
        long hits = 0;
        for (long s = 0; s < n_shots; ++s)
            hits += latched[pw * static_cast<std::size_t>(n_shots) +
                            static_cast<std::size_t>(s)];
        const double p = static_cast<double>(hits) / static_cast<double>(n_shots);
        curve.p_switch.push_back(p);
        curve.n_shots.push_back(n_shots);
        curve.std_dev.push_back(binomial_std(p, n_shots));
    }
    return curve;
}

}  // namespace muxjba
