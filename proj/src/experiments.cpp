#include "muxjba/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "muxjba/parallel.hpp"
#include "muxjba/rng.hpp"

namespace muxjba {

namespace {
constexpr std::uint64_t kTagScurve = 1;
constexpr std::uint64_t kTagRabi = 2;
constexpr std::uint64_t kTagCrosstalk = 3;
constexpr std::uint64_t kTagSimultaneous = 4;
}  // namespace

std::string prep_name(PrepKind k) {
    switch (k) {
        case PrepKind::Ground: return "ground";
        case PrepKind::Pi01: return "pi01";
        case PrepKind::Pi01Shelved: return "pi01_shelved";
        case PrepKind::HalfPi01: return "half_pi01";
        case PrepKind::HalfPi01Shelved: return "half_pi01_shelved";
    }
    return "unknown";
}

bool prep_shelved(PrepKind k) {
    return k == PrepKind::Pi01Shelved || k == PrepKind::HalfPi01Shelved;
}

void ExperimentPlan::validate() const {
    if (cells.empty())
        throw std::invalid_argument("ExperimentPlan.cells: at least one cell required");
    for (const auto& c : cells) c.params.validate();
    if (n_shots < 100)
        throw std::invalid_argument("ExperimentPlan.n_shots: must be >= 100");
    if (!(noise_photons >= 0))
        throw std::invalid_argument("ExperimentPlan.noise_photons: must be >= 0");
    if (!(control_sigma_s > 0))
        throw std::invalid_argument("ExperimentPlan.control_sigma_s: must be positive");
    readout.shape.validate();
    readout.window.validate();
    const double total = readout.shape.step_duration_s + readout.shape.latch_duration_s;
    if (readout.window.t_stop_s > total)
        throw std::invalid_argument(
            "ExperimentPlan.readout: demod window extends past the pulse");
}

CellReadoutDerived derive_readout(const CellConfig& cell) {
    cell.params.validate();
    CellReadoutDerived d;
    d.pulls = dispersive_pulls(cell.params);
    d.kappa_hz = linewidth_hz(cell.params);
    const double derived_two_chi = d.pulls.two_chi_hz();
    double scale = 1.0;
    if (cell.two_chi_override_hz) {
        if (derived_two_chi == 0.0)
            throw std::invalid_argument("derive_readout: zero dispersive shift");
        scale = *cell.two_chi_override_hz / derived_two_chi;
    }
    d.two_chi_effective_hz = derived_two_chi * scale;
    for (int k = 0; k < 3; ++k)
        d.delta_d_hz[k] = cell.drive_offset_hz +
                          scale * (d.pulls.pull_hz[k] - d.pulls.pull_hz[0]);
    DriveFrame frame{d.delta_d_hz[0], cell.params.kerr_hz, d.kappa_hz};
    const auto eps = bifurcation_drive(frame);
    if (!eps)
        throw std::invalid_argument(
            "derive_readout: cell " + std::to_string(cell.params.cell_id) +
            " is not bistable at the configured drive offset");
    d.eps_bif = *eps;
    return d;
}

std::vector<ControlPulse> make_prep_pulses(PrepKind kind, double sigma_s) {
    std::vector<ControlPulse> pulses;
    auto pulse = [&](int a, int b, double angle, double end_s) {
        ControlPulse p;
        p.level_a = a;
        p.level_b = b;
        p.angle_rad = angle;
        p.sigma_s = sigma_s;
        p.flat_top_s = 0.0;
        p.start_s = end_s - p.duration_s();
        return p;
    };
    const double d = 6.0 * sigma_s;  // duration of a flat-top-free pulse
    switch (kind) {
        case PrepKind::Ground:
            break;
        case PrepKind::Pi01:
            pulses.push_back(pulse(0, 1, M_PI, 0.0));
            break;
        case PrepKind::Pi01Shelved:
            pulses.push_back(pulse(0, 1, M_PI, -d));
            pulses.push_back(pulse(1, 2, M_PI, 0.0));
            break;
        case PrepKind::HalfPi01:
            pulses.push_back(pulse(0, 1, M_PI / 2.0, 0.0));
            break;
        case PrepKind::HalfPi01Shelved:
            pulses.push_back(pulse(0, 1, M_PI / 2.0, -d));
            pulses.push_back(pulse(1, 2, M_PI, 0.0));
            break;
    }
    return pulses;
}

namespace {

// Immutable per-run context shared by all shots.
struct RunContext {
    const ExperimentPlan* plan = nullptr;
    std::vector<CellReadoutDerived> derived;
    std::vector<double> channel_offsets;
    std::vector<DemodKernel> kernels;
    std::size_t record_len = 0;
    double t_end_s = 0.0;

    const CellConfig& cell(std::size_t c) const { return plan->cells[c]; }
    std::size_t n_cells() const { return plan->cells.size(); }
};

RunContext make_context(const ExperimentPlan& plan) {
    plan.validate();
    RunContext ctx;
    ctx.plan = &plan;
    for (const auto& c : plan.cells) {
        ctx.derived.push_back(derive_readout(c));
        ctx.channel_offsets.push_back(c.readout_offset_hz);
    }
    const ReadoutPulseShape& shape = plan.readout.shape;
    ctx.t_end_s = shape.step_duration_s + shape.latch_duration_s;
    ctx.record_len = static_cast<std::size_t>(
        std::llround(ctx.t_end_s * plan.readout.sample_rate_hz));
    for (std::size_t c = 0; c < plan.cells.size(); ++c)
        ctx.kernels.push_back(make_demod_kernel(0.0, plan.readout.sample_rate_hz,
                                                ctx.record_len,
                                                plan.cells[c].readout_offset_hz,
                                                plan.readout.window));
    return ctx;
}

// Envelopes for every cell at one common dB setting (relative to each cell's
// own ground-state bifurcation drive).
std::vector<ComplexEnvelope> make_envelopes(const RunContext& ctx, double power_db) {
    std::vector<ComplexEnvelope> envs;
    envs.reserve(ctx.n_cells());
    const double gain = std::pow(10.0, power_db / 20.0);
    for (std::size_t c = 0; c < ctx.n_cells(); ++c)
        envs.push_back(make_readout_envelope(ctx.plan->readout.shape,
                                             ctx.plan->readout.sample_rate_hz,
                                             ctx.derived[c].eps_bif * gain));
    return envs;
}

struct ShotResult {
    std::vector<std::uint8_t> latched;
    std::vector<IQPoint> iq;
};

// One complete multiplexed shot: qubit trajectories, coupled field
// integration, composition, digitization and per-channel demodulation.
ShotResult run_one_shot(const RunContext& ctx,
                        const std::vector<std::vector<ControlPulse>>& preps,
                        const std::vector<ComplexEnvelope>& envelopes,
                        std::uint64_t tag, std::uint64_t point,
                        std::uint64_t shot,
                        ComplexEnvelope* composed_out = nullptr) {
    const auto& plan = *ctx.plan;
    const std::size_t n_cells = ctx.n_cells();

    std::vector<std::vector<TimedValue>> offsets(n_cells);
    std::vector<CellDrive> drives(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        ShotRng rng_q(derive_seed(plan.master_seed, {tag, point, shot, c, 0}));
        const auto traj = simulate_qubit(preps[c], plan.cells[c].params,
                                         ctx.t_end_s, rng_q);
        const auto& dd = ctx.derived[c].delta_d_hz;
        offsets[c].push_back({traj.t_begin_s, dd[traj.initial_level] - dd[0]});
        for (const auto& e : traj.events)
            offsets[c].push_back({e.t_s, dd[e.level] - dd[0]});

        drives[c].frame = DriveFrame{dd[0], plan.cells[c].params.kerr_hz,
                                     ctx.derived[c].kappa_hz};
        drives[c].envelope = &envelopes[c];
        drives[c].detuning_offsets = offsets[c];
        drives[c].ssb_offset_hz = plan.cells[c].readout_offset_hz;
        drives[c].noise_seed = derive_seed(plan.master_seed, {tag, point, shot, c, 1});
    }

    auto fields = integrate_coupled(drives, plan.jba_coupling_hz,
                                    plan.noise_photons, /*record_samples=*/true);

    ShotResult out;
    out.latched.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c)
        out.latched[c] = fields[c].latch_flag ? 1 : 0;

    // sum all channels at their offsets into the single output record
    std::vector<ComplexEnvelope> channel_envs(n_cells);
    std::vector<SsbChannelView> views(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        channel_envs[c].sample_rate_hz = plan.readout.sample_rate_hz;
        channel_envs[c].t0_s = fields[c].t0_s;
        channel_envs[c].samples = std::move(fields[c].samples);
        views[c] = {plan.cells[c].readout_offset_hz, &channel_envs[c]};
    }
    ComplexEnvelope composed = ssb_compose(std::span<const SsbChannelView>(views));
    const RealRecord record = digitize(composed, ctx.channel_offsets,
                                       plan.readout.sample_rate_hz, 1e9);
    if (composed_out != nullptr) *composed_out = std::move(composed);

    out.iq.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        out.iq[c] = demodulate_with_kernel(record.samples, ctx.kernels[c]);
        out.iq[c].cell_id = plan.cells[c].params.cell_id;
        out.iq[c].shot_index = static_cast<std::int64_t>(shot);
    }
    return out;
}

// Pooled separatrix per cell from latch-labeled clouds; falls back to the
// latch flags when a cell's clouds are degenerate.
struct DecisionSet {
    std::vector<Separatrix> separatrices;
    std::vector<std::uint8_t> valid;
    std::vector<std::uint8_t> decisions;  // [sample * n_cells + c]
};

DecisionSet decide(const RunContext& ctx, const std::vector<std::uint8_t>& latched,
                   const std::vector<IQPoint>& iq) {
    const std::size_t n_cells = ctx.n_cells();
    const std::size_t n_samples = latched.size() / n_cells;
    DecisionSet ds;
    ds.separatrices.resize(n_cells);
    ds.valid.assign(n_cells, 0);
    ds.decisions.assign(latched.size(), 0);
    for (std::size_t c = 0; c < n_cells; ++c) {
        std::vector<IQPoint> cloud_low, cloud_high;
        for (std::size_t s = 0; s < n_samples; ++s) {
            const std::size_t idx = s * n_cells + c;
            (latched[idx] ? cloud_high : cloud_low).push_back(iq[idx]);
        }
        bool ok = cloud_low.size() >= 50 && cloud_high.size() >= 50;
        if (ok) {
            try {
                ds.separatrices[c] = fit_separatrix(cloud_low, cloud_high);
            } catch (const std::exception&) {
                ok = false;
            }
        }
        ds.valid[c] = ok ? 1 : 0;
        for (std::size_t s = 0; s < n_samples; ++s) {
            const std::size_t idx = s * n_cells + c;
            ds.decisions[idx] =
                ok ? (ds.separatrices[c].side(iq[idx]) ? 1 : 0) : latched[idx];
        }
    }
    return ds;
}

}  // namespace

const PrepCurveSet& ScurveExperimentResult::find(const std::string& prep) const {
    for (const auto& p : preps)
        if (p.prep == prep) return p;
    throw std::out_of_range("ScurveExperimentResult: no prep named " + prep);
}

ScurveExperimentResult run_scurve_experiment(const ExperimentPlan& plan) {
    const RunContext ctx = make_context(plan);
    if (plan.power_grid_db.empty())
        throw std::invalid_argument("run_scurve_experiment: empty power grid");
    const std::size_t n_cells = ctx.n_cells();
    const std::size_t n_prep = plan.scurve_preps.size();
    const std::size_t n_pow = plan.power_grid_db.size();
    const auto n_shots = static_cast<std::size_t>(plan.n_shots);

    std::vector<std::vector<std::vector<ControlPulse>>> preps(n_prep);
    for (std::size_t p = 0; p < n_prep; ++p)
        preps[p].assign(n_cells,
                        make_prep_pulses(plan.scurve_preps[p], plan.control_sigma_s));

    std::vector<std::vector<ComplexEnvelope>> envelopes;
    envelopes.reserve(n_pow);
    for (const double db : plan.power_grid_db)
        envelopes.push_back(make_envelopes(ctx, db));

    const std::size_t total = n_prep * n_pow * n_shots;
    std::vector<std::uint8_t> latched(total * n_cells, 0);
    std::vector<IQPoint> iq(total * n_cells);

    parallel_for(total, plan.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t p = idx / (n_pow * n_shots);
            const std::size_t pw = (idx / n_shots) % n_pow;
            const std::size_t shot = idx % n_shots;
            const auto r = run_one_shot(ctx, preps[p], envelopes[pw], kTagScurve,
                                        p * n_pow + pw, shot);
            for (std::size_t c = 0; c < n_cells; ++c) {
                latched[idx * n_cells + c] = r.latched[c];
                iq[idx * n_cells + c] = r.iq[c];
            }
        }
    });

    const DecisionSet ds = decide(ctx, latched, iq);

    ScurveExperimentResult result;
    result.separatrix_per_cell = ds.separatrices;
    for (std::size_t p = 0; p < n_prep; ++p) {
        PrepCurveSet set;
        set.prep = prep_name(plan.scurve_preps[p]);
        set.per_cell.resize(n_cells);
        set.per_cell_latch.resize(n_cells);
        set.agreement.assign(n_cells, std::vector<double>(n_pow, 0.0));
        for (std::size_t c = 0; c < n_cells; ++c) {
            auto& curve = set.per_cell[c];
            auto& truth = set.per_cell_latch[c];
            curve.power_db = plan.power_grid_db;
            truth.power_db = plan.power_grid_db;
            for (std::size_t pw = 0; pw < n_pow; ++pw) {
                long dec = 0, lat = 0, agree = 0;
                for (std::size_t s = 0; s < n_shots; ++s) {
                    const std::size_t idx =
                        ((p * n_pow + pw) * n_shots + s) * n_cells + c;
                    dec += ds.decisions[idx];
                    lat += latched[idx];
                    agree += (ds.decisions[idx] == latched[idx]) ? 1 : 0;
                }
                const double pd = static_cast<double>(dec) / static_cast<double>(n_shots);
                const double pl = static_cast<double>(lat) / static_cast<double>(n_shots);
                curve.p_switch.push_back(pd);
                curve.n_shots.push_back(static_cast<long>(n_shots));
                curve.std_dev.push_back(binomial_std(pd, static_cast<long>(n_shots)));
                truth.p_switch.push_back(pl);
                truth.n_shots.push_back(static_cast<long>(n_shots));
                truth.std_dev.push_back(binomial_std(pl, static_cast<long>(n_shots)));
                set.agreement[c][pw] =
                    static_cast<double>(agree) / static_cast<double>(n_shots);
            }
        }
        result.preps.push_back(std::move(set));
    }
    return result;
}

namespace {

RabiFit fit_rabi_curve(const std::vector<double>& t, const std::vector<double>& p) {
    // least squares for p ~ c + a cos(2 pi t / T), scanned over T
    auto sse_at = [&](double period, double* c_out, double* a_out) {
        double s1 = 0, sf = 0, sff = 0, sp = 0, spf = 0;
        const auto n = static_cast<double>(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double f = std::cos(2.0 * M_PI * t[i] / period);
            s1 += 1.0;
            sf += f;
            sff += f * f;
            sp += p[i];
            spf += p[i] * f;
        }
        const double det = s1 * sff - sf * sf;
        if (std::abs(det) < 1e-12 * n * n) return 1e300;
        const double c = (sff * sp - sf * spf) / det;
        const double a = (s1 * spf - sf * sp) / det;
        double sse = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double r = p[i] - c - a * std::cos(2.0 * M_PI * t[i] / period);
            sse += r * r;
        }
        if (c_out) *c_out = c;
        if (a_out) *a_out = a;
        return sse;
    };

    const double span = t.back() - t.front();
    double best_T = span, best_sse = 1e301;
    for (int i = 0; i < 600; ++i) {
        const double T = span * (0.05 + 2.95 * i / 599.0);
        const double sse = sse_at(T, nullptr, nullptr);
        if (sse < best_sse) {
            best_sse = sse;
            best_T = T;
        }
    }
    // golden-section refinement around the grid minimum
    double lo = best_T * 0.9, hi = best_T * 1.1;
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = sse_at(x1, nullptr, nullptr), f2 = sse_at(x2, nullptr, nullptr);
    for (int i = 0; i < 60; ++i) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = sse_at(x1, nullptr, nullptr);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = sse_at(x2, nullptr, nullptr);
        }
    }
    RabiFit fit;
    fit.period_s = 0.5 * (lo + hi);
    double c = 0, a = 0;
    sse_at(fit.period_s, &c, &a);
    fit.offset = c;
    fit.contrast = 2.0 * std::abs(a);
    return fit;
}

}  // namespace

RabiResult run_rabi_experiment(const ExperimentPlan& plan) {
    const RunContext ctx = make_context(plan);
    if (plan.rabi_equiv_s.empty())
        throw std::invalid_argument("run_rabi_experiment: empty duration grid");
    const std::size_t n_cells = ctx.n_cells();
    const std::size_t n_pts = plan.rabi_equiv_s.size();
    const auto n_shots = static_cast<std::size_t>(plan.n_shots);

    ControlPulse ref;  // edge-only reference pulse
    ref.sigma_s = plan.control_sigma_s;
    const double t_pi_eq = equivalent_duration_s(ref);

    // control pulses per point per cell, staggered in time, ending at t = 0
    std::vector<std::vector<std::vector<ControlPulse>>> preps(n_pts);
    for (std::size_t i = 0; i < n_pts; ++i) {
        const double t_eq = plan.rabi_equiv_s[i];
        preps[i].resize(n_cells);
        double block_end = 0.0;
        for (std::size_t rc = 0; rc < n_cells; ++rc) {
            const std::size_t c = n_cells - 1 - rc;  // last cell closest to readout
            const bool shelve =
                c < plan.rabi_shelve.size() && plan.rabi_shelve[c];
            if (shelve) {
                ControlPulse p12;
                p12.level_a = 1;
                p12.level_b = 2;
                p12.angle_rad = M_PI;
                p12.sigma_s = plan.control_sigma_s;
                p12.start_s = block_end - p12.duration_s();
                preps[i][c].push_back(p12);
                block_end = p12.start_s;
            }
            ControlPulse drive;
            drive.level_a = 0;
            drive.level_b = 1;
            drive.sigma_s = plan.control_sigma_s;
            drive.flat_top_s = std::max(0.0, t_eq - t_pi_eq);
            drive.angle_rad = M_PI * (t_eq / t_pi_eq) * plan.rabi_amplitude_scale;
            if (drive.angle_rad > 2.0 * M_PI)
                throw std::invalid_argument(
                    "run_rabi_experiment: rotation exceeds 2 pi; shorten the grid "
                    "or reduce the amplitude scale");
            drive.start_s = block_end - drive.duration_s();
            preps[i][c].push_back(drive);
            block_end = drive.start_s - 2e-9;  // gap between cell blocks
        }
    }

    const auto envelopes = make_envelopes(ctx, plan.rabi_power_db);

    const std::size_t total = n_pts * n_shots;
    std::vector<std::uint8_t> latched(total * n_cells, 0);
    std::vector<IQPoint> iq(total * n_cells);
    parallel_for(total, plan.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t pt = idx / n_shots;
            const std::size_t shot = idx % n_shots;
            const auto r =
                run_one_shot(ctx, preps[pt], envelopes, kTagRabi, pt, shot);
            for (std::size_t c = 0; c < n_cells; ++c) {
                latched[idx * n_cells + c] = r.latched[c];
                iq[idx * n_cells + c] = r.iq[c];
            }
        }
    });

    const DecisionSet ds = decide(ctx, latched, iq);

    RabiResult result;
    result.t_equiv_s = plan.rabi_equiv_s;
    result.p.assign(n_cells, std::vector<double>(n_pts, 0.0));
    result.std_dev.assign(n_cells, std::vector<double>(n_pts, 0.0));
    for (std::size_t c = 0; c < n_cells; ++c) {
        for (std::size_t pt = 0; pt < n_pts; ++pt) {
            long dec = 0;
            for (std::size_t s = 0; s < n_shots; ++s)
                dec += ds.decisions[(pt * n_shots + s) * n_cells + c];
            const double p = static_cast<double>(dec) / static_cast<double>(n_shots);
            result.p[c][pt] = p;
            result.std_dev[c][pt] = binomial_std(p, static_cast<long>(n_shots));
        }
        result.fits.push_back(fit_rabi_curve(result.t_equiv_s, result.p[c]));
    }
    return result;
}

long CrosstalkResult::shots_needed(double sigma_target) const {
    const double p = 0.5;  // worst case
    return static_cast<long>(
        std::ceil(2.0 * p * (1.0 - p) / (sigma_target * sigma_target)));
}

CrosstalkResult run_crosstalk_experiment(const ExperimentPlan& plan) {
    ExperimentPlan sub = plan;
    sub.cells.clear();
    int target_index = -1;
    if (plan.crosstalk_control_cell == plan.crosstalk_target_cell)
        throw std::invalid_argument(
            "run_crosstalk_experiment: control and target cells must differ");
    for (const auto& c : plan.cells) {
        if (c.params.cell_id == plan.crosstalk_control_cell) sub.cells.push_back(c);
    }
    for (const auto& c : plan.cells) {
        if (c.params.cell_id == plan.crosstalk_target_cell) {
            target_index = static_cast<int>(sub.cells.size());
            sub.cells.push_back(c);
        }
    }
    if (sub.cells.size() != 2 || target_index < 0)
        throw std::invalid_argument(
            "run_crosstalk_experiment: control and target cells must be distinct "
            "and present in the plan");

    const RunContext ctx = make_context(sub);
    const auto envelopes = make_envelopes(ctx, plan.crosstalk_power_db);
    const auto n_shots = static_cast<std::size_t>(plan.n_shots);

    // arm 0: control left in |0>; arm 1: control prepared in |1>
    std::array<long, 2> hits{0, 0};
    std::vector<std::uint8_t> latched(2 * n_shots * 2, 0);
    std::vector<IQPoint> iq(2 * n_shots * 2);
    for (std::uint64_t arm = 0; arm < 2; ++arm) {
        std::vector<std::vector<ControlPulse>> preps(2);
        preps[static_cast<std::size_t>(1 - target_index)] = make_prep_pulses(
            arm == 0 ? PrepKind::Ground : PrepKind::Pi01, plan.control_sigma_s);
        preps[static_cast<std::size_t>(target_index)] =
            make_prep_pulses(PrepKind::HalfPi01, plan.control_sigma_s);

        parallel_for(n_shots, plan.threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t shot = begin; shot < end; ++shot) {
                const auto r = run_one_shot(ctx, preps, envelopes, kTagCrosstalk,
                                            arm, shot);
                const std::size_t base = (arm * n_shots + shot) * 2;
                for (std::size_t c = 0; c < 2; ++c) {
                    latched[base + c] = r.latched[c];
                    iq[base + c] = r.iq[c];
                }
            }
        });
    }

    const DecisionSet ds = decide(ctx, latched, iq);
    for (std::uint64_t arm = 0; arm < 2; ++arm) {
        long h = 0;
        for (std::size_t shot = 0; shot < n_shots; ++shot)
            h += ds.decisions[(arm * n_shots + shot) * 2 +
                              static_cast<std::size_t>(target_index)];
        hits[arm] = h;
    }

    CrosstalkResult res;
    res.n_shots_per_arm = static_cast<long>(n_shots);
    res.p_target_control_ground =
        static_cast<double>(hits[0]) / static_cast<double>(n_shots);
    res.p_target_control_excited =
        static_cast<double>(hits[1]) / static_cast<double>(n_shots);
    res.delta_p = res.p_target_control_excited - res.p_target_control_ground;
    const double s0 = binomial_std(res.p_target_control_ground, res.n_shots_per_arm);
    const double s1 = binomial_std(res.p_target_control_excited, res.n_shots_per_arm);
    res.sigma = std::hypot(s0, s1);
    return res;
}

SimultaneousResult run_simultaneous_readout(const ExperimentPlan& plan,
                                            PrepKind prep) {
    const RunContext ctx = make_context(plan);
    const std::size_t n_cells = ctx.n_cells();
    const auto n_shots = static_cast<std::size_t>(plan.n_shots);
    const auto envelopes = make_envelopes(ctx, plan.simultaneous_power_db);

    std::vector<std::vector<ControlPulse>> preps(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        const bool shelve =
            c < plan.simultaneous_shelve.size() && plan.simultaneous_shelve[c];
        PrepKind kind = prep;
        if (shelve && prep == PrepKind::HalfPi01) kind = PrepKind::HalfPi01Shelved;
        if (shelve && prep == PrepKind::Pi01) kind = PrepKind::Pi01Shelved;
        preps[c] = make_prep_pulses(kind, plan.control_sigma_s);
    }

    std::vector<std::uint8_t> latched(n_shots * n_cells, 0);
    std::vector<IQPoint> iq(n_shots * n_cells);
    ComplexEnvelope shot0_wave;
    parallel_for(n_shots, plan.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t shot = begin; shot < end; ++shot) {
            const auto r = run_one_shot(ctx, preps, envelopes, kTagSimultaneous, 0,
                                        shot, shot == 0 ? &shot0_wave : nullptr);
            for (std::size_t c = 0; c < n_cells; ++c) {
                latched[shot * n_cells + c] = r.latched[c];
                iq[shot * n_cells + c] = r.iq[c];
            }
        }
    });

    const DecisionSet ds = decide(ctx, latched, iq);

    SimultaneousResult result;
    result.composed_shot0 = std::move(shot0_wave);
    result.cells.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        auto& cell = result.cells[c];
        cell.cell_id = plan.cells[c].params.cell_id;
        cell.separatrix = ds.separatrices[c];
        cell.separatrix_valid = ds.valid[c] != 0;
        long hits = 0;
        cell.points.reserve(n_shots);
        cell.latched.reserve(n_shots);
        for (std::size_t s = 0; s < n_shots; ++s) {
            cell.points.push_back(iq[s * n_cells + c]);
            cell.latched.push_back(latched[s * n_cells + c]);
            hits += ds.decisions[s * n_cells + c];
        }
        cell.p_switch = static_cast<double>(hits) / static_cast<double>(n_shots);

        // histogram of the projection on the separatrix normal
        if (cell.separatrix_valid) {
            std::vector<double> proj;
            proj.reserve(n_shots);
            for (const auto& p : cell.points)
                proj.push_back(cell.separatrix.project(p));
            const auto [mn, mx] = std::minmax_element(proj.begin(), proj.end());
            double mean = 0, var = 0;
            for (double v : proj) mean += v;
            mean /= static_cast<double>(proj.size());
            for (double v : proj) var += (v - mean) * (v - mean);
            var /= static_cast<double>(proj.size());
            const double bin = std::max(0.3 * std::sqrt(var), (*mx - *mn) * 1e-4);
            const int n_bins =
                std::max(8, static_cast<int>(std::ceil((*mx - *mn) / bin)));
            cell.hist_counts.assign(static_cast<std::size_t>(n_bins), 0);
            cell.hist_centers.resize(static_cast<std::size_t>(n_bins));
            for (int b = 0; b < n_bins; ++b)
                cell.hist_centers[static_cast<std::size_t>(b)] =
                    *mn + (b + 0.5) * (*mx - *mn) / n_bins;
            for (double v : proj) {
                const int b = std::min(
                    n_bins - 1,
                    static_cast<int>((v - *mn) / (*mx - *mn + 1e-300) * n_bins));
                ++cell.hist_counts[static_cast<std::size_t>(b)];
            }
        }
    }
    return result;
}

double calibrate_noise(ExperimentPlan plan, double target_width_db, double tol_db) {
    plan.scurve_preps = {PrepKind::Ground};
    plan.cells.resize(1);
    plan.cells[0].params.thermal_excited_population = 0.0;  // intrinsic width

    auto width_at = [&](double noise) {
        plan.noise_photons = noise;
        const auto run = run_scurve_experiment(plan);
        return scurve_width_db(run.preps[0].per_cell[0]);
    };

    double lo = 0.02, hi = 1.0;
    double w_lo = width_at(lo), w_hi = width_at(hi);
    int guard = 0;
    while (w_lo > target_width_db && lo > 1e-4 && guard++ < 8) {
        lo *= 0.25;
        w_lo = width_at(lo);
    }
    while (w_hi < target_width_db && hi < 64.0 && guard++ < 16) {
        hi *= 2.0;
        w_hi = width_at(hi);
    }
    if (w_lo > target_width_db || w_hi < target_width_db)
        throw std::runtime_error("calibrate_noise: target width not bracketed");

    double mid = std::sqrt(lo * hi);
    for (int i = 0; i < 14; ++i) {
        mid = std::sqrt(lo * hi);
        const double w = width_at(mid);
        if (std::abs(w - target_width_db) <= tol_db) break;
        if (w < target_width_db)
            lo = mid;
        else
            hi = mid;
    }
    return mid;
}

BudgetRun run_error_budget(const ExperimentPlan& plan, int cell_index) {
    ExperimentPlan p = plan;
    p.scurve_preps = {PrepKind::Ground, PrepKind::Pi01, PrepKind::Pi01Shelved};
    BudgetRun out;
    out.curves = run_scurve_experiment(p);
    const auto c = static_cast<std::size_t>(cell_index);
    const auto& s0 = out.curves.find("ground").per_cell[c];
    const auto& s1 = out.curves.find("pi01").per_cell[c];
    const auto& s1s = out.curves.find("pi01_shelved").per_cell[c];
    const auto prep_ns = make_prep_pulses(PrepKind::Pi01, p.control_sigma_s);
    const auto prep_s = make_prep_pulses(PrepKind::Pi01Shelved, p.control_sigma_s);
    out.budget = error_budget(s0, s1, s1s, p.cells[c].params, prep_ns, prep_s,
                              200000, derive_seed(p.master_seed, {77}));
    out.ideal = reconstruct_ideal_scurves(s0, s1,
                                          p.cells[c].params.thermal_excited_population);
    return out;
}

}  // namespace muxjba
