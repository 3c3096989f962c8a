#include "muxjba/waveform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace muxjba {

void ReadoutPulseShape::validate() const {
    if (!(step_duration_s > 0))
        throw std::invalid_argument("ReadoutPulseShape.step_duration_s: must be positive");
    if (!(latch_duration_s > 0))
        throw std::invalid_argument("ReadoutPulseShape.latch_duration_s: must be positive");
    if (!(latch_fraction > 0 && latch_fraction <= 1.0))
        throw std::invalid_argument("ReadoutPulseShape.latch_fraction: must lie in (0, 1]");
}

ComplexEnvelope make_readout_envelope(const ReadoutPulseShape& shape,
                                      double sample_rate_hz,
                                      double peak_amplitude) {
    shape.validate();
    if (!(sample_rate_hz >= 2e9 * (1.0 - 1e-12)))
        throw std::invalid_argument("make_readout_envelope: sample rate below 2 GS/s");
    const double dt = 1.0 / sample_rate_hz;
    const auto n_step = static_cast<std::size_t>(std::llround(shape.step_duration_s / dt));
    const auto n_latch = static_cast<std::size_t>(std::llround(shape.latch_duration_s / dt));
    ComplexEnvelope env;
    env.sample_rate_hz = sample_rate_hz;
    env.t0_s = 0.0;
    env.samples.assign(n_step + n_latch, {0.0, 0.0});
    const double hold = peak_amplitude * std::sqrt(shape.latch_fraction);
    for (std::size_t i = 0; i < n_step; ++i) env.samples[i] = peak_amplitude;
    for (std::size_t i = n_step; i < env.samples.size(); ++i) env.samples[i] = hold;
    return env;
}

ComplexEnvelope ssb_compose(std::span<const SsbChannelView> channels) {
    if (channels.empty())
        throw std::invalid_argument("ssb_compose: no channels");
    const double rate = channels.front().envelope->sample_rate_hz;
    const double dt = 1.0 / rate;
    double t_min = channels.front().envelope->t0_s;
    double t_max = channels.front().envelope->end_s();
    for (const auto& ch : channels) {
        if (ch.envelope == nullptr)
            throw std::invalid_argument("ssb_compose: null envelope");
        if (std::abs(ch.envelope->sample_rate_hz - rate) > 1e-6)
            throw std::invalid_argument("ssb_compose: mismatched sample rates");
        t_min = std::min(t_min, ch.envelope->t0_s);
        t_max = std::max(t_max, ch.envelope->end_s());
    }
    ComplexEnvelope out;
    out.sample_rate_hz = rate;
    out.t0_s = t_min;
    const auto n_out = static_cast<std::size_t>(std::llround((t_max - t_min) * rate));
    out.samples.assign(n_out, {0.0, 0.0});
    for (const auto& ch : channels) {
        const auto& env = *ch.envelope;
        const double shift = (env.t0_s - t_min) * rate;
        const auto offset = static_cast<std::size_t>(std::llround(shift));
        if (std::abs(shift - static_cast<double>(offset)) > 1e-6)
            throw std::invalid_argument("ssb_compose: channels not sample-aligned");
        // rotate at the channel offset; phase referenced to absolute t = 0
        const double w = 2.0 * M_PI * ch.offset_hz;
        std::complex<double> phase = std::polar(1.0, w * env.t0_s);
        const std::complex<double> step = std::polar(1.0, w * dt);
        for (std::size_t i = 0; i < env.samples.size(); ++i) {
            out.samples[offset + i] += env.samples[i] * phase;
            phase *= step;
        }
    }
    return out;
}

ComplexEnvelope ssb_compose(
    const std::vector<std::pair<double, ComplexEnvelope>>& channels) {
    std::vector<SsbChannelView> views;
    views.reserve(channels.size());
    for (const auto& [delta, env] : channels) views.push_back({delta, &env});
    return ssb_compose(std::span<const SsbChannelView>(views));
}

void write_envelope_csv(const ComplexEnvelope& env, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr)
        throw std::runtime_error("write_envelope_csv: cannot open " + path);
    std::fputs("t_s,re,im\n", f);
    const double dt = env.dt_s();
    for (std::size_t i = 0; i < env.samples.size(); ++i) {
        std::fprintf(f, "%.12g,%.12g,%.12g\n", env.t0_s + i * dt,
                     env.samples[i].real(), env.samples[i].imag());
    }
    std::fclose(f);
}

}  // namespace muxjba
