#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace muxjba {

/// Uniformly sampled complex baseband waveform.
struct ComplexEnvelope {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 2e9;
    double t0_s = 0.0;

    double dt_s() const { return 1.0 / sample_rate_hz; }
    double duration_s() const { return static_cast<double>(samples.size()) * dt_s(); }
    double end_s() const { return t0_s + duration_s(); }
};

/// Two-step readout pulse: a short full-power measurement step followed by a
/// long hold at latch_fraction of the peak power.
struct ReadoutPulseShape {
    double step_duration_s = 25e-9;
    double latch_duration_s = 2e-6;
    double latch_fraction = 0.85;   ///< power ratio hold/peak, in (0, 1]
    double peak_power_db = 0.0;     ///< relative to a caller-chosen reference

    void validate() const;
};

/// Rectangular two-step envelope; amplitude peak_amplitude for the first step,
/// peak_amplitude * sqrt(latch_fraction) for the hold. Starts at t = 0.
ComplexEnvelope make_readout_envelope(const ReadoutPulseShape& shape,
                                      double sample_rate_hz,
                                      double peak_amplitude = 1.0);

struct SsbChannelView {
    double offset_hz = 0.0;
    const ComplexEnvelope* envelope = nullptr;
};

/// Single-sideband composition: sum of envelope_i(t) * exp(i 2 pi delta_i t).
/// All channels must share the sample rate and be sample-aligned; the output
/// spans the union of the channel supports (zero padded). Phases are taken
/// at absolute time so composition and demodulation stay consistent.
ComplexEnvelope ssb_compose(std::span<const SsbChannelView> channels);

/// Value-semantics convenience overload.
ComplexEnvelope ssb_compose(
    const std::vector<std::pair<double, ComplexEnvelope>>& channels);

/// CSV export (t_s, re, im), one row per sample.
void write_envelope_csv(const ComplexEnvelope& env, const std::string& path);

}  // namespace muxjba
