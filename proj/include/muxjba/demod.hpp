#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "muxjba/waveform.hpp"

namespace muxjba {

/// Demodulated (I, Q) pair for one readout channel in one shot.
struct IQPoint {
    int cell_id = 0;
    double i_value = 0.0;
    double q_value = 0.0;
    std::int64_t shot_index = 0;
};

struct DemodWindow {
    double t_start_s = 325e-9;
    double t_stop_s = 1325e-9;

    void validate() const;
};

/// Real sample record produced by the digitizer model.
struct RealRecord {
    std::vector<double> samples;
    double sample_rate_hz = 2e9;
    double t0_s = 0.0;

    double dt_s() const { return 1.0 / sample_rate_hz; }
};

/// Ideal digitizer: samples the real part of the composed offset-frequency
/// signal at `rate`. channel_offsets are only inspected against the analog
/// bandwidth; any |delta| > bandwidth throws (aliasing).
RealRecord digitize(const ComplexEnvelope& composed,
                    std::span<const double> channel_offsets_hz,
                    double rate_hz = 2e9, double bandwidth_hz = 1e9);

/// I = (2/N) sum s(t) cos(2 pi delta t), Q = -(2/N) sum s(t) sin(2 pi delta t)
/// over the window, t absolute. A unit tone at delta with zero phase gives
/// (1, 0). Throws on an empty window or one outside the record span.
IQPoint demodulate(const RealRecord& record, double delta_hz,
                   const DemodWindow& window);

/// Precomputed demodulation kernel for repeated shots on a fixed time grid.
struct DemodKernel {
    std::size_t first_index = 0;
    std::vector<double> cos_table;
    std::vector<double> sin_table;
};

DemodKernel make_demod_kernel(double record_t0_s, double record_rate_hz,
                              std::size_t record_len, double delta_hz,
                              const DemodWindow& window);

IQPoint demodulate_with_kernel(std::span<const double> samples,
                               const DemodKernel& kernel);

/// CSV export (shot, cell, I, Q).
void write_iq_csv(std::span<const IQPoint> points, const std::string& path);

}  // namespace muxjba
