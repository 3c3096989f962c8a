#include "muxjba/demod.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace muxjba {

namespace {
constexpr double kTwoPi = 6.2831853071795864769;
}

void DemodWindow::validate() const {
    if (!(t_stop_s > t_start_s))
        throw std::invalid_argument("DemodWindow: t_stop must exceed t_start");
}

RealRecord digitize(const ComplexEnvelope& composed,
                    std::span<const double> channel_offsets_hz, double rate_hz,
                    double bandwidth_hz) {
    for (const double delta : channel_offsets_hz) {
        if (std::abs(delta) > bandwidth_hz)
            throw std::invalid_argument(
                "digitize: channel offset outside the analog bandwidth (aliasing)");
    }
    RealRecord rec;
    rec.sample_rate_hz = rate_hz;
    rec.t0_s = composed.t0_s;
    if (std::abs(composed.sample_rate_hz - rate_hz) < 1e-6) {
        rec.samples.reserve(composed.samples.size());
        for (const auto& s : composed.samples) rec.samples.push_back(s.real());
        return rec;
    }
    // linear resample onto the digitizer grid
    const double src_dt = composed.dt_s();
    const auto n_out = static_cast<std::size_t>(
        std::floor(composed.duration_s() * rate_hz));
    rec.samples.reserve(n_out);
    for (std::size_t i = 0; i < n_out; ++i) {
        const double t_rel = static_cast<double>(i) / rate_hz;
        const double x = t_rel / src_dt;
        const auto i0 = static_cast<std::size_t>(x);
        const double frac = x - static_cast<double>(i0);
        const std::size_t i1 = std::min(i0 + 1, composed.samples.size() - 1);
        rec.samples.push_back((1.0 - frac) * composed.samples[i0].real() +
                              frac * composed.samples[i1].real());
    }
    return rec;
}

DemodKernel make_demod_kernel(double record_t0_s, double record_rate_hz,
                              std::size_t record_len, double delta_hz,
                              const DemodWindow& window) {
    window.validate();
    const double dt = 1.0 / record_rate_hz;
    const auto i0 = static_cast<long long>(
        std::llround((window.t_start_s - record_t0_s) * record_rate_hz));
    const auto count = static_cast<long long>(
        std::llround((window.t_stop_s - window.t_start_s) * record_rate_hz));
    if (count <= 0)
        throw std::invalid_argument("demodulate: empty window");
    if (i0 < 0 || static_cast<std::size_t>(i0 + count) > record_len)
        throw std::invalid_argument("demodulate: window outside the record span");
    DemodKernel k;
    k.first_index = static_cast<std::size_t>(i0);
    k.cos_table.reserve(static_cast<std::size_t>(count));
    k.sin_table.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
        const double t = record_t0_s + static_cast<double>(i0 + i) * dt;
        k.cos_table.push_back(std::cos(kTwoPi * delta_hz * t));
        k.sin_table.push_back(std::sin(kTwoPi * delta_hz * t));
    }
    return k;
}

IQPoint demodulate_with_kernel(std::span<const double> samples,
                               const DemodKernel& kernel) {
    double i_acc = 0.0;
    double q_acc = 0.0;
    const std::size_t n = kernel.cos_table.size();
    const double* s = samples.data() + kernel.first_index;
    for (std::size_t i = 0; i < n; ++i) {
        i_acc += s[i] * kernel.cos_table[i];
        q_acc += s[i] * kernel.sin_table[i];
    }
    const double norm = 2.0 / static_cast<double>(n);
    return IQPoint{0, norm * i_acc, -norm * q_acc, 0};
}

IQPoint demodulate(const RealRecord& record, double delta_hz,
                   const DemodWindow& window) {
    const auto kernel = make_demod_kernel(record.t0_s, record.sample_rate_hz,
                                          record.samples.size(), delta_hz, window);
    return demodulate_with_kernel(record.samples, kernel);
}

void write_iq_csv(std::span<const IQPoint> points, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr)
        throw std::runtime_error("write_iq_csv: cannot open " + path);
    std::fputs("shot,cell,i,q\n", f);
    for (const auto& p : points)
        std::fprintf(f, "%lld,%d,%.12g,%.12g\n",
                     static_cast<long long>(p.shot_index), p.cell_id, p.i_value,
                     p.q_value);
    std::fclose(f);
}

}  // namespace muxjba
