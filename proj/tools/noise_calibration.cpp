// Maintenance tool: recalibrates the default noise strength so the intrinsic
// (thermal-free) cell-1 ground-state S-curve has a 2.4 dB 1%-99% width, then
// prints the value to paste into the config defaults.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "muxjba/config.hpp"
#include "muxjba/experiments.hpp"

using namespace muxjba;

int main(int argc, char** argv) {
    double target = 2.4;
    long shots = 1500;
    int threads = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--target" && i + 1 < argc) target = std::atof(argv[++i]);
        else if (a == "--shots" && i + 1 < argc) shots = std::atol(argv[++i]);
        else if (a == "--threads" && i + 1 < argc) threads = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr,
                         "usage: muxjba-calibrate [--target DB] [--shots N] "
                         "[--threads N]\n");
            return 2;
        }
    }

    ExperimentPlan plan;
    plan.cells = {default_cell(1)};
    plan.cells[0].two_chi_override_hz = 3.4e6;
    plan.n_shots = shots;
    plan.threads = threads;
    plan.master_seed = 7070;
    for (int i = 0; i < 25; ++i)
        plan.power_grid_db.push_back(-10.0 + 12.0 * i / 24.0);

    try {
        const double noise = calibrate_noise(plan, target, 0.03);
        plan.noise_photons = noise;
        const auto run = run_scurve_experiment([&] {
            ExperimentPlan p = plan;
            p.scurve_preps = {PrepKind::Ground};
            p.cells[0].params.thermal_excited_population = 0.0;
            return p;
        }());
        const double width = scurve_width_db(run.preps[0].per_cell[0]);
        std::printf("noise_photons = %.6g  (ground width %.3f dB, target %.3f)\n",
                    noise, width, target);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "calibration failed: %s\n", e.what());
        return 3;
    }
    return 0;
}
