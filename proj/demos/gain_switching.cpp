// Pulse shape versus pump fluence for the paper-default device.
//
//   demo_gain_switching [params.json]

#include <cstdio>
#include <exception>

#include "nanolaser/config.hpp"
#include "nanolaser/pulse_analysis.hpp"
#include "nanolaser/scenario.hpp"

namespace nl = nanolaser;

int main(int argc, char** argv) {
    try {
        nl::ParamsConfig cfg;
        cfg.laser = nl::paper_default();
        cfg.pump.period = nl::default_period;
        if (argc > 1) cfg = nl::load_params(argv[1]);

        const double fth = nl::threshold_fluence(cfg.laser, cfg.pump.pulse_fwhm);
        std::printf("threshold fluence %.3f uJ/cm^2, N_th = %.4f, Purcell factor %.1f\n\n", fth,
                    nl::n_threshold(cfg.laser), cfg.laser.purcell_factor());
        std::printf("%8s %10s %10s %10s %12s %12s\n", "P/Pth", "rise ps", "decay ps", "fwhm ps", "peak P", "energy");
        for (double x : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0}) {
            const auto tr = nl::simulate_pulse_response(cfg.laser, nl::pulse_train(cfg, x), 3);
            const auto m = nl::pulse_metrics(tr, {}, cfg.laser.tau_p);
            std::printf("%8.2f %10.3f %10.3f %10.3f %12.4e %12.4e\n", x, m.rise_time, m.decay_time, m.fwhm,
                        m.peak_value, m.energy);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
