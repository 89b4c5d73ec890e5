// nanolaser: command-line front end for the simulation and fitting library.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nanolaser/config.hpp"
#include "nanolaser/errors.hpp"
#include "nanolaser/estimation.hpp"
#include "nanolaser/io.hpp"
#include "nanolaser/parallel.hpp"
#include "nanolaser/scenario.hpp"

namespace nl = nanolaser;

namespace {

enum Exit { ok = 0, config_error = 1, numerical_error = 2, io_error = 3 };

struct Common {
    std::string params;
    std::string out = "out";
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--params", c.params, "parameter file (default: built-in paper-default)");
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--set", c.overrides, "override a parameter, key=value (repeatable)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
}

nl::ParamsConfig load(const Common& c, std::string& source) {
    nl::ParamsConfig cfg;
    if (c.params.empty()) {
        cfg.name = "paper-default";
        cfg.laser = nl::paper_default();
        cfg.pump.period = nl::default_period;
        source = "builtin:paper-default";
    } else {
        cfg = nl::load_params(c.params);
        source = c.params;
    }
    nl::apply_overrides(cfg, c.overrides);
    return cfg;
}

void finish(const Common& c, const std::string& scenario, const nl::ParamsConfig& cfg, const std::string& source,
            const nl::Artifacts& a) {
    const auto manifest = nl::write_run(c.out, scenario, cfg, source, c.overrides, a);
    std::cout << scenario << ": wrote " << a.files.size() + 1 << " files to " << c.out << " (config "
              << manifest["config_hash"].get<std::string>() << ")\n";
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    for (auto part : nl::detail::split(s, ',')) {
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        if (part.empty()) continue;
        try {
            v.push_back(nl::parse_double(part));
        } catch (const nl::IoError&) {
            throw nl::ConfigError({"fluences: '" + std::string(part) + "' is not a number"});
        }
    }
    return v;
}

std::vector<std::string> parse_names(const std::string& s) {
    std::vector<std::string> v;
    for (auto part : nl::detail::split(s, ','))
        if (!part.empty()) v.emplace_back(part);
    return v;
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return ok;
    } catch (const nl::ConfigError& e) {
        for (const auto& issue : e.issues()) std::cerr << "error: " << issue << "\n";
        return config_error;
    } catch (const nl::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const nl::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io_error;
    } catch (const nl::NumericalError& e) {
        nlohmann::json j = {{"error", "numerical"}, {"message", e.what()}};
        if (const auto* fe = dynamic_cast<const nl::FitError*>(&e)) {
            static const char* kinds[] = {"did_not_converge", "singular_jacobian", "insufficient_data"};
            j["kind"] = kinds[static_cast<int>(fe->kind())];
        }
        std::cerr << j.dump() << "\n";
        return numerical_error;
    } catch (const nl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        nlohmann::json j = {{"error", "numerical"}, {"message", e.what()}};
        std::cerr << j.dump() << "\n";
        return numerical_error;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gain-switched nanolaser rate-equation simulator and parameter estimator"};
    app.set_version_flag("--version", std::string(nl::tool_version));
    app.require_subcommand(1);

    std::function<int()> action;

    // simulate
    Common sim_c;
    nl::SimulateOptions sim_o;
    auto* sim = app.add_subcommand("simulate", "single pump pulse; trajectory.csv and metrics.json");
    add_common(sim, sim_c);
    sim->add_option("--pth-multiple", sim_o.pth_multiple, "pump fluence in units of the threshold fluence")->capture_default_str();
    sim->add_option("--periods", sim_o.n_periods, "repetition periods simulated (last one reported)")->capture_default_str();
    sim->add_option("--t-max", sim_o.t_max, "trajectory output cut, ps")->capture_default_str();
    sim->add_option("--lead", sim_o.lead, "pump arrival within the period, ps")->capture_default_str();
    sim->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(sim_c, src);
                finish(sim_c, "simulate", cfg, src, nl::run_simulate(cfg, sim_o));
            });
        };
    });

    // two-pulse and fig3
    Common tp_c;
    nl::TwoPulseOptions tp_o;
    auto* tp = app.add_subcommand("two-pulse", "two pump pulses; per-pulse metrics and extinction ratio");
    add_common(tp, tp_c);
    tp->add_option("--pth-multiple", tp_o.pth_multiple, "fluence of each pulse over threshold fluence")->capture_default_str();
    tp->add_option("--separation", tp_o.separation, "pulse separation, ps")->capture_default_str();
    tp->add_option("--lead", tp_o.lead, "first pump arrival within the period, ps")->capture_default_str();
    tp->add_option("--periods", tp_o.n_periods, "repetition periods simulated")->capture_default_str();
    tp->add_option("--t-max", tp_o.t_max, "trajectory output cut, ps")->capture_default_str();
    tp->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(tp_c, src);
                finish(tp_c, "two-pulse", cfg, src, nl::run_two_pulse(cfg, tp_o));
            });
        };
    });
    Common f3_c;
    auto* f3 = app.add_subcommand("fig3", "preset: two pulses 100 ps apart at 5x threshold");
    add_common(f3, f3_c);
    f3->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(f3_c, src);
                finish(f3_c, "fig3", cfg, src, nl::run_two_pulse(cfg, nl::TwoPulseOptions{}));
            });
        };
    });

    // ll-curve and fig1
    Common ll_c;
    std::string ll_fluences, ll_mode = "steady";
    double ll_fmin = 0.45, ll_fmax = 450.0;
    int ll_points = 30;
    auto* ll = app.add_subcommand("ll-curve", "light-in/light-out curve; ll_curve.csv");
    add_common(ll, ll_c);
    auto* ll_list = ll->add_option("--fluences", ll_fluences, "comma-separated fluences, uJ/cm^2");
    ll->add_option("--fmin", ll_fmin, "lowest fluence of the log grid")->capture_default_str()->excludes(ll_list);
    ll->add_option("--fmax", ll_fmax, "highest fluence of the log grid")->capture_default_str()->excludes(ll_list);
    ll->add_option("--points", ll_points, "points of the log grid")->capture_default_str()->excludes(ll_list);
    ll->add_option("--mode", ll_mode, "steady | pulsed")->capture_default_str();
    ll->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(ll_c, src);
                nl::LLCurveOptions o;
                o.mode = nl::ll_mode_from_string(ll_mode);
                o.threads = nl::thread_count_from_env();
                o.fluences = ll_list->count() ? parse_list(ll_fluences) : nl::log_spaced(ll_fmin, ll_fmax, ll_points);
                finish(ll_c, "ll-curve", cfg, src, nl::run_ll_curve(cfg, o));
            });
        };
    });
    Common f1_c;
    auto* f1 = app.add_subcommand("fig1", "preset: steady-state L-L curve, 30 points over 3 decades");
    add_common(f1, f1_c);
    f1->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(f1_c, src);
                nl::LLCurveOptions o;
                o.threads = nl::thread_count_from_env();
                o.fluences = nl::log_spaced(0.45, 450.0, 30);
                finish(f1_c, "fig1", cfg, src, nl::run_ll_curve(cfg, o));
            });
        };
    });

    // fit-ll
    Common fl_c;
    std::string fl_data, fl_free = "beta,output_scale", fl_mode = "steady";
    nl::LLFitOptions fl_o;
    auto* fl = app.add_subcommand("fit-ll", "fit beta (and optionally eta_pump) to an L-L curve; fit.json");
    add_common(fl, fl_c);
    fl->add_option("--data", fl_data, "ll_curve.csv to fit")->required();
    fl->add_option("--free", fl_free, "free parameters from beta,eta_pump,output_scale")->capture_default_str();
    fl->add_option("--mode", fl_mode, "model used for the fit: steady | pulsed")->capture_default_str();
    fl->add_option("--cutoff", fl_o.fluence_cutoff, "drop points above this fluence");
    fl->add_option("--output-scale", fl_o.output_scale, "output scale when it is not free")->capture_default_str();
    fl->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(fl_c, src);
                fl_o.mode = nl::ll_mode_from_string(fl_mode);
                fl_o.threads = nl::thread_count_from_env();
                const auto data = nl::ll_curve_from_csv(nl::read_text(fl_data));
                auto a = nl::run_fit_ll(cfg, data, parse_names(fl_free), fl_o);
                a.options["data"] = fl_data;
                finish(fl_c, "fit-ll", cfg, src, a);
            });
        };
    });

    // chirp-model
    Common cm_c;
    nl::ChirpModelOptions cm_o;
    double cm_nthp = 0.17, cm_dtau = 35.0;
    auto* cm = app.add_subcommand("chirp-model", "evaluate the transient chirp model; chirp_model.csv");
    add_common(cm, cm_c);
    cm->add_option("--nth-over-p", cm_nthp, "N_th/P")->capture_default_str();
    cm->add_option("--delta-tau", cm_dtau, "pulse FWHM, ps")->capture_default_str();
    cm->add_option("--points", cm_o.points, "samples across the domain")->capture_default_str();
    cm->add_option("--domain", cm_o.domain_factor, "half-width of the domain in pulse FWHMs")->capture_default_str();
    cm->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(cm_c, src);
                auto p = nl::chirp_params_from(cfg);
                p.nth_over_p = cm_nthp;
                p.delta_tau = cm_dtau;
                finish(cm_c, "chirp-model", cfg, src, nl::run_chirp_model(p, cm_o));
            });
        };
    });

    // fit-chirp
    Common fc_c;
    std::string fc_trace;
    nl::ChirpFitOptions fc_o;
    double fc_nthp = 0.17, fc_dtau = 35.0;
    auto* fc = app.add_subcommand("fit-chirp", "fit N_th/P (and optionally alpha) to a chirp trace; fit.json");
    add_common(fc, fc_c);
    fc->add_option("--trace", fc_trace, "chirp trace CSV (t_ps,dlambda_pm,weight)")->required();
    fc->add_option("--delta-tau", fc_dtau, "pulse FWHM, ps")->capture_default_str();
    fc->add_option("--nth-over-p", fc_nthp, "initial N_th/P")->capture_default_str();
    fc->add_option("--time-offset", fc_o.time_offset, "pulse centre in trace time, ps")->capture_default_str();
    fc->add_option("--domain", fc_o.domain_factor, "half-width of the fit domain in pulse FWHMs")->capture_default_str();
    fc->add_flag("--fit-alpha", fc_o.fit_alpha, "also fit alpha (weakly identifiable)");
    fc->add_flag("--use-weights", fc_o.use_weights, "weight residuals by the trace weight column");
    fc->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(fc_c, src);
                auto p = nl::chirp_params_from(cfg);
                p.nth_over_p = fc_nthp;
                p.delta_tau = fc_dtau;
                const auto trace = nl::chirp_trace_from_csv(nl::read_text(fc_trace));
                auto a = nl::run_fit_chirp(trace, p, fc_o);
                a.options["trace"] = fc_trace;
                finish(fc_c, "fit-chirp", cfg, src, a);
            });
        };
    });

    // spectrogram, fig2-below, fig2-above
    Common sp_c;
    nl::SpectrogramScenarioOptions sp_o;
    auto* sp = app.add_subcommand("spectrogram", "simulated streak-camera spectrogram, chirp trace and chirp fit");
    add_common(sp, sp_c);
    sp->add_option("--pth-multiple", sp_o.pth_multiple, "pump fluence over threshold fluence")->capture_default_str();
    sp->add_option("--window-fwhm", sp_o.window_fwhm, "gate intensity FWHM, ps")->capture_default_str();
    sp->add_option("--n-freq", sp_o.n_freq, "wavelength bins")->capture_default_str();
    sp->add_option("--threshold", sp_o.threshold, "trace threshold relative to the global maximum")->capture_default_str();
    sp->add_option("--t-before", sp_o.t_before, "span before the pump arrival, ps")->capture_default_str();
    sp->add_option("--t-after", sp_o.t_after, "span after the pump arrival, ps")->capture_default_str();
    sp->callback([&] {
        action = [&] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(sp_c, src);
                finish(sp_c, "spectrogram", cfg, src, nl::run_spectrogram(cfg, sp_o));
            });
        };
    });
    Common f2b_c, f2a_c;
    auto* f2b = app.add_subcommand("fig2-below", "preset: spectrogram at 0.5x threshold");
    auto* f2a = app.add_subcommand("fig2-above", "preset: spectrogram at 5x threshold");
    add_common(f2b, f2b_c);
    add_common(f2a, f2a_c);
    auto fig2 = [&](Common& c, const char* name, double mult) {
        action = [&c, name, mult] {
            return run_guarded([&] {
                std::string src;
                const auto cfg = load(c, src);
                nl::SpectrogramScenarioOptions o;
                o.pth_multiple = mult;
                finish(c, name, cfg, src, nl::run_spectrogram(cfg, o));
            });
        };
    };
    f2b->callback([&] { fig2(f2b_c, "fig2-below", 0.5); });
    f2a->callback([&] { fig2(f2a_c, "fig2-above", 5.0); });

    // tbp
    double tb_dtau = 0.0, tb_dnu = 0.0, tb_alpha = -1.0;
    auto* tb = app.add_subcommand("tbp", "alpha from a time-bandwidth product, or the product from alpha");
    auto* o_dtau = tb->add_option("--delta-tau-ps", tb_dtau, "pulse FWHM, ps");
    auto* o_dnu = tb->add_option("--delta-nu-ghz", tb_dnu, "spectral FWHM, GHz");
    auto* o_alpha = tb->add_option("--alpha", tb_alpha, "linewidth enhancement factor");
    o_dtau->needs(o_dnu);
    o_dnu->needs(o_dtau);
    o_alpha->excludes(o_dnu);
    tb->callback([&] {
        action = [&] {
            return run_guarded([&] {
                if (o_alpha->count()) {
                    if (!(tb_alpha >= 0.0)) throw nl::InvalidArgument("--alpha must be >= 0");
                    const double tbp = nl::tbp_from_alpha(tb_alpha);
                    std::cout << "time_bandwidth_product = " << nl::format_double(tbp) << "\n";
                    if (o_dtau->count())
                        std::cout << "delta_nu_ghz = " << nl::format_double(1000.0 * tbp / tb_dtau) << "\n";
                } else if (o_dtau->count()) {
                    std::cout << "time_bandwidth_product = " << nl::format_double(tb_dtau * tb_dnu * 1e-3) << "\n";
                    std::cout << "alpha_h = " << nl::format_double(nl::alpha_from_widths(tb_dtau, tb_dnu)) << "\n";
                } else {
                    throw nl::InvalidArgument("tbp: give --delta-tau-ps with --delta-nu-ghz, or --alpha");
                }
            });
        };
    });

    // validate
    std::string va_path;
    auto* va = app.add_subcommand("validate", "check a parameter file against the strict schema");
    va->add_option("params", va_path, "parameter file")->required();
    va->callback([&] {
        action = [&] {
            return run_guarded([&] {
                const auto issues = nl::validate_config(va_path);
                if (!issues.empty()) throw nl::ConfigError(issues);
                std::cout << "valid: " << va_path << "\n";
            });
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }
    return action ? action() : config_error;
}
