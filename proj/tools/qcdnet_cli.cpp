#include "qcdnet/bellman.hpp"
#include "qcdnet/errors.hpp"
#include "qcdnet/experiments.hpp"
#include "qcdnet/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <numeric>

using namespace qcdnet;

namespace {

enum ExitCode { ok = 0, validation_failed = 1, config_error = 2, stability_refused = 3 };

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    std::size_t episodes = 0;
    std::size_t calibration_episodes = 0;
    std::string out;
    bool trace = false;
    bool serial = false;
};

Scenario load(const Options &o, CLI::App &app) {
    Scenario s = o.config.empty() ? reference_scenario() : load_scenario(o.config);
    if (app.get_option("--seed")->count() > 0) {
        s.seed = o.seed;
    }
    if (app.get_option("--episodes")->count() > 0) {
        s.episodes = o.episodes;
    }
    if (app.get_option("--calibration-episodes")->count() > 0) {
        s.calibration_episodes = o.calibration_episodes;
    }
    try {
        s.validate();
    } catch (const InvalidArgument &e) {
        throw ConfigError(e.what());
    }
    return s;
}

void emit_csv(const Options &o, const SweepResult &r) {
    if (o.out.empty()) {
        return;
    }
    std::ofstream f(o.out);
    if (!f) {
        throw ConfigError("cannot write '" + o.out + "'");
    }
    write_sweep_csv(f, r);
    std::cout << "wrote " << o.out << "\n";
}

void emit_trace(const Options &o, const Scenario &s) {
    if (!o.trace) {
        return;
    }
    const std::string path = o.out.empty() ? "qcdnet_trace.csv" : o.out + ".trace.csv";
    std::ofstream f(path);
    if (!f) {
        throw ConfigError("cannot write '" + path + "'");
    }
    f << "# " << csv_schema << " table=trace seed=" << s.seed << "\n";
    const Slot slots = std::min<Slot>(s.horizon_cap, 50LL * s.net.period);
    write_network_trace(f, s.net, slots, s.seed);
    std::cout << "wrote " << path << "\n";
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quickest change detection over a random-access sensor network"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "Scenario JSON file")->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "Master seed (overrides the config)");
    app.add_option("--episodes", o.episodes, "Estimation episodes per point (overrides the config)");
    app.add_option("--calibration-episodes", o.calibration_episodes, "Episodes used to calibrate each threshold");
    app.add_option("--out", o.out, "CSV output path");
    app.add_flag("--trace", o.trace, "Also write a per-slot network trace CSV");
    app.add_flag("--serial", o.serial, "Run the serial reference kernels instead of OpenMP");

    auto *run = app.add_subcommand("run", "Calibrate and evaluate both detectors on one scenario");
    auto *sweep_rate_cmd = app.add_subcommand("sweep-rate", "Sweep the sampling period");
    std::vector<int> periods;
    sweep_rate_cmd->add_option("--periods", periods, "Sampling periods (default 28..60)");
    auto *sweep_nodes_cmd = app.add_subcommand("sweep-nodes", "Sweep N at a fixed observation rate N*r");
    std::vector<int> nodes;
    double nr = 1.0 / 3.0;
    sweep_nodes_cmd->add_option("--nodes", nodes, "Sensor counts (default 1..30)");
    sweep_nodes_cmd->add_option("--nr", nr, "Observation rate N*r per slot");
    auto *validate = app.add_subcommand("validate", "Run the exact identity checks");
    auto *dp = app.add_subcommand("dp-solve", "Value iteration on a tiny instance");
    TinyScenario tiny;
    tiny.obs = ObservationModel::gaussian(0.0, 1.0, 1.0, 1.0);
    dp->add_option("--sensors", tiny.net.n_sensors, "N (1 or 2)");
    dp->add_option("--period", tiny.net.period, "Sampling period (<= 4)");
    dp->add_option("--sigma", tiny.net.sigma, "Success rate");
    dp->add_option("--p", tiny.change.p, "Per-slot change probability");
    dp->add_option("--cost", tiny.cost_c, "Cost per slot of delay");
    dp->add_option("--delta-cap", tiny.delta_cap, "Largest batch age kept");
    dp->add_option("--grid", tiny.pi_grid, "Points of the pi grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? ExitCode::ok : ExitCode::config_error;
    }

    const Execution exec = o.serial ? Execution::serial : Execution::parallel;
    try {
        if (*run) {
            const Scenario s = load(o, app);
            emit_trace(o, s);
            const RunReport r = run_scenario(s, exec);
            print_run_report(std::cout, r);
            emit_csv(o, run_report_rows(r));
        } else if (*sweep_rate_cmd) {
            const Scenario s = load(o, app);
            if (periods.empty()) {
                periods.resize(33);
                std::iota(periods.begin(), periods.end(), 28);
            }
            emit_trace(o, s);
            const SweepResult r = sweep_rate(s, periods, exec, &std::cout);
            emit_csv(o, r);
        } else if (*sweep_nodes_cmd) {
            const Scenario s = load(o, app);
            if (nodes.empty()) {
                nodes.resize(30);
                std::iota(nodes.begin(), nodes.end(), 1);
            }
            const SweepResult r = sweep_nodes(s, nodes, nr, exec, &std::cout);
            emit_csv(o, r);
        } else if (*validate) {
            const std::uint64_t seed = app.get_option("--seed")->count() > 0 ? o.seed : 1;
            const auto checks = validate_suite(seed, exec);
            print_checks(std::cout, checks);
            for (const auto &c : checks) {
                if (!c.passed) {
                    return ExitCode::validation_failed;
                }
            }
        } else if (*dp) {
            if (!o.config.empty()) {
                const Scenario s = load(o, app);
                tiny.obs = s.obs;
                tiny.cost_c = s.cost_c;
            }
            const DpResult r = bellman_value_iteration(tiny);
            std::cout << r.states.size() << " queue states, " << r.iterations << " iterations, residual "
                      << r.residuals.back() << "\n";
            std::cout << "stop sets are up-sets: " << (r.all_upsets() ? "yes" : "no")
                      << "; value concave in pi: " << (r.all_concave() ? "yes" : "no")
                      << "; cap redirects: " << r.cap_redirects << "\n";
            if (o.out.empty()) {
                write_threshold_csv(std::cout, r);
            } else {
                std::ofstream f(o.out);
                write_threshold_csv(f, r);
                std::cout << "wrote " << o.out << "\n";
            }
            if (!r.all_upsets() || !r.all_concave()) {
                return ExitCode::validation_failed;
            }
        }
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const InvalidArgument &e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const StabilityError &e) {
        std::cerr << "refused: " << e.what() << "\n";
        return ExitCode::stability_refused;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return ExitCode::validation_failed;
    }
    return ExitCode::ok;
}
