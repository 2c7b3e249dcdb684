// mojet <experiment> --config <file.json> --out <dir> [--seed N] [--plot-data] [--parallel]
//
// Exit codes: 0 success, 2 config error, 3 numeric failure, 4 data-file
// error, 1 anything else.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mojet/errors.hpp"
#include "mojet/experiments.hpp"

namespace {

int fail(int code, const char* kind, const std::exception& e) {
    std::cerr << "mojet: " << kind << ": " << e.what() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modular jet diagnostics experiments"};
    std::string experiment;
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool plot_data = false;
    bool parallel = false;

    std::string names;
    for (const auto& n : mojet::experiment_names()) names += (names.empty() ? "" : ", ") + n;
    app.add_option("experiment", experiment, "One of: " + names)->required();
    app.add_option("--config", config_path, "Experiment config (JSON); defaults apply when omitted");
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--seed", seed, "Override the config seed");
    app.add_flag("--plot-data", plot_data, "Also write long-format plot_data.csv");
    app.add_flag("--parallel", parallel, "Estimate base-point jets concurrently");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        mojet::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = mojet::ExperimentConfig::from_json(mojet::read_json_file(config_path));
        }
        if (cfg.experiment.empty()) cfg.experiment = experiment;
        if (cfg.experiment != experiment) {
            throw mojet::ValidationError("config names experiment '" + cfg.experiment + "' but '" + experiment +
                                         "' was requested");
        }
        if (seed) cfg.seed = *seed;
        if (parallel) cfg.parallel = true;
        const auto out = mojet::run_experiment(cfg);
        mojet::write_outputs(out, out_dir, plot_data);
        std::cout << "mojet: " << experiment << " -> " << out_dir << "\n";
        return 0;
    } catch (const mojet::ValidationError& e) {
        return fail(2, "config error", e);
    } catch (const mojet::DataError& e) {
        return fail(4, "data error", e);
    } catch (const mojet::NumericError& e) {
        return fail(3, "numeric failure", e);
    } catch (const std::exception& e) {
        return fail(1, "error", e);
    }
}
