#pragma once

// Experiment runners behind the `mojet` CLI.
//
// A run is fully determined by its ExperimentConfig: data, initialization,
// splits, base points and probes all come from named RngStreams of the
// configured seed. Only wall-clock fields ("wall_time_s") vary between runs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mojet/diagnostics.hpp"
#include "mojet/jets.hpp"
#include "mojet/serialization.hpp"

namespace mojet {

inline constexpr const char* kArtifactName = "mojet";
inline constexpr const char* kArtifactVersion = "0.1.0";

// Recognized experiment names.
const std::vector<std::string>& experiment_names();

struct TrainOverrides {
    std::optional<std::size_t> epochs;
    std::optional<double> step_size;
    std::optional<std::size_t> batch_size;
    std::optional<double> l2;
};

// Unset optionals take the experiment's default. See README for the schema.
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 0;

    std::optional<std::size_t> n_train;
    std::optional<std::size_t> n_test;
    std::optional<std::size_t> d;
    std::optional<std::size_t> k;
    std::optional<std::size_t> S;
    std::optional<std::size_t> J;

    std::optional<double> probe_sigma;
    std::optional<bool> per_base_probes;
    std::optional<RidgePolicy> ridge;
    double rank_tol = tolerances::kRank;
    MirageThresholds thresholds;

    std::optional<double> noise_sigma;   // linreg target noise
    std::optional<double> x_noise;       // latent / mixture input noise
    std::optional<double> y_noise;       // latent regression target noise
    std::optional<double> separation;    // mixture class separation
    std::optional<double> latent_noise;  // mixture latent spread

    std::string digits_csv;  // empty: synthetic stroke digits
    std::size_t synthetic_n = 1797;
    double test_fraction = 0.2;

    TrainOverrides logistic;
    TrainOverrides mlp;

    std::size_t replicas = 10;          // deep_regressor seeds
    std::vector<double> sweep_values;   // sweep_* and cost; empty = default grid

    bool parallel = false;  // concurrent base-point estimation

    // Strict parsing: unknown keys are rejected. Throws ValidationError.
    static ExperimentConfig from_json(const Json& j);
    void validate() const;
};

// Long-format row for --plot-data output.
struct PlotRow {
    std::string run;
    std::string series;
    std::string x;
    double y = 0.0;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<CsvField>> rows;
};

struct DiagnosticsRun {
    std::string label;  // e.g. "coarse", "seed3/structured"
    DiagnosticsReport report;
    std::size_t probes = 0;               // J
    std::size_t models = 0;               // M
    std::uint64_t counted_passes = 0;     // pipeline counters, probes + bases
};

struct ExperimentOutput {
    Json report;
    std::vector<DiagnosticsRun> runs;  // ranks.csv / jetsim.csv
    Table cost;                        // cost.csv
    std::optional<Table> sweep;        // sweep.csv
    // Experiment-specific figure tables, written as <name>.csv.
    std::vector<std::pair<std::string, Table>> figures;
    std::vector<PlotRow> plot;         // plot_data.csv with --plot-data
};

// Runs the configured experiment. Errors from any stage are rethrown with
// the stage named in the message, keeping their type.
ExperimentOutput run_experiment(const ExperimentConfig& config);

// report.json, ranks.csv, jetsim.csv, cost.csv, sweep.csv (sweeps only),
// figure tables, and plot_data.csv when plot_data is set.
void write_outputs(const ExperimentOutput& out, const std::filesystem::path& dir, bool plot_data);

// Copy of j with every "wall_time_s" member removed (recursively), for
// run-to-run comparisons.
Json strip_timing(const Json& j);

}  // namespace mojet
