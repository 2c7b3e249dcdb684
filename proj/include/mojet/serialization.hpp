#pragma once

// JSON documents for pipelines, probe designs, jets and reports, plus the
// CSV writer used for every tabular output.
//
// JSON numbers are written in nlohmann's shortest round-trip form, so a
// finite double read back is bit-identical. CSV floats are printed with
// %.17g; fields containing a comma, quote, CR or LF are quoted (RFC 4180)
// and records end in CRLF.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mojet/diagnostics.hpp"
#include "mojet/identifiability.hpp"
#include "mojet/jets.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/probes.hpp"
#include "mojet/training.hpp"

namespace mojet {

using Json = nlohmann::ordered_json;

// Malformed documents throw ValidationError naming the offending field.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, std::string_view what = "matrix");
Vector vector_from_json(const Json& j, std::string_view what = "vector");

Json module_to_json(const Module& m);
Module module_from_json(const Json& j);
Json pipeline_to_json(const Pipeline& p);
Pipeline pipeline_from_json(const Json& j);

Json probe_design_to_json(const ProbeDesign& d);
ProbeDesign probe_design_from_json(const Json& j);

Json ridge_to_json(const RidgePolicy& r);
RidgePolicy ridge_from_json(const Json& j);

Json jet_to_json(const Jet& jet);
Jet jet_from_json(const Json& j);

Json summary_to_json(const SummaryStats& s);
Json cost_to_json(const CostCounters& c);
// Per-base entries are included unless `per_base` is false.
Json diagnostics_to_json(const DiagnosticsReport& r, bool per_base = true);

Json factorization_to_json(const LinearFactorization& f);
Json mirage_verification_to_json(const MirageVerification& v);
Json recovery_to_json(const RecoveryReport& r);

Json read_json_file(const std::filesystem::path& path);
// Pretty-printed with two-space indent and a trailing newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

std::string format_double(double v);

using CsvField = std::variant<std::string, double, std::int64_t, std::uint64_t>;

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    void row(const std::vector<CsvField>& fields);

    static std::string quote(std::string_view field);
    static std::string render(const std::vector<CsvField>& fields);

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

// RFC 4180 reader (quoted fields, doubled quotes, CRLF or LF).
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

// ranks.csv: base_id, tap, rank, s1, s_k (s_k = smallest retained singular
// value, 0 for rank 0).
void write_ranks_csv(const DiagnosticsReport& r, const std::filesystem::path& path);
// jetsim.csv: base_id, pair, score (empty score when undefined).
void write_jetsim_csv(const DiagnosticsReport& r, const std::filesystem::path& path);
void write_train_log_csv(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path);

}  // namespace mojet
