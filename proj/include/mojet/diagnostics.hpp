#pragma once

// Rank and subspace-similarity diagnostics over jets, plus aggregation into a
// mirage / identifiability report.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mojet/jets.hpp"
#include "mojet/linalg.hpp"
#include "mojet/matrix.hpp"

namespace mojet {

struct RankResult {
    std::size_t rank = 0;
    Vector singular_values;  // nonincreasing
    double tol_rel = tolerances::kRank;
};

// rank = #{i : s_i > tol_rel · s_1}; the zero matrix has rank 0.
RankResult numerical_rank(const Matrix& a, double tol_rel = tolerances::kRank);

// How many leading right singular vectors of a jet span its input subspace.
struct RelativeThreshold {
    double tol = tolerances::kRank;
};
// Fixed k, capped at the jet's numerical rank (at the default tolerance).
struct ExplicitK {
    std::size_t k = 1;
};
using RetainRule = std::variant<RelativeThreshold, ExplicitK>;

struct JetSimResult {
    double score = 0.0;       // mean of cosines, in [0, 1]
    std::size_t k_a = 0;      // retained dimension of a
    std::size_t k_b = 0;      // retained dimension of b
    Vector cosines;           // min(k_a, k_b) principal-angle cosines, nonincreasing
    bool capped = false;      // an ExplicitK request exceeded a jet's rank
};

// Subspace similarity between the input-space row spaces of two Jacobians.
// Both bases are truncated to their leading min(k_a, k_b) right singular
// vectors; the cosines are the singular values of U_aᵀU_b.
// Throws ValidationError for mismatched input dimensions or a zero matrix.
JetSimResult jet_sim(const Matrix& a, const Matrix& b, const RetainRule& retain = {});

// Smallest k whose leading eigenvalues of C = AᵀA / N capture a fraction rho
// of the trace, with A the row-wise stack of every Jacobian (N rows total).
std::size_t select_k_variance(std::span<const Matrix> jacobians, double rho);
std::size_t select_k_variance(std::span<const Jet> jets, double rho);

struct SummaryStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

// Percentiles use linear interpolation between order statistics.
SummaryStats summarize(std::span<const double> values);

enum class MirageFlag { kMirageLike, kSeparated, kMixed, kUndefined };
std::string_view mirage_flag_name(MirageFlag f);

// Artifact policy, not derived from theory; raw scores are always reported.
struct MirageThresholds {
    double hi = 0.95;
    double lo = 0.70;
};

struct CostCounters {
    std::uint64_t probe_passes = 0;
    std::uint64_t base_passes = 0;
    double wall_time_s = 0.0;
};

// Diagnostics computed at a single base point.
struct BaseDiagnostics {
    std::size_t base_id = 0;
    std::vector<RankResult> ranks;                   // one per channel
    std::vector<std::optional<JetSimResult>> sims;   // one per pair; nullopt if undefined
};

// Partial result over a subset of base points. Partials with the same
// channels and pairs merge associatively.
struct DiagnosticsPartial {
    std::vector<std::string> channels;  // e.g. "pca/scores"
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<BaseDiagnostics> bases;
    CostCounters cost;
};

struct ChannelSummary {
    std::string channel;
    SummaryStats rank_stats;
};

struct PairSummary {
    std::string channel_a;
    std::string channel_b;
    SummaryStats score_stats;   // over bases with a defined score
    std::size_t undefined = 0;  // bases where a jet was zero
    MirageFlag flag = MirageFlag::kUndefined;
};

struct DiagnosticsReport {
    std::vector<std::string> channels;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<BaseDiagnostics> bases;  // sorted by base_id
    std::vector<ChannelSummary> channel_summaries;
    std::vector<PairSummary> pair_summaries;
    MirageThresholds thresholds;
    CostCounters cost;
};

// Merges partials and computes summary statistics and mirage flags:
//   mirage-like  if mean JetSim >= hi and the two channels' median ranks agree;
//   separated    if mean JetSim <= lo or the median ranks differ;
//   mixed        otherwise.
DiagnosticsReport aggregate(std::span<const DiagnosticsPartial> parts,
                            const MirageThresholds& thresholds = {});

std::string pair_label(const DiagnosticsReport& r, std::size_t pair_index);

}  // namespace mojet
