#include "mojet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mojet/errors.hpp"

namespace mojet {

namespace {

// Tiny slack so that exact ratios like 9/10 >= 0.9 are not lost to rounding.
constexpr double kVarianceSlack = 1e-12;

std::size_t count_above(const Vector& s, double tol_rel) {
    if (s.empty() || s.front() == 0.0) return 0;
    const double cut = tol_rel * s.front();
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [&](double v) { return v > cut; }));
}

std::size_t retained_dim(const Svd& d, const RetainRule& retain, bool& capped) {
    if (const auto* rel = std::get_if<RelativeThreshold>(&retain)) {
        if (!(rel->tol > 0.0 && rel->tol < 1.0)) {
            throw ValidationError("jet_sim: relative threshold must lie in (0, 1)");
        }
        return count_above(d.s, rel->tol);
    }
    const auto& ex = std::get<ExplicitK>(retain);
    if (ex.k == 0) throw ValidationError("jet_sim: explicit k must be positive");
    const std::size_t available = count_above(d.s, tolerances::kRank);
    if (ex.k > available) capped = true;
    return std::min(ex.k, available);
}

double interpolate_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) return sorted.front();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

RankResult numerical_rank(const Matrix& a, double tol_rel) {
    if (!(tol_rel > 0.0 && tol_rel < 1.0)) {
        throw ValidationError("numerical_rank: tol_rel must lie in (0, 1)");
    }
    RankResult r;
    r.singular_values = singular_values(a);
    r.tol_rel = tol_rel;
    r.rank = count_above(r.singular_values, tol_rel);
    return r;
}

JetSimResult jet_sim(const Matrix& a, const Matrix& b, const RetainRule& retain) {
    if (a.cols() != b.cols()) {
        throw ValidationError("jet_sim: Jacobians act on different input dimensions (" +
                              std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) + ")");
    }
    const Svd sa = svd(a);
    const Svd sb = svd(b);
    if (sa.s.front() == 0.0 || sb.s.front() == 0.0) {
        throw ValidationError("jet_sim: similarity is undefined for a zero Jacobian");
    }
    JetSimResult out;
    out.k_a = retained_dim(sa, retain, out.capped);
    out.k_b = retained_dim(sb, retain, out.capped);
    const std::size_t k = std::min(out.k_a, out.k_b);

    // Overlap of the leading k input-space directions: M = U_aᵀ U_b (k × k).
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) m(i, j) = dot(sa.vt.row(i), sb.vt.row(j));
    out.cosines = singular_values(m);
    for (double& c : out.cosines) c = std::clamp(c, 0.0, 1.0);
    out.score = std::accumulate(out.cosines.begin(), out.cosines.end(), 0.0) /
                static_cast<double>(k);
    return out;
}

std::size_t select_k_variance(std::span<const Matrix> jacobians, double rho) {
    if (jacobians.empty()) throw ValidationError("select_k_variance: no jets");
    if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("select_k_variance: rho must lie in (0, 1)");
    const Matrix stacked = vstack(jacobians);
    Matrix cov = transpose_times(stacked, stacked);
    cov *= 1.0 / static_cast<double>(stacked.rows());
    // C is symmetric PSD, so its singular values are its eigenvalues.
    const Vector eig = singular_values(cov);
    const double total = std::accumulate(eig.begin(), eig.end(), 0.0);
    if (!(total > 0.0)) throw NumericError("select_k_variance: degenerate (all-zero) spectrum");
    double acc = 0.0;
    for (std::size_t k = 0; k < eig.size(); ++k) {
        acc += eig[k];
        if (acc / total >= rho - kVarianceSlack) return k + 1;
    }
    return eig.size();
}

std::size_t select_k_variance(std::span<const Jet> jets, double rho) {
    std::vector<Matrix> mats;
    mats.reserve(jets.size());
    for (const auto& j : jets) mats.push_back(j.jacobian);
    return select_k_variance(mats, rho);
}

SummaryStats summarize(std::span<const double> values) {
    SummaryStats s;
    s.count = values.size();
    if (values.empty()) return s;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    s.median = interpolate_sorted(sorted, 0.5);
    s.p25 = interpolate_sorted(sorted, 0.25);
    s.p75 = interpolate_sorted(sorted, 0.75);
    s.min = sorted.front();
    s.max = sorted.back();
    return s;
}

std::string_view mirage_flag_name(MirageFlag f) {
    switch (f) {
        case MirageFlag::kMirageLike: return "mirage-like";
        case MirageFlag::kSeparated: return "separated";
        case MirageFlag::kMixed: return "mixed";
        case MirageFlag::kUndefined: break;
    }
    return "undefined";
}

DiagnosticsReport aggregate(std::span<const DiagnosticsPartial> parts,
                            const MirageThresholds& thresholds) {
    if (parts.empty()) throw ValidationError("aggregate: no diagnostics to aggregate");
    DiagnosticsReport r;
    r.channels = parts.front().channels;
    r.pairs = parts.front().pairs;
    r.thresholds = thresholds;
    for (const auto& p : parts) {
        if (p.channels != r.channels || p.pairs != r.pairs) {
            throw ValidationError("aggregate: partial results describe different channels or pairs");
        }
        for (const auto& b : p.bases) {
            if (b.ranks.size() != r.channels.size() || b.sims.size() != r.pairs.size()) {
                throw ValidationError("aggregate: base " + std::to_string(b.base_id) +
                                      " has inconsistent entries");
            }
            r.bases.push_back(b);
        }
        r.cost.probe_passes += p.cost.probe_passes;
        r.cost.base_passes += p.cost.base_passes;
        r.cost.wall_time_s += p.cost.wall_time_s;
    }
    if (r.bases.empty()) throw ValidationError("aggregate: no base points");
    std::stable_sort(r.bases.begin(), r.bases.end(),
                     [](const BaseDiagnostics& a, const BaseDiagnostics& b) {
                         return a.base_id < b.base_id;
                     });

    for (std::size_t c = 0; c < r.channels.size(); ++c) {
        std::vector<double> ranks;
        for (const auto& b : r.bases) ranks.push_back(static_cast<double>(b.ranks[c].rank));
        r.channel_summaries.push_back(ChannelSummary{r.channels[c], summarize(ranks)});
    }
    for (std::size_t p = 0; p < r.pairs.size(); ++p) {
        const auto [ca, cb] = r.pairs[p];
        PairSummary ps{r.channels.at(ca), r.channels.at(cb), {}, 0, MirageFlag::kUndefined};
        std::vector<double> scores;
        for (const auto& b : r.bases) {
            if (b.sims[p]) {
                scores.push_back(b.sims[p]->score);
            } else {
                ++ps.undefined;
            }
        }
        ps.score_stats = summarize(scores);
        if (!scores.empty()) {
            const bool same_rank =
                r.channel_summaries[ca].rank_stats.median == r.channel_summaries[cb].rank_stats.median;
            const double mean = ps.score_stats.mean;
            if (mean >= thresholds.hi && same_rank) {
                ps.flag = MirageFlag::kMirageLike;
            } else if (mean <= thresholds.lo || !same_rank) {
                ps.flag = MirageFlag::kSeparated;
            } else {
                ps.flag = MirageFlag::kMixed;
            }
        }
        r.pair_summaries.push_back(std::move(ps));
    }
    return r;
}

std::string pair_label(const DiagnosticsReport& r, std::size_t pair_index) {
    const auto [a, b] = r.pairs.at(pair_index);
    return r.channels.at(a) + "|" + r.channels.at(b);
}

}  // namespace mojet
