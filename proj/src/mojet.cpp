#include "mojet/mojet.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <optional>
#include <thread>

#include "mojet/errors.hpp"

namespace mojet {

namespace {

std::vector<std::pair<std::size_t, std::size_t>> resolve_pairs(
    std::size_t channels, const std::vector<std::pair<std::size_t, std::size_t>>& requested) {
    if (!requested.empty()) {
        for (const auto& [a, b] : requested) {
            if (a >= channels || b >= channels || a == b) {
                throw ValidationError("mojet: invalid channel pair (" + std::to_string(a) + ", " +
                                      std::to_string(b) + ")");
            }
        }
        return requested;
    }
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t a = 0; a < channels; ++a)
        for (std::size_t b = a + 1; b < channels; ++b) all.emplace_back(a, b);
    return all;
}

BaseDiagnostics diagnose_base(std::size_t s, const std::vector<std::vector<Jet>>& jets,
                              const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                              const MojetOptions& options) {
    BaseDiagnostics bd;
    bd.base_id = s;
    for (const auto& channel : jets) bd.ranks.push_back(numerical_rank(channel[s].jacobian, options.rank_tol));
    for (const auto& [a, b] : pairs) {
        if (bd.ranks[a].rank == 0 || bd.ranks[b].rank == 0) {
            bd.sims.emplace_back(std::nullopt);
        } else {
            bd.sims.emplace_back(jet_sim(jets[a][s].jacobian, jets[b][s].jacobian, options.retain));
        }
    }
    return bd;
}

}  // namespace

MojetResult run_mojet(std::span<const TappedModel> models, std::span<const Vector> bases,
                      const MojetOptions& options, const RngStream& probe_rng) {
    if (models.empty()) throw ValidationError("mojet: no models");
    if (bases.empty()) throw ValidationError("mojet: no base points");
    const std::size_t d = models.front().pipeline->input_dim();
    MojetResult result;
    std::vector<std::size_t> channel_offset;
    for (const auto& m : models) {
        if (m.pipeline == nullptr) throw ValidationError("mojet: model '" + m.name + "' has no pipeline");
        if (m.pipeline->input_dim() != d) {
            throw ValidationError("mojet: models disagree on input dimension");
        }
        if (m.taps.empty()) throw ValidationError("mojet: model '" + m.name + "' declares no taps");
        channel_offset.push_back(result.channels.size());
        for (const auto& t : m.taps) result.channels.push_back(m.name + "/" + t);
    }
    const auto pairs = resolve_pairs(result.channels.size(), options.pairs);
    result.jets.assign(result.channels.size(), std::vector<Jet>(bases.size()));

    const auto start = std::chrono::steady_clock::now();
    std::optional<ProbeBatch> shared;
    if (!options.sweep.per_base_probes) {
        shared = probes_for_base(options.design, d, probe_rng, 0, options.sweep);
    }

    auto collect = [&](std::size_t s) {
        const ProbeBatch batch =
            shared ? *shared : probes_for_base(options.design, d, probe_rng, s, options.sweep);
        for (std::size_t m = 0; m < models.size(); ++m) {
            auto jets = estimate_jets(*models[m].pipeline, models[m].taps, bases[s], batch, options.ridge);
            for (std::size_t t = 0; t < jets.size(); ++t) {
                result.jets[channel_offset[m] + t][s] = std::move(jets[t]);
            }
        }
        return batch.delta.rows();
    };

    std::vector<std::size_t> probes_used(bases.size(), 0);
    if (options.sweep.parallel && bases.size() > 1) {
        const std::size_t workers =
            std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, bases.size());
        std::vector<std::future<void>> pending;
        for (std::size_t w = 0; w < workers; ++w) {
            pending.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t s = w; s < bases.size(); s += workers) probes_used[s] = collect(s);
            }));
        }
        for (auto& f : pending) f.get();
    } else {
        for (std::size_t s = 0; s < bases.size(); ++s) probes_used[s] = collect(s);
    }

    DiagnosticsPartial part;
    part.channels = result.channels;
    part.pairs = pairs;
    for (std::size_t s = 0; s < bases.size(); ++s) {
        part.bases.push_back(diagnose_base(s, result.jets, pairs, options));
        part.cost.probe_passes += probes_used[s] * models.size();
        part.cost.base_passes += models.size();
    }
    part.cost.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report = aggregate(std::span(&part, 1), options.thresholds);
    return result;
}

DiagnosticsReport rediagnose(const MojetResult& result, const MojetOptions& options) {
    if (result.jets.empty()) throw ValidationError("rediagnose: no jets");
    DiagnosticsPartial part;
    part.channels = result.channels;
    part.pairs = resolve_pairs(result.channels.size(), options.pairs);
    for (std::size_t s = 0; s < result.jets.front().size(); ++s) {
        part.bases.push_back(diagnose_base(s, result.jets, part.pairs, options));
    }
    part.cost = result.report.cost;
    return aggregate(std::span(&part, 1), options.thresholds);
}

}  // namespace mojet
