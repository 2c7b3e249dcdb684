#pragma once

// End-to-end Modular Jet Diagnostics: data collection, jet estimation and
// diagnostics over a set of tapped models and base points.
//
// Every (model, tap) pair is a "channel". For each base point x_s and each
// model, the model is run once at x_s and once per probe; all of the model's
// taps are read from the same passes. Jets are fitted per channel, ranks are
// computed per channel, and JetSim per requested channel pair.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mojet/diagnostics.hpp"
#include "mojet/jets.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/probes.hpp"
#include "mojet/rng.hpp"

namespace mojet {

struct TappedModel {
    std::string name;
    const Pipeline* pipeline = nullptr;
    std::vector<std::string> taps;
};

struct MojetOptions {
    ProbeDesign design = ProbeDesign::isotropic(kDefaultProbeScale);
    RidgePolicy ridge{};
    BaseSweepOptions sweep{};
    double rank_tol = tolerances::kRank;
    RetainRule retain{};
    MirageThresholds thresholds{};
    // Channel pairs to compare; empty means every pair (a < b).
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

struct MojetResult {
    std::vector<std::string> channels;       // "<model>/<tap>"
    std::vector<std::vector<Jet>> jets;      // [channel][base]
    DiagnosticsReport report;
};

MojetResult run_mojet(std::span<const TappedModel> models, std::span<const Vector> bases,
                      const MojetOptions& options, const RngStream& probe_rng);

// Recomputes ranks / JetSim for already-estimated jets under a different
// retention rule (used by the subspace-dimension sweep).
DiagnosticsReport rediagnose(const MojetResult& result, const MojetOptions& options);

}  // namespace mojet
