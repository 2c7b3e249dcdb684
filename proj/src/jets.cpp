#include "mojet/jets.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <thread>
#include <string>

#include "mojet/errors.hpp"
#include "mojet/linalg.hpp"

namespace mojet {

namespace {

template <class F>
auto with_base_context(std::size_t base, F&& f) -> decltype(f()) {
    const std::string prefix = "base " + std::to_string(base) + ": ";
    try {
        return f();
    } catch (const RankDeficiencyError& e) {
        throw RankDeficiencyError(prefix + e.what());
    } catch (const SingularSystemError& e) {
        throw SingularSystemError(prefix + e.what());
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    }
}

}  // namespace

double resolve_ridge(const RidgePolicy& policy, const ProbeBatch& batch) {
    if (batch.delta.empty()) throw ValidationError("resolve_ridge: empty probe batch");
    if (const auto* fixed = std::get_if<FixedRidge>(&policy)) {
        if (!(fixed->lambda >= 0.0) || !std::isfinite(fixed->lambda)) {
            throw ValidationError("ridge: lambda must be nonnegative");
        }
        return fixed->lambda;
    }
    if (const auto* sa = std::get_if<ScaleAwareRidge>(&policy)) {
        if (!(sa->alpha >= 0.0) || !std::isfinite(sa->alpha)) {
            throw ValidationError("ridge: alpha must be nonnegative");
        }
        // Largest eigenvalue of ΔᵀΔ/J is s_max(Δ)² / J.
        const double smax = singular_values(batch.delta).front();
        return sa->alpha * smax * smax / static_cast<double>(batch.delta.rows());
    }
    return 0.0;
}

Matrix fit_jacobian(const Matrix& delta, const Matrix& responses, double lambda) {
    if (delta.rows() != responses.rows()) {
        throw ValidationError("fit_jacobian: probe and response counts differ");
    }
    if (!(lambda >= 0.0)) throw ValidationError("fit_jacobian: negative lambda");
    const std::size_t d = delta.cols();
    const char* advice = "; enlarge J (need J >= d with full column rank) or use a ridge policy";
    if (lambda == 0.0 && delta.rows() < d) {
        throw RankDeficiencyError("jet fit: J = " + std::to_string(delta.rows()) + " probes < d = " +
                                  std::to_string(d) + advice);
    }
    Matrix gram = transpose_times(delta, delta);
    for (std::size_t i = 0; i < d; ++i) gram(i, i) += lambda;
    const Matrix rhs = transpose_times(delta, responses);
    try {
        return solve_spd(gram, rhs).transpose();
    } catch (const SingularSystemError&) {
        if (lambda == 0.0) {
            throw RankDeficiencyError(std::string("jet fit: probe Gram matrix is singular") + advice);
        }
        throw;
    }
}

std::vector<Jet> estimate_jets(const Pipeline& p, std::span<const std::string> taps,
                               std::span<const double> x0, const ProbeBatch& batch,
                               const RidgePolicy& ridge) {
    if (taps.empty()) throw ValidationError("estimate_jets: no taps requested");
    const std::size_t d = p.input_dim();
    if (x0.size() != d) {
        throw ValidationError("estimate_jets: base point has dimension " +
                              std::to_string(x0.size()) + ", pipeline expects " + std::to_string(d));
    }
    if (batch.delta.cols() != d) {
        throw ValidationError("estimate_jets: probes have dimension " +
                              std::to_string(batch.delta.cols()) + ", pipeline expects " +
                              std::to_string(d));
    }
    std::vector<std::size_t> positions;
    for (const auto& t : taps) positions.push_back(p.tap_position(t));
    const double lambda = resolve_ridge(ridge, batch);

    const Evaluation base = p.evaluate(x0);
    const std::size_t j_count = batch.delta.rows();
    std::vector<Matrix> responses;
    for (std::size_t pos : positions) responses.emplace_back(j_count, base.taps[pos].value.size());

    Vector x(d);
    for (std::size_t j = 0; j < j_count; ++j) {
        auto delta = batch.delta.row(j);
        for (std::size_t i = 0; i < d; ++i) x[i] = x0[i] + delta[i];
        const Evaluation ev = p.evaluate(x);
        for (std::size_t t = 0; t < positions.size(); ++t) {
            const auto& z = ev.taps[positions[t]].value;
            const auto& z0 = base.taps[positions[t]].value;
            auto row = responses[t].row(j);
            for (std::size_t i = 0; i < z.size(); ++i) row[i] = z[i] - z0[i];
        }
    }

    std::vector<Jet> jets;
    for (std::size_t t = 0; t < positions.size(); ++t) {
        Jet jet;
        jet.tap = taps[t];
        jet.base_point.assign(x0.begin(), x0.end());
        jet.base_value = base.taps[positions[t]].value;
        jet.jacobian = fit_jacobian(batch.delta, responses[t], lambda);
        jet.lambda_used = lambda;
        if (!jet.jacobian.all_finite()) throw NumericError("estimate_jets: non-finite Jacobian");
        jets.push_back(std::move(jet));
    }
    return jets;
}

Jet estimate_jet(const Pipeline& p, std::string_view tap, std::span<const double> x0,
                 const ProbeBatch& batch, const RidgePolicy& ridge) {
    const std::string name(tap);
    return std::move(estimate_jets(p, std::span(&name, 1), x0, batch, ridge).front());
}

ProbeBatch probes_for_base(const ProbeDesign& design, std::size_t d, const RngStream& rng,
                           std::size_t base_index, const BaseSweepOptions& options) {
    RngStream stream = options.per_base_probes ? rng.derive(base_index) : rng;
    return sample_probes(design, d, stream);
}

std::vector<Jet> estimate_jets_over_bases(const Pipeline& p, std::string_view tap,
                                          std::span<const Vector> bases,
                                          const ProbeDesign& design, const RidgePolicy& ridge,
                                          const RngStream& rng, const BaseSweepOptions& options) {
    if (bases.empty()) throw ValidationError("estimate_jets_over_bases: no base points");
    const std::size_t d = p.input_dim();
    std::optional<ProbeBatch> shared;
    if (!options.per_base_probes) shared = probes_for_base(design, d, rng, 0, options);

    auto one = [&](std::size_t s) {
        return with_base_context(s, [&] {
            if (shared) return estimate_jet(p, tap, bases[s], *shared, ridge);
            const ProbeBatch batch = probes_for_base(design, d, rng, s, options);
            return estimate_jet(p, tap, bases[s], batch, ridge);
        });
    };

    std::vector<Jet> jets;
    jets.reserve(bases.size());
    if (!options.parallel) {
        for (std::size_t s = 0; s < bases.size(); ++s) jets.push_back(one(s));
        return jets;
    }
    // Strided workers; slot s is written only by worker s % workers.
    const std::size_t workers =
        std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, bases.size());
    std::vector<std::optional<Jet>> slots(bases.size());
    std::vector<std::future<void>> pending;
    for (std::size_t w = 0; w < workers; ++w) {
        pending.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t s = w; s < bases.size(); s += workers) slots[s] = one(s);
        }));
    }
    for (auto& f : pending) f.get();
    for (auto& slot : slots) jets.push_back(std::move(*slot));
    return jets;
}

}  // namespace mojet
