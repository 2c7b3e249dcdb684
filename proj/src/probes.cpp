#include "mojet/probes.hpp"

#include <cmath>
#include <string>

#include "mojet/errors.hpp"
#include "mojet/linalg.hpp"

namespace mojet {

namespace {

constexpr double kBasisOrthonormalTol = 1e-8;

void require_sigma(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("probe design: sigma must be positive and finite, got " +
                              std::to_string(sigma));
    }
}

}  // namespace

ProbeDesign ProbeDesign::isotropic(double sigma, std::size_t count) {
    return ProbeDesign{Isotropic{sigma}, count};
}

ProbeDesign ProbeDesign::aligned(Matrix basis, double sigma, std::size_t count) {
    return ProbeDesign{SubspaceAligned{std::move(basis), sigma}, count};
}

ProbeDesign ProbeDesign::explicit_basis(Matrix deltas) {
    const std::size_t j = deltas.rows();
    return ProbeDesign{ExplicitBasis{std::move(deltas)}, j};
}

ProbeDesign ProbeDesign::with_sigma(double sigma) const {
    ProbeDesign out = *this;
    if (auto* iso = std::get_if<Isotropic>(&out.kind)) iso->sigma = sigma;
    if (auto* al = std::get_if<SubspaceAligned>(&out.kind)) al->sigma = sigma;
    return out;
}

ProbeDesign ProbeDesign::with_count(std::size_t n) const {
    ProbeDesign out = *this;
    out.count = n;
    return out;
}

void validate(const ProbeDesign& design) {
    if (design.count == 0) throw ValidationError("probe design: J must be at least 1");
    if (const auto* iso = std::get_if<Isotropic>(&design.kind)) {
        require_sigma(iso->sigma);
    } else if (const auto* al = std::get_if<SubspaceAligned>(&design.kind)) {
        require_sigma(al->sigma);
        if (al->basis.empty()) throw ValidationError("probe design: empty aligned basis");
        const Matrix gram = al->basis * al->basis.transpose();
        if (max_abs(gram - Matrix::identity(gram.rows())) > kBasisOrthonormalTol) {
            throw ValidationError("probe design: aligned basis rows are not orthonormal");
        }
    } else {
        const auto& ex = std::get<ExplicitBasis>(design.kind);
        if (ex.deltas.empty()) throw ValidationError("probe design: no explicit probes");
        if (!ex.deltas.all_finite()) throw ValidationError("probe design: non-finite probe");
        if (ex.deltas.rows() != design.count) {
            throw ValidationError("probe design: J does not match the explicit probe count");
        }
    }
}

ProbeBatch sample_probes(const ProbeDesign& design, std::size_t d, RngStream& rng) {
    validate(design);
    if (d == 0) throw ValidationError("sample_probes: input dimension must be positive");
    const std::size_t j = design.count;
    Matrix delta(j, d);

    if (const auto* iso = std::get_if<Isotropic>(&design.kind)) {
        for (double& v : delta.data()) v = iso->sigma * rng.normal();
    } else if (const auto* al = std::get_if<SubspaceAligned>(&design.kind)) {
        if (al->basis.cols() != d) {
            throw ValidationError("sample_probes: aligned basis has " +
                                  std::to_string(al->basis.cols()) + " columns, input has " +
                                  std::to_string(d));
        }
        const std::size_t k = al->basis.rows();
        for (std::size_t r = 0; r < j; ++r) {
            auto row = delta.row(r);
            for (std::size_t i = 0; i < k; ++i) {
                const double c = rng.normal();
                auto b = al->basis.row(i);
                for (std::size_t col = 0; col < d; ++col) row[col] += c * b[col];
            }
            // Scale last so that σ and 2σ give exactly Δ and 2Δ.
            for (double& v : row) v *= al->sigma;
        }
    } else {
        const auto& ex = std::get<ExplicitBasis>(design.kind);
        if (ex.deltas.cols() != d) {
            throw ValidationError("sample_probes: explicit probes have " +
                                  std::to_string(ex.deltas.cols()) + " columns, input has " +
                                  std::to_string(d));
        }
        delta = ex.deltas;
    }

    for (std::size_t r = 0; r < j; ++r) {
        if (norm2(delta.row(r)) == 0.0) {
            throw ValidationError("sample_probes: probe " + std::to_string(r) + " is zero");
        }
    }
    return ProbeBatch{std::move(delta), design};
}

bool check_full_column_rank(const ProbeBatch& batch, double tol_rel) {
    const Matrix& delta = batch.delta;
    if (delta.rows() < delta.cols()) return false;
    const Vector s = singular_values(delta);
    return s.back() > tol_rel * s.front();
}

}  // namespace mojet
