#include "mojet/identifiability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mojet/errors.hpp"
#include "mojet/linalg.hpp"
#include "mojet/pipeline.hpp"

namespace mojet {

namespace {

bool has_full_row_rank(const Matrix& h) {
    if (h.rows() > h.cols()) return false;
    const Vector s = singular_values(h);
    return s.front() > 0.0 && s.back() > kFullRowRankTol * s.front();
}

}  // namespace

LinearFactorization LinearFactorization::make(Matrix h, Vector w) {
    if (h.empty()) throw ValidationError("factorization: empty H");
    if (h.rows() > h.cols()) {
        throw ValidationError("factorization: bottleneck width r = " + std::to_string(h.rows()) +
                              " exceeds input dimension d = " + std::to_string(h.cols()));
    }
    if (w.size() != h.rows()) throw ValidationError("factorization: w length does not match H rows");
    LinearFactorization f;
    f.full_row_rank = has_full_row_rank(h);
    f.h = std::move(h);
    f.w = std::move(w);
    return f;
}

double LinearFactorization::evaluate(std::span<const double> x) const { return dot(w, h * x); }

MirageMember make_mirage_member(const LinearFactorization& f, const Matrix& q) {
    if (q.rows() != f.h.rows() || q.cols() != f.h.rows()) {
        throw ValidationError("mirage member: Q must be r x r");
    }
    MirageMember m;
    m.q = q;
    m.h_q = q * f.h;
    // w_Q = Q⁻ᵀ w  ⇔  Qᵀ w_Q = w.
    m.w_q = solve(q.transpose(), Matrix::column_vector(f.w)).column(0);
    return m;
}

std::vector<MirageMember> mirage_family(const LinearFactorization& f, std::size_t n,
                                        RngStream& rng, double cond_max, double perturbation,
                                        std::size_t max_attempts_per_member) {
    if (n == 0) throw ValidationError("mirage_family: n must be at least 1");
    if (!(cond_max >= 1.0)) throw ValidationError("mirage_family: cond_max must be >= 1");
    if (!(perturbation > 0.0)) throw ValidationError("mirage_family: perturbation must be positive");
    const std::size_t r = f.h.rows();
    std::vector<MirageMember> out;
    out.reserve(n);
    while (out.size() < n) {
        bool accepted = false;
        for (std::size_t attempt = 0; attempt < max_attempts_per_member; ++attempt) {
            Matrix g = gaussian_matrix(rng, r, r);
            g *= perturbation / frobenius_norm(g);
            Matrix q = Matrix::identity(r) + g;
            if (condition_number(q) > cond_max) continue;
            out.push_back(make_mirage_member(f, q));
            accepted = true;
            break;
        }
        if (!accepted) {
            throw NumericError("mirage_family: no Q with cond <= " + std::to_string(cond_max) +
                               " found in " + std::to_string(max_attempts_per_member) + " draws");
        }
    }
    return out;
}

MirageVerification verify_mirage_family(const LinearFactorization& f,
                                        std::span<const MirageMember> members,
                                        const Matrix& inputs) {
    if (inputs.cols() != f.h.cols()) throw ValidationError("verify_mirage_family: input dimension");
    MirageVerification v;
    v.inputs = inputs.rows();
    Vector reference(inputs.rows());
    double ref_scale = 0.0;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        reference[i] = f.evaluate(inputs.row(i));
        ref_scale = std::max(ref_scale, std::abs(reference[i]));
    }
    if (ref_scale == 0.0) ref_scale = 1.0;
    const double h_norm = frobenius_norm(f.h);
    v.min_h_distance = members.empty() ? 0.0 : INFINITY;
    for (const auto& m : members) {
        MemberCheck c;
        for (std::size_t i = 0; i < inputs.rows(); ++i) {
            const double fq = dot(m.w_q, m.h_q * inputs.row(i));
            c.output_deviation = std::max(c.output_deviation, std::abs(fq - reference[i]) / ref_scale);
        }
        c.h_distance = frobenius_norm(m.h_q - f.h) / h_norm;
        c.q_distance = frobenius_norm(m.q - Matrix::identity(m.q.rows()));
        c.condition = condition_number(m.q);
        v.max_output_deviation = std::max(v.max_output_deviation, c.output_deviation);
        v.min_h_distance = std::min(v.min_h_distance, c.h_distance);
        v.members.push_back(c);
    }
    return v;
}

RecoveryReport recover_factorization(std::span<const Jet> jets,
                                     std::span<const std::pair<Vector, double>> outputs) {
    if (jets.empty()) throw ValidationError("recover_factorization: no jets");
    const Matrix& first = jets.front().jacobian;
    const std::size_t r = first.rows();
    const std::size_t d = first.cols();

    RecoveryReport rep;
    Matrix h(r, d);
    for (const auto& j : jets) {
        if (j.jacobian.rows() != r || j.jacobian.cols() != d || j.base_point.size() != d ||
            j.base_value.size() != r) {
            throw ValidationError("recover_factorization: jets have inconsistent shapes");
        }
        rep.jacobian_spread = std::max(rep.jacobian_spread, relative_frobenius_error(j.jacobian, first));
        h += j.jacobian;
    }
    if (rep.jacobian_spread > kJacobianSpreadTol) {
        throw NotLinearError("recover_factorization: jet Jacobians vary across bases (relative spread " +
                             std::to_string(rep.jacobian_spread) + "); the tapped map is not linear");
    }
    h *= 1.0 / static_cast<double>(jets.size());

    if (!has_full_row_rank(h)) {
        throw UnidentifiableError("recover_factorization: H does not have full row rank r = " +
                                  std::to_string(r));
    }

    // Base points must not lie in a proper affine subspace: [X | 1] full column rank.
    if (jets.size() < d + 1) {
        throw UnidentifiableError("recover_factorization: need at least d + 1 = " +
                                  std::to_string(d + 1) + " base points, got " +
                                  std::to_string(jets.size()));
    }
    Matrix affine(jets.size(), d + 1);
    for (std::size_t s = 0; s < jets.size(); ++s) {
        std::copy(jets[s].base_point.begin(), jets[s].base_point.end(), affine.row(s).begin());
        affine(s, d) = 1.0;
    }
    const Vector sv = singular_values(affine);
    if (!(sv.back() > kAffineSpanTol * sv.front())) {
        throw UnidentifiableError("recover_factorization: base points lie in a proper affine subspace");
    }

    for (const auto& j : jets) {
        const Vector hx = h * j.base_point;
        const double denom = std::max(1.0, norm2(j.base_value));
        rep.tap_residual = std::max(rep.tap_residual, norm2(j.base_value - hx) / denom);
    }

    if (outputs.size() < r) {
        throw UnidentifiableError("recover_factorization: need at least r = " + std::to_string(r) +
                                  " input/output pairs");
    }
    Matrix z(outputs.size(), r);
    Matrix f(outputs.size(), 1);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (outputs[i].first.size() != d) throw ValidationError("recover_factorization: output pair dimension");
        const Vector zi = h * outputs[i].first;
        std::copy(zi.begin(), zi.end(), z.row(i).begin());
        f(i, 0) = outputs[i].second;
    }
    Vector w;
    try {
        w = least_squares(z, f).column(0);
    } catch (const SingularSystemError&) {
        throw UnidentifiableError("recover_factorization: bottleneck values do not span R^r");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const double e = dot(w, z.row(i)) - f(i, 0);
        ss += e * e;
    }
    rep.output_residual = std::sqrt(ss / static_cast<double>(outputs.size()));
    rep.factorization = LinearFactorization::make(std::move(h), std::move(w));
    return rep;
}

double corollary_check(const Matrix& h, const ProbeBatch& batch, std::span<const double> x0) {
    if (batch.delta.cols() != h.cols()) throw ValidationError("corollary_check: probe dimension");
    if (!check_full_column_rank(batch, 1e-10)) {
        throw RankDeficiencyError("corollary_check: probe matrix lacks full column rank");
    }
    const Pipeline p = compose_two_module_linear(h, Vector(h.rows(), 1.0));
    const Jet jet = estimate_jet(p, "bottleneck", x0, batch, ZeroRidge{});
    return relative_frobenius_error(jet.jacobian, h);
}

double corollary_check(const Matrix& h, const ProbeBatch& batch) {
    return corollary_check(h, batch, Vector(h.cols(), 0.0));
}

}  // namespace mojet
