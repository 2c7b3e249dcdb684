#include "mojet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mojet/errors.hpp"

namespace mojet {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kOrthonormalTol = 1e-8;

std::string dims(std::size_t a, std::size_t b) {
    return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace

std::size_t input_dim(const Module& m) {
    return std::visit(Overloaded{
                          [](const Linear& l) { return l.weights.cols(); },
                          [](const Standardize& s) { return s.mean.size(); },
                          [](const PcaProject& p) { return p.components.cols(); },
                          [](const Activation& a) { return a.dim; },
                          [](const LogisticHead& h) { return h.weights.cols(); },
                          [](const Identity& i) { return i.dim; },
                      },
                      m);
}

std::size_t output_dim(const Module& m) {
    return std::visit(Overloaded{
                          [](const Linear& l) { return l.weights.rows(); },
                          [](const Standardize& s) { return s.mean.size(); },
                          [](const PcaProject& p) { return p.components.rows(); },
                          [](const Activation& a) { return a.dim; },
                          [](const LogisticHead& h) { return h.weights.rows(); },
                          [](const Identity& i) { return i.dim; },
                      },
                      m);
}

std::string_view kind_name(const Module& m) {
    return std::visit(Overloaded{
                          [](const Linear&) { return std::string_view("linear"); },
                          [](const Standardize&) { return std::string_view("standardize"); },
                          [](const PcaProject&) { return std::string_view("pca_project"); },
                          [](const Activation&) { return std::string_view("activation"); },
                          [](const LogisticHead&) { return std::string_view("logistic_head"); },
                          [](const Identity&) { return std::string_view("identity"); },
                      },
                      m);
}

std::string_view activation_name(ActivationFn fn) {
    return fn == ActivationFn::kRelu ? "relu" : "tanh";
}

ActivationFn activation_from_name(std::string_view name) {
    if (name == "relu") return ActivationFn::kRelu;
    if (name == "tanh") return ActivationFn::kTanh;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

void validate_module(const Module& m) {
    std::visit(
        Overloaded{
            [](const Linear& l) {
                if (l.weights.empty()) throw ValidationError("linear: empty weights");
                if (!l.weights.all_finite()) throw ValidationError("linear: non-finite weights");
                if (l.bias && l.bias->size() != l.weights.rows()) {
                    throw ValidationError("linear: bias length " +
                                          dims(l.bias->size(), l.weights.rows()));
                }
            },
            [](const Standardize& s) {
                if (s.mean.empty() || s.mean.size() != s.scale.size()) {
                    throw ValidationError("standardize: mean/scale length mismatch");
                }
                for (double v : s.scale)
                    if (!(v > 0.0) || !std::isfinite(v)) {
                        throw ValidationError("standardize: scale entries must be positive");
                    }
            },
            [](const PcaProject& p) {
                if (p.components.empty() || p.mean.size() != p.components.cols()) {
                    throw ValidationError("pca_project: components/mean shape mismatch");
                }
                const Matrix gram = p.components * p.components.transpose();
                if (max_abs(gram - Matrix::identity(gram.rows())) > kOrthonormalTol) {
                    throw ValidationError("pca_project: component rows are not orthonormal");
                }
            },
            [](const Activation& a) {
                if (a.dim == 0) throw ValidationError("activation: zero dimension");
            },
            [](const LogisticHead& h) {
                if (h.weights.empty() || h.bias.size() != h.weights.rows()) {
                    throw ValidationError("logistic_head: weights/bias shape mismatch");
                }
            },
            [](const Identity& i) {
                if (i.dim == 0) throw ValidationError("identity: zero dimension");
            },
        },
        m);
}

Vector apply(const Module& m, std::span<const double> x) {
    if (x.size() != input_dim(m)) {
        throw ValidationError(std::string(kind_name(m)) + ": input dimension " +
                              dims(x.size(), input_dim(m)));
    }
    return std::visit(
        Overloaded{
            [&](const Linear& l) {
                Vector y = l.weights * x;
                if (l.bias)
                    for (std::size_t i = 0; i < y.size(); ++i) y[i] += (*l.bias)[i];
                return y;
            },
            [&](const Standardize& s) {
                Vector y(x.size());
                for (std::size_t i = 0; i < y.size(); ++i) y[i] = (x[i] - s.mean[i]) / s.scale[i];
                return y;
            },
            [&](const PcaProject& p) {
                Vector centered(x.size());
                for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - p.mean[i];
                return p.components * centered;
            },
            [&](const Activation& a) {
                Vector y(x.begin(), x.end());
                if (a.fn == ActivationFn::kRelu) {
                    for (double& v : y) v = v > 0.0 ? v : 0.0;
                } else {
                    for (double& v : y) v = std::tanh(v);
                }
                return y;
            },
            [&](const LogisticHead& h) {
                Vector y = h.weights * x;
                for (std::size_t i = 0; i < y.size(); ++i) y[i] += h.bias[i];
                return y;
            },
            [&](const Identity&) { return Vector(x.begin(), x.end()); },
        },
        m);
}

Pipeline::Pipeline(std::vector<Module> modules, std::vector<Tap> taps)
    : modules_(std::move(modules)) {
    validate();
    for (auto& t : taps) add_tap(std::move(t.id), t.module_index);
}

void Pipeline::validate() const {
    if (modules_.empty()) throw ValidationError("pipeline: no modules");
    for (std::size_t i = 0; i < modules_.size(); ++i) {
        try {
            validate_module(modules_[i]);
        } catch (const ValidationError& e) {
            throw ValidationError("pipeline module " + std::to_string(i) + ": " + e.what());
        }
        if (i > 0 && mojet::input_dim(modules_[i]) != mojet::output_dim(modules_[i - 1])) {
            throw ValidationError("pipeline: module " + std::to_string(i) + " expects input " +
                                  std::to_string(mojet::input_dim(modules_[i])) + " but module " +
                                  std::to_string(i - 1) + " emits " +
                                  std::to_string(mojet::output_dim(modules_[i - 1])));
        }
    }
}

void Pipeline::add_tap(std::string id, std::size_t module_index) {
    if (module_index >= modules_.size()) {
        throw ValidationError("tap '" + id + "': module index " + std::to_string(module_index) +
                              " out of range");
    }
    if (has_tap(id)) throw ValidationError("tap '" + id + "' declared twice");
    taps_.push_back(Tap{std::move(id), module_index});
}

bool Pipeline::has_tap(std::string_view id) const noexcept {
    return std::any_of(taps_.begin(), taps_.end(), [&](const Tap& t) { return t.id == id; });
}

std::size_t Pipeline::tap_position(std::string_view id) const {
    for (std::size_t i = 0; i < taps_.size(); ++i)
        if (taps_[i].id == id) return i;
    throw ValidationError("tap '" + std::string(id) + "' is not declared on this pipeline");
}

std::size_t Pipeline::tap_dim(std::string_view id) const {
    return mojet::output_dim(modules_[taps_[tap_position(id)].module_index]);
}

std::size_t Pipeline::input_dim() const {
    if (modules_.empty()) throw ValidationError("pipeline: no modules");
    return mojet::input_dim(modules_.front());
}

std::size_t Pipeline::output_dim() const {
    if (modules_.empty()) throw ValidationError("pipeline: no modules");
    return mojet::output_dim(modules_.back());
}

Evaluation Pipeline::evaluate(std::span<const double> x) const {
    if (x.size() != input_dim()) {
        throw ValidationError("pipeline: input dimension " + dims(x.size(), input_dim()));
    }
    counter_.increment();
    Evaluation out;
    out.taps.resize(taps_.size());
    Vector z(x.begin(), x.end());
    for (std::size_t i = 0; i < modules_.size(); ++i) {
        z = mojet::apply(modules_[i], z);
        if (!all_finite(z)) {
            throw NumericError("pipeline: module " + std::to_string(i) + " (" +
                               std::string(kind_name(modules_[i])) + ") produced a non-finite value");
        }
        for (std::size_t t = 0; t < taps_.size(); ++t) {
            if (taps_[t].module_index == i) out.taps[t] = TapRecord{taps_[t].id, z};
        }
    }
    out.output = std::move(z);
    return out;
}

Pipeline Pipeline::truncated(std::size_t last) const {
    if (last >= modules_.size()) throw ValidationError("pipeline: truncation index out of range");
    std::vector<Module> mods(modules_.begin(),
                             modules_.begin() + static_cast<std::ptrdiff_t>(last + 1));
    std::vector<Tap> taps;
    for (const auto& t : taps_)
        if (t.module_index <= last) taps.push_back(t);
    return Pipeline(std::move(mods), std::move(taps));
}

Pipeline compose_two_module_linear(const Matrix& h, std::span<const double> w) {
    if (w.size() != h.rows()) {
        throw ValidationError("compose_two_module_linear: w length " + dims(w.size(), h.rows()));
    }
    return Pipeline({Linear{h, std::nullopt}, Linear{Matrix::row_vector(w), std::nullopt}},
                    {Tap{"bottleneck", 0}});
}

std::optional<AffineMap> affine_map(const Module& m) {
    return std::visit(
        Overloaded{
            [](const Linear& l) -> std::optional<AffineMap> {
                return AffineMap{l.weights, l.bias ? *l.bias : Vector(l.weights.rows(), 0.0)};
            },
            [](const Standardize& s) -> std::optional<AffineMap> {
                Vector inv(s.scale.size()), off(s.scale.size());
                for (std::size_t i = 0; i < inv.size(); ++i) {
                    inv[i] = 1.0 / s.scale[i];
                    off[i] = -s.mean[i] / s.scale[i];
                }
                return AffineMap{Matrix::diagonal(inv), off};
            },
            [](const PcaProject& p) -> std::optional<AffineMap> {
                Vector off = p.components * p.mean;
                for (double& v : off) v = -v;
                return AffineMap{p.components, off};
            },
            [](const Activation&) -> std::optional<AffineMap> { return std::nullopt; },
            [](const LogisticHead& h) -> std::optional<AffineMap> {
                return AffineMap{h.weights, h.bias};
            },
            [](const Identity& i) -> std::optional<AffineMap> {
                return AffineMap{Matrix::identity(i.dim), Vector(i.dim, 0.0)};
            },
        },
        m);
}

std::optional<AffineMap> affine_map(const Pipeline& p) {
    std::optional<AffineMap> acc;
    for (const auto& m : p.modules()) {
        auto next = affine_map(m);
        if (!next) return std::nullopt;
        if (!acc) {
            acc = std::move(next);
            continue;
        }
        // next ∘ acc: x ↦ L2(L1 x + b1) + b2.
        Vector off = next->linear * acc->offset;
        for (std::size_t i = 0; i < off.size(); ++i) off[i] += next->offset[i];
        acc = AffineMap{next->linear * acc->linear, std::move(off)};
    }
    return acc;
}

}  // namespace mojet
