#pragma once

// Modular supervised pipelines x -> z_1 -> ... -> z_K with named taps.
//
// A pipeline is an ordered list of modules. A tap names the output of one
// module (0-based index); evaluating the pipeline returns the final output
// together with one record per declared tap. Every call to evaluate()
// increments an atomic forward-pass counter used for cost accounting.

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mojet/matrix.hpp"

namespace mojet {

struct Linear {
    Matrix weights;  // d_out × d_in
    std::optional<Vector> bias;
};

// (x − mean) / scale, element-wise. Scale entries must be positive.
struct Standardize {
    Vector mean;
    Vector scale;
};

// components·(x − mean); components rows are orthonormal.
struct PcaProject {
    Matrix components;  // k × d
    Vector mean;
};

enum class ActivationFn { kRelu, kTanh };

struct Activation {
    ActivationFn fn = ActivationFn::kRelu;
    std::size_t dim = 0;
};

// Emits logits W·x + b (no softmax).
struct LogisticHead {
    Matrix weights;  // C × d_in
    Vector bias;
};

struct Identity {
    std::size_t dim = 0;
};

using Module = std::variant<Linear, Standardize, PcaProject, Activation, LogisticHead, Identity>;

std::size_t input_dim(const Module& m);
std::size_t output_dim(const Module& m);
std::string_view kind_name(const Module& m);
// Checks the per-kind invariants (positive scales, orthonormal PCA rows,
// consistent bias lengths). Throws ValidationError.
void validate_module(const Module& m);
Vector apply(const Module& m, std::span<const double> x);

std::string_view activation_name(ActivationFn fn);
ActivationFn activation_from_name(std::string_view name);

struct Tap {
    std::string id;
    std::size_t module_index = 0;
};

struct TapRecord {
    std::string tap_id;
    Vector value;
};

struct Evaluation {
    Vector output;
    std::vector<TapRecord> taps;  // one per declared tap, in declaration order
};

// Copyable wrapper around an atomic counter.
class ForwardCounter {
public:
    ForwardCounter() = default;
    ForwardCounter(const ForwardCounter& o) : n_(o.load()) {}
    ForwardCounter& operator=(const ForwardCounter& o) {
        n_.store(o.load(), std::memory_order_relaxed);
        return *this;
    }
    void increment() noexcept { n_.fetch_add(1, std::memory_order_relaxed); }
    std::uint64_t load() const noexcept { return n_.load(std::memory_order_relaxed); }
    void reset() noexcept { n_.store(0, std::memory_order_relaxed); }

private:
    std::atomic<std::uint64_t> n_{0};
};

class Pipeline {
public:
    Pipeline() = default;
    explicit Pipeline(std::vector<Module> modules, std::vector<Tap> taps = {});

    const std::vector<Module>& modules() const noexcept { return modules_; }
    // Mutable access for trainers. Shapes must be preserved.
    std::vector<Module>& mutable_modules() noexcept { return modules_; }
    const std::vector<Tap>& taps() const noexcept { return taps_; }

    void add_tap(std::string id, std::size_t module_index);
    bool has_tap(std::string_view id) const noexcept;
    // Position of the tap in taps(); throws ValidationError if undeclared.
    std::size_t tap_position(std::string_view id) const;
    // Output dimension of the tapped module.
    std::size_t tap_dim(std::string_view id) const;

    std::size_t input_dim() const;
    std::size_t output_dim() const;

    // Runs every module on x. Throws ValidationError on a dimension mismatch
    // and NumericError naming the module whose output is not finite.
    Evaluation evaluate(std::span<const double> x) const;

    std::uint64_t read_counter() const noexcept { return counter_.load(); }
    void reset_counter() noexcept { counter_.reset(); }

    // Modules [0, last] with the taps that fall inside them.
    Pipeline truncated(std::size_t last) const;

    // Re-checks shape chaining and module invariants.
    void validate() const;

private:
    std::vector<Module> modules_;
    std::vector<Tap> taps_;
    mutable ForwardCounter counter_;
};

// f(x) = wᵀHx with a tap named "bottleneck" on z = Hx (module 0).
Pipeline compose_two_module_linear(const Matrix& h, std::span<const double> w);

// x ↦ linear·x + offset for pipelines without activations; nullopt otherwise.
struct AffineMap {
    Matrix linear;
    Vector offset;
};
std::optional<AffineMap> affine_map(const Pipeline& p);
std::optional<AffineMap> affine_map(const Module& m);

}  // namespace mojet
