#include "mojet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>

#include "mojet/errors.hpp"
#include "mojet/linalg.hpp"
#include "mojet/rng.hpp"

namespace mojet {

namespace {

constexpr double kDivergenceLoss = 1e6;
// Step sizes below initial * kMinStepRatio are treated as a stall.
constexpr double kMinStepRatio = 1e-12;

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// out = in·Wᵀ + b
Matrix affine_rows(const Matrix& in, const Matrix& w, const Vector* b) {
    Matrix out(in.rows(), w.rows());
    for (std::size_t i = 0; i < in.rows(); ++i) {
        const auto xi = in.row(i);
        for (std::size_t r = 0; r < w.rows(); ++r) {
            out(i, r) = dot(xi, w.row(r)) + (b ? (*b)[r] : 0.0);
        }
    }
    return out;
}

Matrix forward_module(const Module& m, const Matrix& in) {
    return std::visit(
        overloaded{
            [&](const Linear& l) { return affine_rows(in, l.weights, l.bias ? &*l.bias : nullptr); },
            [&](const LogisticHead& h) { return affine_rows(in, h.weights, &h.bias); },
            [&](const Activation& a) {
                Matrix out = in;
                for (double& v : out.data()) {
                    v = a.fn == ActivationFn::kRelu ? std::max(v, 0.0) : std::tanh(v);
                }
                return out;
            },
            [&](const Standardize& s) {
                Matrix out = in;
                for (std::size_t i = 0; i < out.rows(); ++i)
                    for (std::size_t j = 0; j < out.cols(); ++j)
                        out(i, j) = (out(i, j) - s.mean[j]) / s.scale[j];
                return out;
            },
            [&](const PcaProject& p) {
                Matrix centered = in;
                for (std::size_t i = 0; i < centered.rows(); ++i)
                    for (std::size_t j = 0; j < centered.cols(); ++j) centered(i, j) -= p.mean[j];
                return affine_rows(centered, p.components, nullptr);
            },
            [&](const Identity&) { return in; },
        },
        m);
}

std::size_t parameter_count(const Module& m) {
    if (const auto* l = std::get_if<Linear>(&m)) return l->weights.size() + (l->bias ? l->bias->size() : 0);
    if (const auto* h = std::get_if<LogisticHead>(&m)) return h->weights.size() + h->bias.size();
    return 0;
}

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    if (idx.empty()) return x;
    Matrix out(idx.size(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = x.row(idx[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

// Mean loss and dLoss/dOutput for the selected rows.
double output_loss(const Matrix& out, const Dataset& data, std::span<const std::size_t> idx, Loss loss,
                   Matrix* grad) {
    const std::size_t n = out.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad) *grad = Matrix(n, out.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = idx.empty() ? i : idx[i];
        if (loss == Loss::kMse) {
            const double e = out(i, 0) - data.y[row];
            total += e * e;
            if (grad) (*grad)(i, 0) = 2.0 * e * inv_n;
        } else {
            const auto o = out.row(i);
            const double mx = *std::max_element(o.begin(), o.end());
            double z = 0.0;
            for (double v : o) z += std::exp(v - mx);
            const double log_z = mx + std::log(z);
            const auto label = static_cast<std::size_t>(data.labels[row]);
            total += log_z - o[label];
            if (grad) {
                for (std::size_t c = 0; c < o.size(); ++c) {
                    (*grad)(i, c) = (std::exp(o[c] - log_z) - (c == label ? 1.0 : 0.0)) * inv_n;
                }
            }
        }
    }
    return total * inv_n;
}

void check_loss_shape(const Pipeline& p, const Dataset& data, Loss loss) {
    if (p.input_dim() != data.dim()) {
        throw ValidationError("training: pipeline expects input dimension " +
                              std::to_string(p.input_dim()) + " but data has " +
                              std::to_string(data.dim()));
    }
    if (loss == Loss::kMse) {
        if (data.is_classification()) throw ValidationError("training: MSE needs regression data");
        if (p.output_dim() != 1) throw ValidationError("training: MSE needs a scalar output");
    } else {
        if (!data.is_classification()) throw ValidationError("training: cross-entropy needs labels");
        if (p.output_dim() != data.classes) {
            throw ValidationError("training: output width " + std::to_string(p.output_dim()) +
                                  " does not match " + std::to_string(data.classes) + " classes");
        }
    }
}

std::vector<Matrix> forward_all(const Pipeline& p, Matrix x) {
    std::vector<Matrix> acts;
    acts.reserve(p.modules().size() + 1);
    acts.push_back(std::move(x));
    for (std::size_t i = 0; i < p.modules().size(); ++i) {
        acts.push_back(forward_module(p.modules()[i], acts.back()));
        if (!acts.back().all_finite()) {
            throw NumericError("training: non-finite activations after module " + std::to_string(i) +
                               " (" + std::string(kind_name(p.modules()[i])) + ")");
        }
    }
    return acts;
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void apply_step(Vector& theta, const Vector& g, double step) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= step * g[i];
}

}  // namespace

Dataset Dataset::regression(Matrix x, Vector y, Split split) {
    Dataset d;
    d.x = std::move(x);
    d.y = std::move(y);
    d.split = split;
    d.validate();
    return d;
}

Dataset Dataset::classification(Matrix x, std::vector<int> labels, std::size_t classes, Split split) {
    Dataset d;
    d.x = std::move(x);
    d.labels = std::move(labels);
    d.classes = classes;
    d.split = split;
    d.validate();
    return d;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    Dataset d;
    d.x = gather_rows(x, idx);
    d.classes = classes;
    d.split = split;
    for (std::size_t i : idx) {
        if (i >= size()) throw ValidationError("dataset subset: row index out of range");
        if (is_classification()) {
            d.labels.push_back(labels[i]);
        } else {
            d.y.push_back(y[i]);
        }
    }
    return d;
}

void Dataset::validate() const {
    if (x.rows() == 0 || x.cols() == 0) throw ValidationError("dataset: empty design matrix");
    if (!x.all_finite()) throw ValidationError("dataset: non-finite feature values");
    if (is_classification()) {
        if (labels.size() != x.rows()) throw ValidationError("dataset: label count does not match rows");
        if (!y.empty()) throw ValidationError("dataset: classification data carries regression targets");
        for (int l : labels) {
            if (l < 0 || static_cast<std::size_t>(l) >= classes) {
                throw ValidationError("dataset: label " + std::to_string(l) + " outside {0.." +
                                      std::to_string(classes - 1) + "}");
            }
        }
    } else {
        if (y.size() != x.rows()) throw ValidationError("dataset: target count does not match rows");
        if (!labels.empty()) throw ValidationError("dataset: regression data carries labels");
        if (!all_finite(y)) throw ValidationError("dataset: non-finite targets");
    }
}

Vector get_parameters(const Pipeline& p) {
    Vector theta;
    for (const auto& m : p.modules()) {
        if (const auto* l = std::get_if<Linear>(&m)) {
            theta.insert(theta.end(), l->weights.data().begin(), l->weights.data().end());
            if (l->bias) theta.insert(theta.end(), l->bias->begin(), l->bias->end());
        } else if (const auto* h = std::get_if<LogisticHead>(&m)) {
            theta.insert(theta.end(), h->weights.data().begin(), h->weights.data().end());
            theta.insert(theta.end(), h->bias.begin(), h->bias.end());
        }
    }
    return theta;
}

void set_parameters(Pipeline& p, std::span<const double> theta) {
    std::size_t need = 0;
    for (const auto& m : p.modules()) need += parameter_count(m);
    if (theta.size() != need) {
        throw ValidationError("set_parameters: expected " + std::to_string(need) + " values, got " +
                              std::to_string(theta.size()));
    }
    std::size_t pos = 0;
    auto take = [&](std::span<double> dst) {
        std::copy(theta.begin() + static_cast<std::ptrdiff_t>(pos),
                  theta.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
        pos += dst.size();
    };
    for (auto& m : p.mutable_modules()) {
        if (auto* l = std::get_if<Linear>(&m)) {
            take(l->weights.data());
            if (l->bias) take(*l->bias);
        } else if (auto* h = std::get_if<LogisticHead>(&m)) {
            take(h->weights.data());
            take(h->bias);
        }
    }
}

LossGradient loss_and_gradient(const Pipeline& p, const Dataset& data, Loss loss,
                               std::span<const std::size_t> idx) {
    check_loss_shape(p, data, loss);
    const auto acts = forward_all(p, gather_rows(data.x, idx));
    LossGradient out;
    Matrix g;
    out.loss = output_loss(acts.back(), data, idx, loss, &g);

    // Gradients are produced back to front; offsets locate each module's slot.
    const auto& mods = p.modules();
    std::vector<std::size_t> offset(mods.size() + 1, 0);
    for (std::size_t i = 0; i < mods.size(); ++i) offset[i + 1] = offset[i] + parameter_count(mods[i]);
    out.gradient.assign(offset.back(), 0.0);

    for (std::size_t i = mods.size(); i-- > 0;) {
        const Matrix& in = acts[i];
        const Matrix& result = acts[i + 1];
        const bool need_input_grad = i > 0;
        auto affine_back = [&](const Matrix& w, bool has_bias) {
            const Matrix gw = transpose_times(g, in);
            std::copy(gw.data().begin(), gw.data().end(),
                      out.gradient.begin() + static_cast<std::ptrdiff_t>(offset[i]));
            if (has_bias) {
                const std::size_t b0 = offset[i] + gw.size();
                for (std::size_t n = 0; n < g.rows(); ++n)
                    for (std::size_t r = 0; r < g.cols(); ++r) out.gradient[b0 + r] += g(n, r);
            }
            if (need_input_grad) g = g * w;
        };
        std::visit(overloaded{
                       [&](const Linear& l) { affine_back(l.weights, l.bias.has_value()); },
                       [&](const LogisticHead& h) { affine_back(h.weights, true); },
                       [&](const Activation& a) {
                           for (std::size_t k = 0; k < g.size(); ++k) {
                               if (a.fn == ActivationFn::kRelu) {
                                   if (!(in.data()[k] > 0.0)) g.data()[k] = 0.0;
                               } else {
                                   const double t = result.data()[k];
                                   g.data()[k] *= 1.0 - t * t;
                               }
                           }
                       },
                       [&](const Standardize& s) {
                           for (std::size_t n = 0; n < g.rows(); ++n)
                               for (std::size_t j = 0; j < g.cols(); ++j) g(n, j) /= s.scale[j];
                       },
                       [&](const PcaProject& pc) {
                           if (need_input_grad) g = g * pc.components;
                       },
                       [&](const Identity&) {},
                   },
                   mods[i]);
    }
    return out;
}

double evaluate_loss(const Pipeline& p, const Dataset& data, Loss loss) {
    check_loss_shape(p, data, loss);
    const auto acts = forward_all(p, data.x);
    return output_loss(acts.back(), data, {}, loss, nullptr);
}

Matrix predict(const Pipeline& p, const Matrix& x) {
    if (x.cols() != p.input_dim()) throw ValidationError("predict: input dimension mismatch");
    Matrix cur = x;
    for (const auto& m : p.modules()) cur = forward_module(m, cur);
    return cur;
}

double mse(const Pipeline& p, const Dataset& data) {
    if (data.is_classification()) throw ValidationError("mse: classification data");
    const Matrix out = predict(p, data.x);
    if (out.cols() != 1) throw ValidationError("mse: pipeline output is not scalar");
    double s = 0.0;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const double e = out(i, 0) - data.y[i];
        s += e * e;
    }
    return s / static_cast<double>(out.rows());
}

double classification_error(const Pipeline& p, const Dataset& data) {
    if (!data.is_classification()) throw ValidationError("classification_error: regression data");
    const Matrix out = predict(p, data.x);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const auto o = out.row(i);
        const auto pred = static_cast<int>(std::max_element(o.begin(), o.end()) - o.begin());
        if (pred != data.labels[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(out.rows());
}

// 1 for weight entries, 0 for biases, in get_parameters() layout.
Vector weight_mask(const Pipeline& p) {
    Vector mask;
    auto add = [&](std::size_t weights, std::size_t biases) {
        mask.insert(mask.end(), weights, 1.0);
        mask.insert(mask.end(), biases, 0.0);
    };
    for (const auto& m : p.modules()) {
        if (const auto* l = std::get_if<Linear>(&m)) {
            add(l->weights.size(), l->bias ? l->bias->size() : 0);
        } else if (const auto* h = std::get_if<LogisticHead>(&m)) {
            add(h->weights.size(), h->bias.size());
        }
    }
    return mask;
}

TrainResult train_pipeline(Pipeline p, const Dataset& data, Loss loss, const TrainConfig& config) {
    if (config.epochs == 0) throw ValidationError("training: epochs must be positive");
    if (!(config.l2 >= 0.0)) throw ValidationError("training: l2 must be >= 0");
    if (!(config.step_size > 0.0)) throw ValidationError("training: step_size must be positive");
    if (!(config.grad_tol > 0.0)) throw ValidationError("training: grad_tol must be positive");
    data.validate();
    check_loss_shape(p, data, loss);

    TrainResult res;
    Vector theta = get_parameters(p);
    const std::size_t n = data.size();
    const bool full_batch = config.batch_size == 0 || config.batch_size >= n;
    const double min_step = config.step_size * kMinStepRatio;
    double step = config.step_size;

    const Vector mask = weight_mask(p);
    auto penalized = [&](LossGradient lg, const Vector& th) {
        if (config.l2 == 0.0) return lg;
        for (std::size_t i = 0; i < th.size(); ++i) {
            lg.loss += 0.5 * config.l2 * mask[i] * th[i] * th[i];
            if (!lg.gradient.empty()) lg.gradient[i] += config.l2 * mask[i] * th[i];
        }
        return lg;
    };

    LossGradient cur = penalized(loss_and_gradient(p, data, loss), theta);
    if (!(cur.loss <= kDivergenceLoss)) {
        throw NumericError("training: initial loss " + std::to_string(cur.loss) +
                           " exceeds the divergence limit; check inputs and initialization");
    }
    res.log.push_back({0, cur.loss, step});
    RngStream shuffle(config.seed, StreamId::kShuffle);

    for (std::size_t epoch = 1; epoch <= config.epochs && step >= min_step; ++epoch) {
        if (full_batch && inf_norm(cur.gradient) <= config.grad_tol) break;
        Vector trial = theta;
        if (full_batch) {
            apply_step(trial, cur.gradient, step);
        } else {
            const auto order = permutation(shuffle, n);
            for (std::size_t b = 0; b < n; b += config.batch_size) {
                const std::size_t e = std::min(n, b + config.batch_size);
                const std::span<const std::size_t> idx(order.data() + b, e - b);
                set_parameters(p, trial);
                apply_step(trial, penalized(loss_and_gradient(p, data, loss, idx), trial).gradient, step);
            }
        }
        set_parameters(p, trial);
        LossGradient next;
        bool ok = true;
        try {
            next = penalized(full_batch ? loss_and_gradient(p, data, loss)
                                        : LossGradient{evaluate_loss(p, data, loss), {}},
                             trial);
        } catch (const NumericError&) {
            ok = false;  // overflow in the trial step counts as an increase
        }
        if (ok && std::isfinite(next.loss) && next.loss <= cur.loss) {
            theta = std::move(trial);
            cur = std::move(next);
        } else {
            set_parameters(p, theta);
            step *= 0.5;
        }
        res.log.push_back({epoch, cur.loss, step});
    }

    set_parameters(p, theta);
    const LossGradient fin = penalized(loss_and_gradient(p, data, loss), theta);
    res.final_loss = fin.loss;
    res.grad_inf_norm = inf_norm(fin.gradient);
    res.converged = res.grad_inf_norm <= config.grad_tol;
    res.pipeline = std::move(p);
    return res;
}

Vector fit_ols(const Dataset& data) {
    data.validate();
    if (data.is_classification()) throw ValidationError("fit_ols: needs regression data");
    if (data.size() < data.dim()) {
        throw ValidationError("fit_ols: need N >= d (N = " + std::to_string(data.size()) +
                              ", d = " + std::to_string(data.dim()) + ")");
    }
    return least_squares(data.x, Matrix::column_vector(data.y)).column(0);
}

PcaFit fit_pca(const Dataset& data, std::size_t k) {
    data.validate();
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    if (k == 0 || k > d) throw ValidationError("fit_pca: k must lie in [1, d]");
    if (n < 2) throw ValidationError("fit_pca: need at least two rows");

    Vector mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += data.x(i, j);
    for (double& m : mean) m /= static_cast<double>(n);
    Matrix centered = data.x;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) -= mean[j];

    const Svd dec = svd(centered);
    std::size_t rank = 0;
    if (dec.s.front() > 0.0) {
        rank = static_cast<std::size_t>(std::count_if(dec.s.begin(), dec.s.end(), [&](double s) {
            return s > tolerances::kRank * dec.s.front();
        }));
    }
    if (k > rank) {
        throw ValidationError("fit_pca: k = " + std::to_string(k) +
                              " exceeds the numerical rank " + std::to_string(rank) +
                              " of the centered data");
    }

    PcaFit fit;
    fit.module.mean = mean;
    fit.module.components = dec.vt.row_block(0, k);
    for (std::size_t c = 0; c < k; ++c) {
        auto row = fit.module.components.row(c);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(row[j]) > std::abs(row[arg])) arg = j;
        if (row[arg] < 0.0)
            for (double& v : row) v = -v;
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t c = 0; c < k; ++c) fit.explained_variance.push_back(dec.s[c] * dec.s[c] / denom);
    for (double s : dec.s) fit.total_variance += s * s / denom;
    return fit;
}

TrainResult fit_logistic(const Dataset& data, const TrainConfig& config) {
    data.validate();
    if (!data.is_classification()) throw ValidationError("fit_logistic: needs class labels");
    std::vector<int> seen(data.labels);
    std::sort(seen.begin(), seen.end());
    if (std::unique(seen.begin(), seen.end()) - seen.begin() < 2) {
        throw ValidationError("fit_logistic: training data contains a single class");
    }
    LogisticHead head{Matrix(data.classes, data.dim()), Vector(data.classes, 0.0)};
    return train_pipeline(Pipeline({head}), data, Loss::kCrossEntropy, config);
}

LogisticHead fit_logistic_head(const Dataset& data, const TrainConfig& config) {
    auto res = fit_logistic(data, config);
    return std::get<LogisticHead>(res.pipeline.modules().front());
}

TrainResult train_mlp(const Dataset& data, const TrainConfig& config, std::vector<Module> prefix,
                      std::vector<Tap> prefix_taps) {
    data.validate();
    if (config.layers.empty()) throw ValidationError("train_mlp: no layers configured");
    const std::size_t out_width = data.is_classification() ? data.classes : 1;
    if (config.layers.back().width != out_width) {
        throw ValidationError("train_mlp: last layer width must be " + std::to_string(out_width));
    }
    std::size_t prev = prefix.empty() ? data.dim() : output_dim(prefix.back());
    if (!prefix.empty() && input_dim(prefix.front()) != data.dim()) {
        throw ValidationError("train_mlp: prefix input dimension does not match data");
    }

    RngStream rng(config.seed, StreamId::kInit);
    std::vector<Module> mods = std::move(prefix);
    std::vector<Tap> taps = std::move(prefix_taps);
    for (const auto& spec : config.layers) {
        if (spec.width == 0) throw ValidationError("train_mlp: layer width must be positive");
        Matrix w = gaussian_matrix(rng, spec.width, prev);
        w *= 1.0 / std::sqrt(static_cast<double>(prev));
        Linear lin{std::move(w), std::nullopt};
        if (spec.bias) lin.bias = Vector(spec.width, 0.0);
        mods.emplace_back(std::move(lin));
        if (spec.activation) mods.emplace_back(Activation{*spec.activation, spec.width});
        if (!spec.tap.empty()) taps.push_back(Tap{spec.tap, mods.size() - 1});
        prev = spec.width;
    }
    const Loss loss = data.is_classification() ? Loss::kCrossEntropy : Loss::kMse;
    return train_pipeline(Pipeline(std::move(mods), std::move(taps)), data, loss, config);
}

}  // namespace mojet
