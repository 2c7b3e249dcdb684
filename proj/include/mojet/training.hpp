#pragma once

// Desk-scale model fitting: OLS, PCA, multinomial logistic regression and
// small MLPs trained by plain gradient descent.
//
// The optimizer is deterministic. Each epoch takes one step per batch
// (full batch when batch_size is 0 or >= N). After every epoch the full
// training loss is recomputed; if it went up, the epoch is undone and the
// step size halved. The recorded loss curve is therefore nonincreasing.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mojet/matrix.hpp"
#include "mojet/pipeline.hpp"

namespace mojet {

enum class Split { kTrain, kTest };

struct Dataset {
    Matrix x;                 // N × d
    Vector y;                 // regression targets (empty for classification)
    std::vector<int> labels;  // class labels (empty for regression)
    std::size_t classes = 0;
    Split split = Split::kTrain;

    static Dataset regression(Matrix x, Vector y, Split split = Split::kTrain);
    static Dataset classification(Matrix x, std::vector<int> labels, std::size_t classes,
                                  Split split = Split::kTrain);

    bool is_classification() const noexcept { return classes > 0; }
    std::size_t size() const noexcept { return x.rows(); }
    std::size_t dim() const noexcept { return x.cols(); }
    // Rows listed in idx, in that order.
    Dataset subset(std::span<const std::size_t> idx) const;
    // Throws ValidationError on inconsistent sizes, labels out of range or
    // non-finite entries.
    void validate() const;
};

enum class Loss { kMse, kCrossEntropy };

struct LayerSpec {
    std::size_t width = 0;
    std::optional<ActivationFn> activation;  // applied after the linear map
    bool bias = true;
    std::string tap;  // tap on the layer output (post-activation); empty = none
};

struct TrainConfig {
    std::size_t epochs = 500;
    double step_size = 0.1;
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
    double grad_tol = 1e-4;      // ∞-norm stopping rule (full batch only)
    double l2 = 0.0;             // adds (l2/2)·‖W‖² over weights (not biases)
    // Hidden and output layers for train_mlp. The last layer's width must be
    // 1 (regression) or the class count (classification).
    std::vector<LayerSpec> layers;
};

struct TrainLogEntry {
    std::size_t epoch = 0;
    double loss = 0.0;
    double step_size = 0.0;
};

struct TrainResult {
    Pipeline pipeline;
    std::vector<TrainLogEntry> log;
    double final_loss = 0.0;
    double grad_inf_norm = 0.0;  // at the returned parameters (full data)
    bool converged = false;      // grad_inf_norm <= grad_tol
};

// Trainable parameters of Linear and LogisticHead modules, flattened in
// module order (weights row-major, then bias).
Vector get_parameters(const Pipeline& p);
void set_parameters(Pipeline& p, std::span<const double> theta);

struct LossGradient {
    double loss = 0.0;
    Vector gradient;  // same layout as get_parameters()
};

// Mean loss over the rows of `data` (all rows when idx is empty) and its
// analytic gradient by backpropagation.
LossGradient loss_and_gradient(const Pipeline& p, const Dataset& data, Loss loss,
                               std::span<const std::size_t> idx = {});
double evaluate_loss(const Pipeline& p, const Dataset& data, Loss loss);

// Forward pass over every row without touching the pipeline's pass counter.
Matrix predict(const Pipeline& p, const Matrix& x);
double mse(const Pipeline& p, const Dataset& data);
double classification_error(const Pipeline& p, const Dataset& data);

// Trains the Linear / LogisticHead parameters of p in place; other modules
// are frozen. The objective is the mean loss plus the optional l2 penalty.
// Throws NumericError when the loss exceeds 1e6.
TrainResult train_pipeline(Pipeline p, const Dataset& data, Loss loss, const TrainConfig& config);

// β̂ = argmin ‖Xβ − y‖² without intercept.
Vector fit_ols(const Dataset& data);

struct PcaFit {
    PcaProject module;
    Vector explained_variance;  // per retained component, nonincreasing
    double total_variance = 0.0;
};

// Top-k right singular vectors of the centered data, largest-magnitude entry
// of each made positive. Throws ValidationError when k exceeds the numerical
// rank of the centered data.
PcaFit fit_pca(const Dataset& data, std::size_t k);

// Zero-initialized multinomial logistic regression on the rows of data.x.
TrainResult fit_logistic(const Dataset& data, const TrainConfig& config);
LogisticHead fit_logistic_head(const Dataset& data, const TrainConfig& config);

// Gaussian init with standard deviation 1/√fan_in (rng stream kInit), biases
// zero, then train_pipeline with MSE or cross-entropy depending on the data.
// `prefix` modules (frozen) are placed in front of the trained layers.
TrainResult train_mlp(const Dataset& data, const TrainConfig& config,
                      std::vector<Module> prefix = {}, std::vector<Tap> prefix_taps = {});

}  // namespace mojet
