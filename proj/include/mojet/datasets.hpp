#pragma once

// Synthetic data generators and the digits CSV loader.
//
// Every generator draws from RngStream(seed, StreamId::kData) in a fixed
// order, so a (seed, sizes) pair always produces the same data.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mojet/matrix.hpp"
#include "mojet/pipeline.hpp"
#include "mojet/rng.hpp"
#include "mojet/training.hpp"

namespace mojet {

struct LinregData {
    Dataset train;
    Dataset test;
    Vector beta_star;
};

// x ~ N(0, I_d), β* ~ N(0, I_d), y = xᵀβ* + σ·ε.
// Draw order: β*, train rows (x then ε per row), test rows.
LinregData gen_linreg(std::uint64_t seed, std::size_t n_train = 1000, std::size_t n_test = 200,
                      std::size_t d = 10, double noise_sigma = 0.1);

struct LatentRegressionParams {
    std::size_t d = 8;
    std::size_t k = 3;
    std::size_t n_train = 1000;
    std::size_t n_test = 200;
    double x_noise = 0.1;  // isotropic noise added to E·z
    double y_noise = 0.1;  // additive target noise
    // y = tanh(a·z) + quad_scale·(b·z)² + y_noise·ε. Entries beyond k are
    // ignored; missing entries are zero.
    Vector a{0.8, -0.6, 0.4};
    Vector b{0.3, 0.5, -0.4};
    double quad_scale = 0.5;
};

struct LatentRegressionData {
    Dataset train;
    Dataset test;
    Matrix embedding;  // E, d × k with N(0, 1/k) entries
};

// z ~ N(0, I_k), x = E·z + x_noise·ξ. Draw order: E, train rows, test rows;
// per row z, then ξ, then ε. With d = k, E = I (embedding_identity = true)
// and zero noise, y is an exact function of x.
LatentRegressionData gen_latent_regression(std::uint64_t seed, const LatentRegressionParams& params,
                                           bool embedding_identity = false);

struct MixtureParams {
    std::size_t d = 20;
    std::size_t k = 3;
    std::size_t classes = 3;
    std::size_t n_train = 600;
    std::size_t n_test = 300;
    double separation = 2.25;  // class c has latent mean separation·e_(c mod k)
    double latent_noise = 1.0;
    double x_noise = 0.5;
};

struct MixtureData {
    Dataset train;
    Dataset test;
    Matrix embedding;  // d × k, N(0, 1) entries
};

// Labels are balanced (row i gets class i mod C before shuffling).
// z* = separation·e_c + latent_noise·ξ, x = E·z* + x_noise·η.
MixtureData gen_mixture_classification(std::uint64_t seed, const MixtureParams& params);

struct DigitsData {
    Dataset train;  // standardized
    Dataset test;   // standardized with the train statistics
    Standardize standardizer;
    std::string source;  // file path or "synthetic"
};

inline constexpr std::size_t kDigitsFeatures = 64;
inline constexpr std::size_t kDigitsClasses = 10;
// Features whose train standard deviation is below this get scale 1.
inline constexpr double kStandardizeFloor = 1e-8;

// Raw rows (features unscaled) from a CSV with 64 numeric feature columns and
// an integer label column last. A non-numeric first line is a header.
// Throws DataError naming the line on any malformed content.
Dataset read_digits_csv(const std::filesystem::path& path);

// Class-stratified split: n_test = ceil(test_fraction·N), shared across
// classes by largest remainder (ties to the lower class). Rows are visited in
// a permutation drawn from RngStream(seed, kSplit).
std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

// Mean and population standard deviation of the training rows.
Standardize fit_standardize(const Matrix& x);
Matrix apply_standardize(const Standardize& s, const Matrix& x);

DigitsData load_digits(const std::filesystem::path& path, std::uint64_t seed,
                       double test_fraction = 0.2);

// 8×8 seven-segment style glyphs with random shifts, stroke intensity and
// pixel noise, intensities clipped to [0, 16]. Classes are balanced.
Dataset synthetic_digits(std::uint64_t seed, std::size_t n);
DigitsData synthetic_digits_split(std::uint64_t seed, std::size_t n, double test_fraction = 0.2);

// S distinct rows of x drawn without replacement via RngStream(seed, kBases).
std::vector<Vector> choose_bases(const Matrix& x, std::size_t s, std::uint64_t seed);

}  // namespace mojet
