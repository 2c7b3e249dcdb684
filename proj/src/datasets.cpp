#include "mojet/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "mojet/errors.hpp"

namespace mojet {

namespace {

double coeff(const Vector& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; }

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

void check_sizes(std::size_t n_train, std::size_t n_test, std::size_t d) {
    if (n_train == 0 || n_test == 0 || d == 0) {
        throw ValidationError("generator: sizes must be positive");
    }
}

}  // namespace

LinregData gen_linreg(std::uint64_t seed, std::size_t n_train, std::size_t n_test, std::size_t d,
                      double noise_sigma) {
    check_sizes(n_train, n_test, d);
    if (!(noise_sigma >= 0.0)) throw ValidationError("gen_linreg: noise_sigma must be >= 0");
    RngStream rng(seed, StreamId::kData);
    LinregData out;
    out.beta_star = gaussian(rng, d);
    auto draw = [&](std::size_t n, Split split) {
        Matrix x(n, d);
        Vector y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.normal();
            y[i] = dot(x.row(i), out.beta_star) + noise_sigma * rng.normal();
        }
        return Dataset::regression(std::move(x), std::move(y), split);
    };
    out.train = draw(n_train, Split::kTrain);
    out.test = draw(n_test, Split::kTest);
    return out;
}

LatentRegressionData gen_latent_regression(std::uint64_t seed, const LatentRegressionParams& p,
                                           bool embedding_identity) {
    check_sizes(p.n_train, p.n_test, p.d);
    if (p.k == 0 || p.k > p.d) throw ValidationError("gen_latent_regression: need 1 <= k <= d");
    if (embedding_identity && p.k != p.d) {
        throw ValidationError("gen_latent_regression: identity embedding needs k = d");
    }
    if (!(p.x_noise >= 0.0 && p.y_noise >= 0.0)) {
        throw ValidationError("gen_latent_regression: noise levels must be >= 0");
    }
    RngStream rng(seed, StreamId::kData);
    LatentRegressionData out;
    if (embedding_identity) {
        out.embedding = Matrix::identity(p.d);
    } else {
        out.embedding = gaussian_matrix(rng, p.d, p.k);
        out.embedding *= 1.0 / std::sqrt(static_cast<double>(p.k));
    }
    auto draw = [&](std::size_t n, Split split) {
        Matrix x(n, p.d);
        Vector y(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vector z = gaussian(rng, p.k);
            const Vector ez = out.embedding * z;
            for (std::size_t j = 0; j < p.d; ++j) x(i, j) = ez[j] + p.x_noise * rng.normal();
            double az = 0.0;
            double bz = 0.0;
            for (std::size_t c = 0; c < p.k; ++c) {
                az += coeff(p.a, c) * z[c];
                bz += coeff(p.b, c) * z[c];
            }
            y[i] = std::tanh(az) + p.quad_scale * bz * bz + p.y_noise * rng.normal();
        }
        return Dataset::regression(std::move(x), std::move(y), split);
    };
    out.train = draw(p.n_train, Split::kTrain);
    out.test = draw(p.n_test, Split::kTest);
    return out;
}

MixtureData gen_mixture_classification(std::uint64_t seed, const MixtureParams& p) {
    check_sizes(p.n_train, p.n_test, p.d);
    if (p.k == 0 || p.k > p.d) throw ValidationError("gen_mixture_classification: need 1 <= k <= d");
    if (p.classes < 2) throw ValidationError("gen_mixture_classification: need at least 2 classes");
    if (!(p.separation >= 0.0 && p.latent_noise >= 0.0 && p.x_noise >= 0.0)) {
        throw ValidationError("gen_mixture_classification: separation and noise must be >= 0");
    }
    RngStream rng(seed, StreamId::kData);
    MixtureData out;
    out.embedding = gaussian_matrix(rng, p.d, p.k);
    auto draw = [&](std::size_t n, Split split) {
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % p.classes);
        const auto perm = permutation(rng, n);
        std::vector<int> shuffled(n);
        for (std::size_t i = 0; i < n; ++i) shuffled[i] = labels[perm[i]];
        Matrix x(n, p.d);
        for (std::size_t i = 0; i < n; ++i) {
            Vector z = gaussian(rng, p.k);
            for (double& v : z) v *= p.latent_noise;
            z[static_cast<std::size_t>(shuffled[i]) % p.k] += p.separation;
            const Vector ez = out.embedding * z;
            for (std::size_t j = 0; j < p.d; ++j) x(i, j) = ez[j] + p.x_noise * rng.normal();
        }
        return Dataset::classification(std::move(x), std::move(shuffled), p.classes, split);
    };
    out.train = draw(p.n_train, Split::kTrain);
    out.test = draw(p.n_test, Split::kTest);
    return out;
}

Dataset read_digits_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("digits: cannot open '" + path.string() + "'");
    std::vector<double> values;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        const std::string where = path.string() + ":" + std::to_string(line_no);
        double probe = 0.0;
        if (labels.empty() && values.empty() && !fields.empty() && !parse_number(fields[0], probe)) {
            continue;  // header
        }
        if (fields.size() != kDigitsFeatures + 1) {
            throw DataError("digits: " + where + ": expected " + std::to_string(kDigitsFeatures + 1) +
                            " columns, found " + std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < kDigitsFeatures; ++j) {
            double v = 0.0;
            if (!parse_number(fields[j], v)) {
                throw DataError("digits: " + where + ": column " + std::to_string(j + 1) +
                                " is not a finite number ('" + fields[j] + "')");
            }
            values.push_back(v);
        }
        double label = 0.0;
        if (!parse_number(fields.back(), label) || label != std::floor(label) || label < 0.0 ||
            label >= static_cast<double>(kDigitsClasses)) {
            throw DataError("digits: " + where + ": label '" + fields.back() +
                            "' is not an integer in {0..9}");
        }
        labels.push_back(static_cast<int>(label));
    }
    if (labels.empty()) throw DataError("digits: '" + path.string() + "' contains no data rows");
    const std::size_t n = labels.size();
    return Dataset::classification(Matrix(n, kDigitsFeatures, std::move(values)), std::move(labels),
                                   kDigitsClasses);
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
    if (!data.is_classification()) throw ValidationError("stratified_split: needs class labels");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError("stratified_split: test_fraction must lie in (0, 1)");
    }
    const std::size_t n = data.size();
    std::vector<std::size_t> counts(data.classes, 0);
    for (int l : data.labels) ++counts[static_cast<std::size_t>(l)];

    const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> quota(data.classes);
    std::vector<double> remainder(data.classes);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < data.classes; ++c) {
        const double exact = test_fraction * static_cast<double>(counts[c]);
        quota[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[c] = exact - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::vector<std::size_t> order(data.classes);
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
    for (std::size_t i = 0; assigned < n_test && i < order.size(); ++i) {
        if (quota[order[i]] < counts[order[i]]) {
            ++quota[order[i]];
            ++assigned;
        }
    }

    RngStream rng(seed, StreamId::kSplit);
    const auto perm = permutation(rng, n);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    std::vector<std::size_t> taken(data.classes, 0);
    for (std::size_t i : perm) {
        const auto c = static_cast<std::size_t>(data.labels[i]);
        if (taken[c] < quota[c]) {
            ++taken[c];
            test_idx.push_back(i);
        } else {
            train_idx.push_back(i);
        }
    }
    if (train_idx.empty() || test_idx.empty()) {
        throw ValidationError("stratified_split: a split would be empty (N = " + std::to_string(n) + ")");
    }
    Dataset train = data.subset(train_idx);
    Dataset test = data.subset(test_idx);
    train.split = Split::kTrain;
    test.split = Split::kTest;
    return {std::move(train), std::move(test)};
}

Standardize fit_standardize(const Matrix& x) {
    if (x.rows() == 0) throw ValidationError("fit_standardize: no rows");
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    Standardize s{Vector(d, 0.0), Vector(d, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(i, j);
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.scale[j] += (x(i, j) - s.mean[j]) * (x(i, j) - s.mean[j]);
    for (double& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (v < kStandardizeFloor) v = 1.0;
    }
    return s;
}

Matrix apply_standardize(const Standardize& s, const Matrix& x) {
    if (x.cols() != s.mean.size()) throw ValidationError("apply_standardize: dimension mismatch");
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = (out(i, j) - s.mean[j]) / s.scale[j];
    return out;
}

namespace {

DigitsData standardize_split(const Dataset& raw, double test_fraction, std::uint64_t seed,
                             std::string source) {
    auto [train, test] = stratified_split(raw, test_fraction, seed);
    DigitsData out;
    out.standardizer = fit_standardize(train.x);
    train.x = apply_standardize(out.standardizer, train.x);
    test.x = apply_standardize(out.standardizer, test.x);
    out.train = std::move(train);
    out.test = std::move(test);
    out.source = std::move(source);
    return out;
}

// Segment masks a..g (bit 0 = a).
constexpr unsigned kSegments[10] = {
    0b0111111,  // 0: abcdef
    0b0000110,  // 1: bc
    0b1011011,  // 2: abdeg
    0b1001111,  // 3: abcdg
    0b1100110,  // 4: bcfg
    0b1101101,  // 5: acdfg
    0b1111101,  // 6: acdefg
    0b0000111,  // 7: abc
    0b1111111,  // 8
    0b1101111,  // 9: abcdfg
};

}  // namespace

DigitsData load_digits(const std::filesystem::path& path, std::uint64_t seed, double test_fraction) {
    return standardize_split(read_digits_csv(path), test_fraction, seed, path.string());
}

Dataset synthetic_digits(std::uint64_t seed, std::size_t n) {
    if (n < kDigitsClasses) throw ValidationError("synthetic_digits: need at least one row per class");
    RngStream rng(seed, StreamId::kData);
    Matrix x(n, kDigitsFeatures);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto label = static_cast<int>(i % kDigitsClasses);
        labels[i] = label;
        const auto r0 = static_cast<int>(rng.uniform_index(2));      // rows r0..r0+6
        const auto c0 = 2 + static_cast<int>(rng.uniform_index(2));  // cols c0..c0+3
        const double ink = 16.0 * (0.6 + 0.4 * rng.uniform());
        auto put = [&](int r, int c) { x(i, static_cast<std::size_t>((r0 + r) * 8 + c0 + c)) = ink; };
        const unsigned mask = kSegments[label];
        for (int t = 0; t < 4; ++t) {
            if (mask & 1u) put(0, t);
            if (mask & 64u) put(3, t);
            if (mask & 8u) put(6, t);
        }
        for (int t = 0; t < 4; ++t) {
            if (mask & 32u) put(t, 0);
            if (mask & 2u) put(t, 3);
            if (mask & 16u) put(3 + t, 0);
            if (mask & 4u) put(3 + t, 3);
        }
        // Real digits are block-averaged from 32x32 scans, so strokes are soft.
        Matrix glyph(8, 8);
        for (std::size_t j = 0; j < kDigitsFeatures; ++j) glyph(j / 8, j % 8) = x(i, j);
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                double acc = 0.0;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = r + dr, cc = c + dc;
                        if (rr < 0 || rr > 7 || cc < 0 || cc > 7) continue;
                        acc += (dr == 0 ? 2.0 : 1.0) * (dc == 0 ? 2.0 : 1.0) * glyph(rr, cc);
                    }
                }
                x(i, static_cast<std::size_t>(r * 8 + c)) = std::min(16.0, acc / 8.0);
            }
        }
        // Stroke pixels jitter in intensity; the background stays mostly blank
        // with occasional faint specks, as in scanned digits.
        for (std::size_t j = 0; j < kDigitsFeatures; ++j) {
            double v = x(i, j);
            if (v > 0.0) {
                v += 2.0 * rng.normal();
            } else if (rng.uniform() < 0.1) {
                v = 6.0 * rng.uniform();
            }
            x(i, j) = std::round(std::clamp(v, 0.0, 16.0));
        }
    }
    return Dataset::classification(std::move(x), std::move(labels), kDigitsClasses);
}

DigitsData synthetic_digits_split(std::uint64_t seed, std::size_t n, double test_fraction) {
    return standardize_split(synthetic_digits(seed, n), test_fraction, seed, "synthetic");
}

std::vector<Vector> choose_bases(const Matrix& x, std::size_t s, std::uint64_t seed) {
    if (s == 0) throw ValidationError("choose_bases: S must be positive");
    if (s > x.rows()) {
        throw ValidationError("choose_bases: S = " + std::to_string(s) + " exceeds the " +
                              std::to_string(x.rows()) + " available rows");
    }
    RngStream rng(seed, StreamId::kBases);
    const auto perm = permutation(rng, x.rows());
    std::vector<Vector> out;
    out.reserve(s);
    for (std::size_t i = 0; i < s; ++i) {
        const auto r = x.row(perm[i]);
        out.emplace_back(r.begin(), r.end());
    }
    return out;
}

}  // namespace mojet
