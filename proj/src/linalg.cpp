#include "mojet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mojet/errors.hpp"

namespace mojet {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxJacobiSweeps = 80;

void validate_nonempty_finite(const Matrix& m, const char* what) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw ValidationError(std::string(what) + ": empty matrix");
    }
    if (!m.all_finite()) {
        throw ValidationError(std::string(what) + ": non-finite entry");
    }
}

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols() || a.rows() == 0) {
        throw ValidationError(std::string(what) + ": expected a non-empty square matrix, got " +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

// Column-major working copy of a tall matrix (rows >= cols).
struct Columns {
    std::size_t length = 0;
    std::vector<Vector> cols;
};

Columns to_columns(const Matrix& tall) {
    Columns c;
    c.length = tall.rows();
    c.cols.assign(tall.cols(), Vector(tall.rows()));
    for (std::size_t r = 0; r < tall.rows(); ++r) {
        auto row = tall.row(r);
        for (std::size_t j = 0; j < tall.cols(); ++j) c.cols[j][r] = row[j];
    }
    return c;
}

void rotate(Vector& p, Vector& q, double c, double s) noexcept {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i];
        const double b = q[i];
        p[i] = c * a - s * b;
        q[i] = s * a + c * b;
    }
}

// Hestenes iteration: rotate column pairs until all are mutually orthogonal
// to working precision. When v is non-null, the same rotations are applied
// to its columns (v starts as the identity).
void jacobi_orthogonalize(Columns& w, Columns* v) {
    const std::size_t n = w.cols.size();
    for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot(w.cols[p], w.cols[p]);
                const double beta = dot(w.cols[q], w.cols[q]);
                const double gamma = dot(w.cols[p], w.cols[q]);
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(w.cols[p], w.cols[q], c, s);
                if (v) rotate(v->cols[p], v->cols[q], c, s);
                rotated = true;
            }
        }
        if (!rotated) return;
    }
    throw NumericError("svd: Jacobi sweeps did not converge");
}

// Index order by nonincreasing value; ties keep original order.
std::vector<std::size_t> descending_order(const Vector& values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return order;
}

// Fills the columns of `basis` flagged in `missing` with unit vectors
// orthogonal to every other column (modified Gram–Schmidt against e_i).
void complete_orthonormal(std::vector<Vector>& basis, const std::vector<bool>& missing) {
    const std::size_t len = basis.empty() ? 0 : basis.front().size();
    std::size_t next_axis = 0;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        if (!missing[j]) continue;
        bool filled = false;
        while (!filled && next_axis < len) {
            Vector cand(len, 0.0);
            cand[next_axis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k = 0; k < basis.size(); ++k) {
                    if (k == j || (missing[k] && k > j)) continue;
                    const double proj = dot(cand, basis[k]);
                    for (std::size_t i = 0; i < len; ++i) cand[i] -= proj * basis[k][i];
                }
            }
            const double nrm = norm2(cand);
            if (nrm > 0.5) {
                for (double& x : cand) x /= nrm;
                basis[j] = std::move(cand);
                filled = true;
            }
        }
        if (!filled) throw NumericError("svd: failed to complete orthonormal basis");
    }
}

}  // namespace

Svd svd(const Matrix& m) {
    validate_nonempty_finite(m, "svd");
    const bool wide = m.rows() < m.cols();
    const Matrix tall = wide ? m.transpose() : m;
    const std::size_t n = tall.cols();

    Columns w = to_columns(tall);
    Columns v;
    v.length = n;
    v.cols.assign(n, Vector(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) v.cols[j][j] = 1.0;
    jacobi_orthogonalize(w, &v);

    Vector norms(n);
    for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(w.cols[j]);
    const auto order = descending_order(norms);
    const double smax = norms[order.front()];
    const double zero_cut = smax * kEps * static_cast<double>(std::max(tall.rows(), n));

    Vector s(n);
    std::vector<Vector> left(n);
    std::vector<bool> missing(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        s[k] = norms[j];
        if (norms[j] > zero_cut) {
            left[k] = w.cols[j];
            for (double& x : left[k]) x /= norms[j];
        } else {
            left[k] = Vector(tall.rows(), 0.0);
            missing[k] = true;
        }
    }
    complete_orthonormal(left, missing);

    // tall = L·diag(s)·Rᵀ with L = left (rows×n), R = v reordered (n×n).
    Matrix lmat(tall.rows(), n);
    Matrix rmat_t(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < tall.rows(); ++i) lmat(i, k) = left[k][i];
        const auto& vc = v.cols[order[k]];
        for (std::size_t i = 0; i < n; ++i) rmat_t(k, i) = vc[i];
    }

    if (!wide) return Svd{std::move(lmat), std::move(s), std::move(rmat_t)};
    // m = tallᵀ = R·diag(s)·Lᵀ.
    return Svd{rmat_t.transpose(), std::move(s), lmat.transpose()};
}

Vector singular_values(const Matrix& m) {
    validate_nonempty_finite(m, "singular_values");
    const Matrix tall = m.rows() < m.cols() ? m.transpose() : m;
    Columns w = to_columns(tall);
    jacobi_orthogonalize(w, nullptr);
    Vector s(w.cols.size());
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = norm2(w.cols[j]);
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

Matrix cholesky(const Matrix& a) {
    require_square(a, "cholesky");
    if (!a.all_finite()) throw ValidationError("cholesky: non-finite entry");
    const std::size_t n = a.rows();
    const double scale = std::max(max_abs(a), std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > tolerances::kSymmetry * scale) {
                throw ValidationError("cholesky: matrix is not symmetric");
            }

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
    const double pivot_floor = static_cast<double>(n) * kEps * max_diag;

    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > pivot_floor)) {
            throw SingularSystemError("cholesky: matrix is not positive definite (pivot " +
                                      std::to_string(j) + ")");
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (b.rows() != a.rows()) throw ValidationError("solve_spd: right-hand side row mismatch");
    const Matrix l = cholesky(a);
    const std::size_t n = a.rows();
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
            x(ii, c) = s / l(ii, ii);
        }
    }
    return x;
}

Matrix solve(const Matrix& a, const Matrix& b) {
    require_square(a, "solve");
    if (b.rows() != a.rows()) throw ValidationError("solve: right-hand side row mismatch");
    const std::size_t n = a.rows();
    Matrix lu = a;
    Matrix x = b;
    const double floor = static_cast<double>(n) * kEps * max_abs(a);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
        if (!(std::abs(lu(piv, k)) > floor)) {
            throw SingularSystemError("solve: matrix is singular to working precision");
        }
        if (piv != k) {
            std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
            std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = lu(i, k) / lu(k, k);
            lu(i, k) = f;
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= f * x(k, j);
        }
    }
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= lu(ii, k) * x(k, c);
            x(ii, c) = s / lu(ii, ii);
        }
    }
    return x;
}

Matrix inverse(const Matrix& a) {
    require_square(a, "inverse");
    return solve(a, Matrix::identity(a.rows()));
}

Matrix least_squares(const Matrix& a, const Matrix& b) {
    if (a.rows() < a.cols() || a.cols() == 0) {
        throw ValidationError("least_squares: need rows >= cols >= 1");
    }
    if (b.rows() != a.rows()) throw ValidationError("least_squares: right-hand side row mismatch");
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix r = a;
    Matrix y = b;
    Vector v(m);
    for (std::size_t k = 0; k < n; ++k) {
        double nrm = 0.0;
        {
            Vector col(m - k);
            for (std::size_t i = k; i < m; ++i) col[i - k] = r(i, k);
            nrm = norm2(col);
        }
        if (nrm == 0.0) continue;
        const double alpha = r(k, k) > 0 ? -nrm : nrm;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
        v[k] -= alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < m; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        auto reflect = [&](Matrix& t) {
            for (std::size_t j = 0; j < t.cols(); ++j) {
                double s = 0.0;
                for (std::size_t i = k; i < m; ++i) s += v[i] * t(i, j);
                const double f = 2.0 * s / vnorm2;
                for (std::size_t i = k; i < m; ++i) t(i, j) -= f * v[i];
            }
        };
        reflect(r);
        reflect(y);
    }
    double rmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) rmax = std::max(rmax, std::abs(r(k, k)));
    const double floor = static_cast<double>(m) * kEps * rmax;
    for (std::size_t k = 0; k < n; ++k)
        if (!(std::abs(r(k, k)) > floor)) {
            throw SingularSystemError("least_squares: design matrix is rank deficient");
        }
    Matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = y(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= r(ii, k) * x(k, c);
            x(ii, c) = s / r(ii, ii);
        }
    }
    return x;
}

double condition_number(const Matrix& a) {
    const Vector s = singular_values(a);
    if (s.back() == 0.0) return std::numeric_limits<double>::infinity();
    return s.front() / s.back();
}

}  // namespace mojet
