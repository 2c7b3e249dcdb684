#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mojet/errors.hpp"
#include "mojet/linalg.hpp"
#include "mojet/matrix.hpp"
#include "mojet/rng.hpp"

using namespace mojet;

namespace {

// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi rotations.
// Used as an oracle for singular values: s_i² = eig_i(AᵀA).
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST(Matrix, BasicAlgebra) {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    const Matrix b = Matrix::from_rows({{1, 0, -1}, {2, 1, 0}});
    const Matrix c = a * b;
    EXPECT_EQ(c, Matrix::from_rows({{5, 2, -1}, {11, 4, -3}, {17, 6, -5}}));
    EXPECT_EQ(a.transpose(), Matrix::from_rows({{1, 3, 5}, {2, 4, 6}}));
    EXPECT_EQ(transpose_times(a, a), a.transpose() * a);
    EXPECT_DOUBLE_EQ(frobenius_norm(Matrix::from_rows({{3, 4}})), 5.0);
    EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
    EXPECT_THROW((void)(a * a), ValidationError);
}

TEST(Svd, SingularValuesMatchEigenOracle) {
    RngStream rng(7, StreamId::kData);
    for (int t = 0; t < 20; ++t) {
        const std::size_t r = 1 + rng.uniform_index(9), c = 1 + rng.uniform_index(9);
        const Matrix m = gaussian_matrix(rng, r, c);
        const Matrix g = r >= c ? transpose_times(m, m) : m * m.transpose();
        std::vector<std::vector<double>> gv(g.rows(), std::vector<double>(g.cols()));
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gv[i][j] = g(i, j);
        const auto ev = jacobi_eigenvalues(gv);
        const Vector s = singular_values(m);
        ASSERT_EQ(s.size(), std::min(r, c));
        for (std::size_t i = 0; i < s.size(); ++i) {
            EXPECT_NEAR(s[i], std::sqrt(std::max(0.0, ev[i])), 1e-10 * (1.0 + s[0]));
        }
    }
}

TEST(Svd, ReconstructsAndIsOrthonormal) {
    RngStream rng(8, StreamId::kData);
    for (auto [r, c] : {std::pair{5, 3}, std::pair{3, 5}, std::pair{6, 6}, std::pair{1, 4}}) {
        const Matrix m = gaussian_matrix(rng, r, c);
        const Svd f = svd(m);
        EXPECT_TRUE(std::is_sorted(f.s.rbegin(), f.s.rend()));
        EXPECT_LE(relative_frobenius_error(f.u * Matrix::diagonal(f.s) * f.vt, m), 1e-12);
        const std::size_t k = f.s.size();
        EXPECT_LE(max_abs_diff(transpose_times(f.u, f.u), Matrix::identity(k)), 1e-12);
        EXPECT_LE(max_abs_diff(f.vt * f.vt.transpose(), Matrix::identity(k)), 1e-12);
    }
}

TEST(Svd, RankDeficientAndZero) {
    const Matrix m = Matrix::from_rows({{1, 2, 3}, {2, 4, 6}});
    const Vector s = singular_values(m);
    EXPECT_NEAR(s[0], std::sqrt(70.0), 1e-12);
    EXPECT_LE(s[1], 1e-12);
    EXPECT_EQ(singular_values(Matrix(3, 2)), (Vector{0.0, 0.0}));
    EXPECT_THROW(svd(Matrix()), ValidationError);
    Matrix bad(2, 2);
    bad(0, 0) = NAN;
    EXPECT_THROW(svd(bad), ValidationError);
}

TEST(Solve, TwoByTwoAdjugateOracle) {
    RngStream rng(9, StreamId::kData);
    for (int t = 0; t < 50; ++t) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
        const double det = a * d - b * c;
        if (std::abs(det) < 1e-3) continue;
        const Matrix want = Matrix::from_rows({{d / det, -b / det}, {-c / det, a / det}});
        EXPECT_LE(max_abs_diff(inverse(Matrix::from_rows({{a, b}, {c, d}})), want), 1e-10 * max_abs(want));
    }
    EXPECT_THROW(inverse(Matrix::from_rows({{1, 2}, {2, 4}})), SingularSystemError);
}

TEST(Solve, SpdAndGeneralAgree) {
    RngStream rng(10, StreamId::kData);
    const Matrix g = gaussian_matrix(rng, 8, 5);
    const Matrix a = transpose_times(g, g) + Matrix::identity(5);
    const Matrix b = gaussian_matrix(rng, 5, 3);
    const Matrix x1 = solve_spd(a, b), x2 = solve(a, b);
    EXPECT_LE(relative_frobenius_error(x1, x2), 1e-12);
    EXPECT_LE(relative_frobenius_error(a * x1, b), 1e-12);
    const Matrix l = cholesky(a);
    EXPECT_LE(relative_frobenius_error(l * l.transpose(), a), 1e-13);
    EXPECT_THROW(cholesky(Matrix::from_rows({{1, 2}, {2, 1}})), SingularSystemError);
    EXPECT_THROW(solve_spd(Matrix::from_rows({{1, 2}, {0, 1}}), b.row_block(0, 2)), ValidationError);
}

TEST(LeastSquares, MatchesNormalEquationsAndRejectsRankDeficiency) {
    RngStream rng(11, StreamId::kData);
    const Matrix a = gaussian_matrix(rng, 12, 4);
    const Matrix b = gaussian_matrix(rng, 12, 2);
    const Matrix x = least_squares(a, b);
    const Matrix xn = solve_spd(transpose_times(a, a), transpose_times(a, b));
    EXPECT_LE(relative_frobenius_error(x, xn), 1e-10);
    Matrix dup = a;
    for (std::size_t i = 0; i < dup.rows(); ++i) dup(i, 3) = dup(i, 0);
    EXPECT_THROW(least_squares(dup, b), SingularSystemError);
    EXPECT_THROW(least_squares(a.row_block(0, 3), b.row_block(0, 3)), ValidationError);
}

TEST(ConditionNumber, DiagonalAndSingular) {
    EXPECT_DOUBLE_EQ(condition_number(Matrix::diagonal(Vector{4.0, 2.0, 0.5})), 8.0);
    EXPECT_TRUE(std::isinf(condition_number(Matrix::from_rows({{1, 1}, {1, 1}}))));
}

TEST(Rng, DeterministicAndStreamsIndependent) {
    RngStream a(42, StreamId::kData), b(42, StreamId::kData), c(42, StreamId::kProbes), d(43, StreamId::kData);
    std::vector<std::uint64_t> va, vb, vc, vd;
    for (int i = 0; i < 100; ++i) {
        va.push_back(a.next_u64());
        vb.push_back(b.next_u64());
        vc.push_back(c.next_u64());
        vd.push_back(d.next_u64());
    }
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NE(va, vd);
    RngStream p(42, StreamId::kProbes);
    EXPECT_NE(p.derive(0).next_u64(), p.derive(1).next_u64());
    EXPECT_EQ(p.derive(3).next_u64(), RngStream(42, StreamId::kProbes).derive(3).next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
    RngStream rng(5, StreamId::kData);
    const int n = 200000;
    double su = 0, su2 = 0, sn = 0, sn2 = 0, sn4 = 0;
    double umin = 1, umax = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        su += u;
        su2 += u * u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
        sn4 += z * z * z * z;
    }
    EXPECT_GE(umin, 0.0);
    EXPECT_LT(umax, 1.0);
    // Five standard errors.
    EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
    EXPECT_NEAR(su2 / n - std::pow(su / n, 2), 1.0 / 12, 5 * std::sqrt((1.0 / 80 - 1.0 / 144) / n));
    EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(n));
    EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
    EXPECT_NEAR(sn4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(Rng, UniformIndexAndPermutation) {
    RngStream rng(6, StreamId::kShuffle);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 5 * std::sqrt(10000 * 6.0 / 7));
    auto perm = permutation(rng, 50);
    std::sort(perm.begin(), perm.end());
    std::vector<std::size_t> iota(50);
    std::iota(iota.begin(), iota.end(), 0);
    EXPECT_EQ(perm, iota);
}
