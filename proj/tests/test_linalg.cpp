#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cdekf/linalg.hpp"
#include "cdekf/sim.hpp"

using namespace cdekf;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = rng.next_normal();
    }
    return m;
}

LowerTriangular random_lower(std::size_t n, Rng& rng, double diag_floor = 0.5) {
    LowerTriangular l(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = j + 1; i < n; ++i) l.set(i, j, rng.next_normal());
        l.set(j, j, diag_floor + rng.next_uniform());
    }
    return l;
}

double rel_error(const Matrix& got, const Matrix& want) {
    return (got - want).frobenius_norm() / std::max(want.frobenius_norm(), 1e-300);
}

}  // namespace

TEST_CASE("flatten/unflatten is the identity") {
    Rng rng(101);
    for (std::size_t rows : {1u, 2u, 3u, 5u}) {
        for (std::size_t cols : {1u, 3u, 4u}) {
            const Matrix m = random_matrix(rows, cols, rng);
            const auto flat = m.flatten();
            const Matrix back = Matrix::unflatten(flat, rows, cols);
            CHECK(rel_error(back, m) == 0.0);
        }
    }
}

TEST_CASE("flatten order is column-major") {
    const Matrix m(2, 2, {1.0, 2.0, 3.0, 4.0});  // row-major initializer
    const auto flat = m.flatten();
    CHECK(flat[0] == 1.0);
    CHECK(flat[1] == 3.0);
    CHECK(flat[2] == 2.0);
    CHECK(flat[3] == 4.0);
}

TEST_CASE("entry access is bounds-checked") {
    Matrix m(2, 3);
    CHECK_THROWS_AS(m(2, 0), std::out_of_range);
    CHECK_THROWS_AS(m(0, 3), std::out_of_range);
    CHECK_THROWS_AS(m.column(3), std::out_of_range);
}

TEST_CASE("cholesky of the identity and of a diagonal") {
    const LowerTriangular i3 = cholesky_lower(Matrix::identity(3));
    CHECK(rel_error(i3.dense(), Matrix::identity(3)) == 0.0);

    const LowerTriangular d = cholesky_lower(Matrix::diagonal({4.0, 9.0}));
    CHECK(d(0, 0) == doctest::Approx(2.0));
    CHECK(d(1, 1) == doctest::Approx(3.0));
    CHECK(d(1, 0) == 0.0);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix b = random_matrix(4, 4, rng);
        const Matrix a = gram(b) + 3.0 * Matrix::identity(4);
        const LowerTriangular s = cholesky_lower(a);
        CHECK(rel_error(gram(s.dense()), a) <= 1e-12);
        CHECK(s.min_diagonal() > 0.0);
    }
}

TEST_CASE("cholesky reports the failing pivot") {
    try {
        cholesky_lower(Matrix::diagonal({1.0, -1.0}));
        FAIL("expected NotPositiveDefiniteError");
    } catch (const NotPositiveDefiniteError& e) {
        CHECK(e.pivot() == 1);
        CHECK(e.cause() == FailureCause::NotPositiveDefinite);
    }
    Matrix nan_matrix = Matrix::identity(2);
    nan_matrix(1, 1) = std::nan("");
    CHECK_THROWS_AS(cholesky_lower(nan_matrix), NotPositiveDefiniteError);
}

TEST_CASE("triangularize_lower handles orthogonal padding and a 1x2 row") {
    const Matrix padded = hstack(Matrix::identity(2), Matrix(2, 2));
    const LowerTriangular l = triangularize_lower(padded);
    CHECK(rel_error(l.dense(), Matrix::identity(2)) <= 1e-15);

    const Matrix row(1, 2, {3.0, 4.0});
    CHECK(triangularize_lower(row)(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("triangularize_lower normalizes diagonal signs") {
    const Matrix neg(1, 1, {-2.0});
    CHECK(triangularize_lower(neg)(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("triangularize_lower reproduces the Gram matrix") {
    Rng rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix pre = random_matrix(3, 7, rng);
        const Matrix expected = gram(pre);
        const LowerTriangular l = triangularize_lower(pre);
        CHECK(rel_error(gram(l.dense()), expected) <= 1e-12);
        CHECK(l.min_diagonal() > 0.0);
    }
}

TEST_CASE("triangularize_lower flags rank deficiency") {
    Matrix pre(2, 3);
    pre(0, 0) = 1.0;  // second row identically zero
    CHECK_THROWS_AS(triangularize_lower(pre), RankDeficientError);
}

TEST_CASE("block_triangularize trivial and scalar cases") {
    SUBCASE("no correlation, no update") {
        const auto blocks =
            block_triangularize(Matrix(3, 3), Matrix::identity(3), LowerTriangular::identity(3));
        CHECK(rel_error(blocks.re_sqrt.dense(), Matrix::identity(3)) <= 1e-15);
        CHECK(blocks.pxz_bar.max_abs() <= 1e-15);
        CHECK(rel_error(blocks.p_sqrt.dense(), Matrix::identity(3)) <= 1e-15);
    }
    SUBCASE("scalar pre-array by hand") {
        const auto blocks = block_triangularize(Matrix(1, 1, {1.0}), Matrix(1, 1, {1.0}),
                                                LowerTriangular::identity(1));
        CHECK(blocks.re_sqrt(0, 0) == doctest::Approx(std::sqrt(2.0)));
        CHECK(blocks.pxz_bar(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
        const double p = blocks.p_sqrt(0, 0) * blocks.p_sqrt(0, 0);
        CHECK(p == doctest::Approx(0.5));
    }
}

TEST_CASE("block_triangularize matches the dense formulas") {
    Rng rng(29);
    const std::size_t m = 2, n = 3;
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix z_bar = random_matrix(m, n, rng);
        const Matrix x_bar = random_matrix(n, n, rng);
        const LowerTriangular r_sqrt = random_lower(m, rng);

        const auto blocks = block_triangularize(z_bar, x_bar, r_sqrt);

        const Matrix r = gram(r_sqrt.dense());
        const Matrix r_e = gram(z_bar) + r;
        CHECK(rel_error(gram(blocks.re_sqrt.dense()), r_e) <= 1e-12);

        // pxz_bar = X Zᵀ R_e^{-T/2}: right-multiply back by re_sqrtᵀ.
        const Matrix p_xz = x_bar * z_bar.transposed();
        CHECK(rel_error(blocks.pxz_bar * blocks.re_sqrt.dense().transposed(), p_xz) <= 1e-12);

        // posterior covariance from the conventional formulas
        const LowerTriangular s_e = cholesky_lower(r_e);
        const Matrix gain = solve_upper(s_e, solve_lower(s_e, p_xz.transposed())).transposed();
        const Matrix p_post = gram(x_bar) - gain * r_e * gain.transposed();
        CHECK(rel_error(gram(blocks.p_sqrt.dense()), p_post) <= 1e-10);
    }
}

TEST_CASE("block_triangularize agrees with the two-transform route") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t m = 1 + trial % 3;
        const std::size_t n = 1 + trial % 4;
        const Matrix z_bar = random_matrix(m, n, rng);
        const Matrix x_bar = random_matrix(n, n, rng);
        const LowerTriangular r_sqrt = random_lower(m, rng);

        const auto blocks = block_triangularize(z_bar, x_bar, r_sqrt);

        const LowerTriangular re_two = triangularize_lower(hstack(z_bar, r_sqrt.dense()));
        const Matrix p_xz = x_bar * z_bar.transposed();
        const Matrix gain =
            solve_upper(re_two, solve_lower(re_two, p_xz.transposed())).transposed();
        const LowerTriangular p_two =
            triangularize_lower(hstack(x_bar - gain * z_bar, gain * r_sqrt.dense()));

        CHECK(rel_error(gram(blocks.re_sqrt.dense()), gram(re_two.dense())) <= 1e-10);
        CHECK(rel_error(gram(blocks.p_sqrt.dense()), gram(p_two.dense())) <= 1e-10);
    }
}

TEST_CASE("phi splits diagonals and strict parts") {
    const LowerTriangular half = phi(Matrix::identity(3));
    CHECK(rel_error(half.dense(), 0.5 * Matrix::identity(3)) == 0.0);

    const LowerTriangular split = phi(Matrix(2, 2, {2.0, 1.0, 3.0, 4.0}));
    CHECK(split(0, 0) == 1.0);
    CHECK(split(1, 0) == 3.0);
    CHECK(split(1, 1) == 2.0);
    CHECK(split(0, 1) == 0.0);
}

TEST_CASE("phi(a) + phi(a)^T recovers symmetric matrices exactly") {
    Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 5;
        Matrix a(n, n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = j; i < n; ++i) {
                const double v = rng.next_normal();
                a(i, j) = v;
                a(j, i) = v;
            }
        }
        const Matrix sum = phi(a).dense() + phi(a).dense().transposed();
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) CHECK(sum(i, j) == a(i, j));
        }
    }
}

TEST_CASE("triangular solves") {
    SUBCASE("identity factor returns the input") {
        const Matrix b(2, 2, {5.0, 6.0, 7.0, 8.0});
        CHECK(rel_error(solve_lower(LowerTriangular::identity(2), b), b) == 0.0);
    }
    SUBCASE("forward substitution by hand") {
        LowerTriangular l(2);
        l.set(0, 0, 2.0);
        l.set(1, 0, 1.0);
        l.set(1, 1, 1.0);
        const Vector x = solve_lower(l, Vector{2.0, 2.0});
        CHECK(x[0] == doctest::Approx(1.0));
        CHECK(x[1] == doctest::Approx(1.0));
    }
    SUBCASE("residuals of random solves") {
        Rng rng(41);
        for (int trial = 0; trial < 25; ++trial) {
            const std::size_t n = 1 + trial % 5;
            const LowerTriangular l = random_lower(n, rng);
            const Matrix b = random_matrix(n, 2, rng);
            const Matrix x = solve_lower(l, b);
            CHECK(rel_error(l * x, b) <= 1e-12);
            const Matrix xu = solve_upper(l, b);
            CHECK(rel_error(l.dense().transposed() * xu, b) <= 1e-12);
        }
    }
    SUBCASE("singular diagonals are rejected") {
        LowerTriangular l(2);
        l.set(0, 0, 1.0);  // l(1,1) left at zero
        CHECK_THROWS_AS(solve_lower(l, Vector{1.0, 1.0}), SingularFactorError);
        CHECK_THROWS_AS(solve_upper(l, Vector{1.0, 1.0}), SingularFactorError);
    }
}

TEST_CASE("lower factor rejects writes above the diagonal") {
    LowerTriangular l(3);
    CHECK_THROWS_AS(l.set(0, 1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(LowerTriangular::tril_of(Matrix(2, 3)), std::invalid_argument);
}
