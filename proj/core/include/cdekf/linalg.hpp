#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "cdekf/errors.hpp"

namespace cdekf {

using Vector = std::vector<double>;

/// Dense real matrix with column-major storage and immutable dimensions.
/// Entry access is bounds-checked; flatten()/unflatten() expose the
/// column-major vector form used to hand filter states to the ODE solver.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols);
    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> row_major);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> entries);
    static Matrix diagonal(std::initializer_list<double> entries);
    /// Rebuilds an rows x cols matrix from its column-major flatten.
    static Matrix unflatten(std::span<const double> data, std::size_t rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j);
    double operator()(std::size_t i, std::size_t j) const;

    /// Column-major copy of the entries.
    std::vector<double> flatten() const { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transposed() const;
    Vector column(std::size_t j) const;
    void set_column(std::size_t j, std::span<const double> values);

    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double scalar);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;

    void check_index(std::size_t i, std::size_t j) const;
};

Matrix operator+(Matrix lhs, const Matrix& rhs);
Matrix operator-(Matrix lhs, const Matrix& rhs);
Matrix operator*(double scalar, Matrix m);
Matrix operator*(const Matrix& lhs, const Matrix& rhs);
Vector operator*(const Matrix& m, const Vector& v);

/// A * Aᵀ without forming the transpose.
Matrix gram(const Matrix& a);
/// Horizontal concatenation [a | b]; used to assemble pre-arrays.
Matrix hstack(const Matrix& a, const Matrix& b);

/// Lower-triangular matrix with an exactly-zero strict upper part. Factors
/// produced by the factorization routines below additionally have
/// nonnegative (Cholesky: strictly positive) diagonals.
class LowerTriangular {
public:
    LowerTriangular() = default;
    explicit LowerTriangular(std::size_t order);

    static LowerTriangular identity(std::size_t order);
    /// Lower-triangular part (including diagonal) of an arbitrary square matrix.
    static LowerTriangular tril_of(const Matrix& a);

    std::size_t order() const noexcept { return dense_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return dense_(i, j); }
    /// Writes below or on the diagonal only; throws std::invalid_argument above it.
    void set(std::size_t i, std::size_t j, double value);

    const Matrix& dense() const noexcept { return dense_; }
    double min_diagonal() const;
    bool diagonal_positive_and_finite() const;

private:
    Matrix dense_;
};

Matrix operator*(const LowerTriangular& l, const Matrix& m);
Matrix operator*(const Matrix& m, const LowerTriangular& l);
Vector operator*(const LowerTriangular& l, const Vector& v);

/// Lower Cholesky factor S of a symmetric positive-definite matrix,
/// S Sᵀ = a with strictly positive diagonal. Only the lower triangle of
/// `a` is read. Throws NotPositiveDefiniteError with the failing pivot.
LowerTriangular cholesky_lower(const Matrix& a);

/// Orthogonal lower-triangularization of an n x m pre-array (m >= n):
/// returns L with L Lᵀ = pre preᵀ, computed as the transposed R factor of a
/// Householder QR of preᵀ with column signs flipped so the diagonal is
/// nonnegative. Throws RankDeficientError when a diagonal underflows
/// below 1e-300.
LowerTriangular triangularize_lower(const Matrix& pre);

struct BlockTriangularization {
    LowerTriangular re_sqrt;  // m x m
    Matrix pxz_bar;           // n x m
    LowerTriangular p_sqrt;   // n x n
};

/// One-shot triangularization of the block pre-array
///   [ z_block  r_sqrt ]
///   [ x_block     0   ]
/// returning the three post-array blocks (innovation factor, normalized
/// cross term, posterior factor).
BlockTriangularization block_triangularize(const Matrix& z_block, const Matrix& x_block,
                                           const LowerTriangular& r_sqrt);

/// Phi operator: strictly-lower part of `a` plus half its diagonal.
LowerTriangular phi(const Matrix& a);

/// Solves l x = b by forward substitution. Throws SingularFactorError on a
/// zero or non-finite diagonal.
Matrix solve_lower(const LowerTriangular& l, const Matrix& b);
Vector solve_lower(const LowerTriangular& l, const Vector& b);
/// Solves lᵀ x = b (upper-triangular system) by back substitution.
Matrix solve_upper(const LowerTriangular& l, const Matrix& b);
Vector solve_upper(const LowerTriangular& l, const Vector& b);

// Small vector helpers shared across the modules.
Vector vec_add(const Vector& a, const Vector& b);
Vector vec_sub(const Vector& a, const Vector& b);
Vector vec_scale(double s, const Vector& a);
double vec_norm(const Vector& a);
double vec_max_abs(const Vector& a);
bool vec_all_finite(const Vector& a);

}  // namespace cdekf
