#include "cdekf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdekf {

const char* to_string(FailureCause cause) {
    switch (cause) {
        case FailureCause::NotPositiveDefinite: return "not-positive-definite";
        case FailureCause::RankDeficient: return "rank-deficient";
        case FailureCause::SingularFactor: return "singular-factor";
        case FailureCause::NonFinite: return "non-finite";
        case FailureCause::StepUnderflow: return "step-underflow";
    }
    return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> row_major)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (row_major.size() != rows * cols) {
        throw std::invalid_argument("matrix initializer size mismatch");
    }
    auto it = row_major.begin();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            data_[j * rows_ + i] = *it++;
        }
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> entries) {
    Matrix m(entries.size(), entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) m(i, i) = entries[i];
    return m;
}

Matrix Matrix::diagonal(std::initializer_list<double> entries) {
    return diagonal(std::span<const double>(entries.begin(), entries.size()));
}

Matrix Matrix::unflatten(std::span<const double> data, std::size_t rows, std::size_t cols) {
    if (data.size() != rows * cols) {
        throw std::invalid_argument("unflatten size mismatch");
    }
    Matrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data_.begin());
    return m;
}

void Matrix::check_index(std::size_t i, std::size_t j) const {
    if (i >= rows_ || j >= cols_) {
        throw std::out_of_range("matrix index out of range");
    }
}

double& Matrix::operator()(std::size_t i, std::size_t j) {
    check_index(i, j);
    return data_[j * rows_ + i];
}

double Matrix::operator()(std::size_t i, std::size_t j) const {
    check_index(i, j);
    return data_[j * rows_ + i];
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j) {
        for (std::size_t i = 0; i < rows_; ++i) {
            t(j, i) = data_[j * rows_ + i];
        }
    }
    return t;
}

Vector Matrix::column(std::size_t j) const {
    if (j >= cols_) throw std::out_of_range("column index out of range");
    return Vector(data_.begin() + static_cast<std::ptrdiff_t>(j * rows_),
                  data_.begin() + static_cast<std::ptrdiff_t>((j + 1) * rows_));
}

void Matrix::set_column(std::size_t j, std::span<const double> values) {
    if (j >= cols_ || values.size() != rows_) {
        throw std::out_of_range("set_column index/size mismatch");
    }
    std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(j * rows_));
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Matrix::max_abs() const {
    double s = 0.0;
    for (double v : data_) s = std::max(s, std::abs(v));
    return s;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
        throw std::invalid_argument("matrix addition dimension mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) {
        throw std::invalid_argument("matrix subtraction dimension mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double scalar) {
    for (double& v : data_) v *= scalar;
    return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator*(double scalar, Matrix m) { return m *= scalar; }

Matrix operator*(const Matrix& lhs, const Matrix& rhs) {
    if (lhs.cols() != rhs.rows()) {
        throw std::invalid_argument("matrix product dimension mismatch");
    }
    Matrix out(lhs.rows(), rhs.cols());
    for (std::size_t j = 0; j < rhs.cols(); ++j) {
        for (std::size_t k = 0; k < lhs.cols(); ++k) {
            const double r = rhs(k, j);
            if (r == 0.0) continue;
            for (std::size_t i = 0; i < lhs.rows(); ++i) {
                out(i, j) += lhs(i, k) * r;
            }
        }
    }
    return out;
}

Vector operator*(const Matrix& m, const Vector& v) {
    if (m.cols() != v.size()) {
        throw std::invalid_argument("matrix-vector dimension mismatch");
    }
    Vector out(m.rows(), 0.0);
    for (std::size_t j = 0; j < m.cols(); ++j) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            out[i] += m(i, j) * v[j];
        }
    }
    return out;
}

Matrix gram(const Matrix& a) {
    Matrix out(a.rows(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * a(j, k);
            out(i, j) = s;
            out(j, i) = s;
        }
    }
    return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("hstack row mismatch");
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t j = 0; j < a.cols(); ++j) out.set_column(j, a.column(j));
    for (std::size_t j = 0; j < b.cols(); ++j) out.set_column(a.cols() + j, b.column(j));
    return out;
}

LowerTriangular::LowerTriangular(std::size_t order) : dense_(order, order) {}

LowerTriangular LowerTriangular::identity(std::size_t order) {
    LowerTriangular l(order);
    for (std::size_t i = 0; i < order; ++i) l.dense_(i, i) = 1.0;
    return l;
}

LowerTriangular LowerTriangular::tril_of(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("tril_of requires a square matrix");
    }
    LowerTriangular l(a.rows());
    for (std::size_t j = 0; j < a.cols(); ++j) {
        for (std::size_t i = j; i < a.rows(); ++i) {
            l.dense_(i, j) = a(i, j);
        }
    }
    return l;
}

void LowerTriangular::set(std::size_t i, std::size_t j, double value) {
    if (j > i) {
        throw std::invalid_argument("cannot write above the diagonal of a lower factor");
    }
    dense_(i, j) = value;
}

double LowerTriangular::min_diagonal() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < order(); ++i) m = std::min(m, dense_(i, i));
    return m;
}

bool LowerTriangular::diagonal_positive_and_finite() const {
    for (std::size_t i = 0; i < order(); ++i) {
        const double d = dense_(i, i);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
    }
    return true;
}

Matrix operator*(const LowerTriangular& l, const Matrix& m) { return l.dense() * m; }
Matrix operator*(const Matrix& m, const LowerTriangular& l) { return m * l.dense(); }
Vector operator*(const LowerTriangular& l, const Vector& v) { return l.dense() * v; }

LowerTriangular cholesky_lower(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("cholesky_lower requires a square matrix");
    }
    const std::size_t n = a.rows();
    LowerTriangular l(n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw NotPositiveDefiniteError(j);
        }
        const double root = std::sqrt(d);
        l.set(j, j, root);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l.set(i, j, s / root);
        }
    }
    return l;
}

namespace {

// In-place Householder QR of an r x c matrix (r >= c); only the upper
// triangular R factor is retained.
void householder_qr_in_place(Matrix& b) {
    const std::size_t r = b.rows();
    const std::size_t c = b.cols();
    std::vector<double> v(r);
    for (std::size_t k = 0; k < c; ++k) {
        double norm = 0.0;
        for (std::size_t i = k; i < r; ++i) norm += b(i, k) * b(i, k);
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        const double alpha = b(k, k) >= 0.0 ? -norm : norm;
        double vnorm2 = 0.0;
        for (std::size_t i = k; i < r; ++i) {
            v[i] = b(i, k);
            if (i == k) v[i] -= alpha;
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        b(k, k) = alpha;
        for (std::size_t i = k + 1; i < r; ++i) b(i, k) = 0.0;
        for (std::size_t j = k + 1; j < c; ++j) {
            double dot = 0.0;
            for (std::size_t i = k; i < r; ++i) dot += v[i] * b(i, j);
            const double factor = 2.0 * dot / vnorm2;
            for (std::size_t i = k; i < r; ++i) b(i, j) -= factor * v[i];
        }
    }
}

constexpr double kRankUnderflow = 1e-300;

// Lower-triangularizes `pre` via QR of the transpose and normalizes the
// diagonal signs. `require_full_rank` controls the underflow check.
LowerTriangular lower_triangularize_impl(const Matrix& pre) {
    if (pre.cols() < pre.rows() || pre.rows() == 0) {
        throw std::invalid_argument("pre-array must be n x m with m >= n >= 1");
    }
    Matrix b = pre.transposed();  // m x n, m >= n
    householder_qr_in_place(b);
    const std::size_t n = pre.rows();
    LowerTriangular l(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sign = b(i, i) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = i; j < n; ++j) {
            l.set(j, i, sign * b(i, j));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(l(i, i)) >= kRankUnderflow) || !std::isfinite(l(i, i))) {
            throw RankDeficientError(i);
        }
    }
    return l;
}

}  // namespace

LowerTriangular triangularize_lower(const Matrix& pre) {
    return lower_triangularize_impl(pre);
}

BlockTriangularization block_triangularize(const Matrix& z_block, const Matrix& x_block,
                                           const LowerTriangular& r_sqrt) {
    const std::size_t m = z_block.rows();
    const std::size_t n = x_block.rows();
    if (z_block.cols() != n || x_block.cols() != n || r_sqrt.order() != m) {
        throw std::invalid_argument("block_triangularize blocks not conformable");
    }
    Matrix pre(m + n, n + m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) pre(i, j) = z_block(i, j);
        for (std::size_t j = 0; j < m; ++j) pre(i, n + j) = r_sqrt(i, j);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) pre(m + i, j) = x_block(i, j);
    }
    const LowerTriangular post = lower_triangularize_impl(pre);

    BlockTriangularization out{LowerTriangular(m), Matrix(n, m), LowerTriangular(n)};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) out.re_sqrt.set(i, j, post(i, j));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) out.pxz_bar(i, j) = post(m + i, j);
        for (std::size_t j = 0; j <= i; ++j) out.p_sqrt.set(i, j, post(m + i, m + j));
    }
    return out;
}

LowerTriangular phi(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("phi requires a square matrix");
    }
    LowerTriangular l(a.rows());
    for (std::size_t j = 0; j < a.cols(); ++j) {
        l.set(j, j, 0.5 * a(j, j));
        for (std::size_t i = j + 1; i < a.rows(); ++i) {
            l.set(i, j, a(i, j));
        }
    }
    return l;
}

namespace {

void check_solvable_diagonal(const LowerTriangular& l) {
    for (std::size_t i = 0; i < l.order(); ++i) {
        const double d = l(i, i);
        if (!(std::abs(d) >= kRankUnderflow) || !std::isfinite(d)) {
            throw SingularFactorError(i);
        }
    }
}

}  // namespace

Matrix solve_lower(const LowerTriangular& l, const Matrix& b) {
    if (l.order() != b.rows()) {
        throw std::invalid_argument("solve_lower dimension mismatch");
    }
    check_solvable_diagonal(l);
    const std::size_t n = l.order();
    Matrix x = b;
    for (std::size_t col = 0; col < b.cols(); ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, col);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, col);
            x(i, col) = s / l(i, i);
        }
    }
    return x;
}

Vector solve_lower(const LowerTriangular& l, const Vector& b) {
    if (l.order() != b.size()) {
        throw std::invalid_argument("solve_lower dimension mismatch");
    }
    check_solvable_diagonal(l);
    Vector x = b;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t k = 0; k < i; ++k) x[i] -= l(i, k) * x[k];
        x[i] /= l(i, i);
    }
    return x;
}

Matrix solve_upper(const LowerTriangular& l, const Matrix& b) {
    if (l.order() != b.rows()) {
        throw std::invalid_argument("solve_upper dimension mismatch");
    }
    check_solvable_diagonal(l);
    const std::size_t n = l.order();
    Matrix x = b;
    for (std::size_t col = 0; col < b.cols(); ++col) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, col);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, col);
            x(ii, col) = s / l(ii, ii);
        }
    }
    return x;
}

Vector solve_upper(const LowerTriangular& l, const Vector& b) {
    if (l.order() != b.size()) {
        throw std::invalid_argument("solve_upper dimension mismatch");
    }
    check_solvable_diagonal(l);
    const std::size_t n = l.order();
    Vector x = b;
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) x[ii] -= l(k, ii) * x[k];
        x[ii] /= l(ii, ii);
    }
    return x;
}

Vector vec_add(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector size mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector vec_sub(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("vector size mismatch");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector vec_scale(double s, const Vector& a) {
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

double vec_norm(const Vector& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

double vec_max_abs(const Vector& a) {
    double s = 0.0;
    for (double v : a) s = std::max(s, std::abs(v));
    return s;
}

bool vec_all_finite(const Vector& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace cdekf
