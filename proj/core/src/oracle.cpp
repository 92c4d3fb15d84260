#include "cdekf/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace cdekf {

namespace {

double inf_norm(const Matrix& a) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) row += std::abs(a(i, j));
        best = std::max(best, row);
    }
    return best;
}

// Gaussian elimination with partial pivoting: solves a X = b for the small
// symmetric systems of the discrete update. Independent of the triangular
// machinery used by the filters.
Matrix lu_solve(Matrix a, Matrix b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.rows() != n) throw std::invalid_argument("lu_solve shape mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
        }
        if (a(p, k) == 0.0) throw std::runtime_error("singular system in oracle solve");
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(p, j), a(k, j));
            for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(p, j), b(k, j));
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            a(i, k) = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
            for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
        }
    }
    for (std::size_t col = 0; col < b.cols(); ++col) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = b(ii, col);
            for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * b(j, col);
            b(ii, col) = s / a(ii, ii);
        }
    }
    return b;
}

}  // namespace

Matrix expm(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("expm requires a square matrix");
    const double norm = inf_norm(a);
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    Matrix scaled = a;
    scaled *= std::ldexp(1.0, -squarings);

    Matrix result = Matrix::identity(a.rows());
    Matrix term = Matrix::identity(a.rows());
    for (int k = 1; k <= 40; ++k) {
        term = term * scaled;
        term *= 1.0 / static_cast<double>(k);
        result += term;
        if (inf_norm(term) < 1e-20 * std::max(1.0, inf_norm(result))) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

DiscreteLti discretize_lti(const Matrix& a, const Matrix& gqg, const Matrix& h, const Matrix& r,
                           double dt) {
    const std::size_t n = a.rows();
    // Van Loan block [[-A, GQGᵀ], [0, Aᵀ]] * dt; the exponential's upper-right
    // block times Fᵀ gives the discrete noise covariance.
    Matrix block(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            block(i, j) = -a(i, j) * dt;
            block(i, n + j) = gqg(i, j) * dt;
            block(n + i, n + j) = a(j, i) * dt;
        }
    }
    const Matrix e = expm(block);
    Matrix f(n, n), m12(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            f(i, j) = e(n + j, n + i);  // transpose of the lower-right block
            m12(i, j) = e(i, n + j);
        }
    }
    Matrix qd = f * m12;
    // symmetrize away roundoff
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double v = 0.5 * (qd(i, j) + qd(j, i));
            qd(i, j) = v;
            qd(j, i) = v;
        }
    }
    return DiscreteLti{std::move(f), std::move(qd), h, r};
}

Matrix lti_predicted_covariance(const Matrix& a, const Matrix& gqg, const Matrix& p0, double dt) {
    const DiscreteLti d = discretize_lti(a, gqg, Matrix(1, a.rows()), Matrix::identity(1), dt);
    return d.f * p0 * d.f.transposed() + d.qd;
}

KalmanTrace exact_kalman_filter(const DiscreteLti& model, const Vector& x0, const Matrix& p0,
                                std::span<const MeasurementRecord> measurements) {
    KalmanTrace trace;
    Vector x = x0;
    Matrix p = p0;
    const Matrix ht = model.h.transposed();
    const std::size_t n = x0.size();
    for (const auto& record : measurements) {
        // predict
        x = model.f * x;
        p = model.f * p * model.f.transposed() + model.qd;
        // update (gain from the innovation covariance, Joseph-form posterior)
        const Matrix s = model.h * p * ht + model.r;
        const Matrix gain = lu_solve(s, (p * ht).transposed()).transposed();
        const Vector innovation = vec_sub(record.value, model.h * x);
        x = vec_add(x, gain * innovation);
        const Matrix ikh = Matrix::identity(n) - gain * model.h;
        p = ikh * p * ikh.transposed() + gain * model.r * gain.transposed();
        trace.means.push_back(x);
        trace.covs.push_back(p);
    }
    return trace;
}

}  // namespace cdekf
