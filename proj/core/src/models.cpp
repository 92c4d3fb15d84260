#include "cdekf/models.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdekf {

Matrix ModelSpec::drift_jacobian(double t, const Vector& x) const {
    const Vector f0 = drift(t, x);
    const std::size_t n = state_dim();
    const double sqrt_ulp = std::sqrt(std::numeric_limits<double>::epsilon());
    Matrix j(n, n);
    Vector x_pert = x;
    for (std::size_t col = 0; col < n; ++col) {
        const double delta = sqrt_ulp * std::max(std::abs(x[col]), 1.0);
        x_pert[col] = x[col] + delta;
        const Vector f1 = drift(t, x_pert);
        x_pert[col] = x[col];
        for (std::size_t row = 0; row < n; ++row) {
            j(row, col) = (f1[row] - f0[row]) / delta;
        }
    }
    return j;
}

Matrix ModelSpec::measurement_jacobian(std::size_t k, const Vector& x) const {
    const Vector h0 = measurement(k, x);
    const std::size_t n = state_dim();
    const std::size_t m = meas_dim();
    const double sqrt_ulp = std::sqrt(std::numeric_limits<double>::epsilon());
    Matrix j(m, n);
    Vector x_pert = x;
    for (std::size_t col = 0; col < n; ++col) {
        const double delta = sqrt_ulp * std::max(std::abs(x[col]), 1.0);
        x_pert[col] = x[col] + delta;
        const Vector h1 = measurement(k, x_pert);
        x_pert[col] = x[col];
        for (std::size_t row = 0; row < m; ++row) {
            j(row, col) = (h1[row] - h0[row]) / delta;
        }
    }
    return j;
}

void validate_model(const ModelSpec& model) {
    const std::size_t n = model.state_dim();
    const std::size_t m = model.meas_dim();
    if (n == 0 || m == 0) {
        throw std::invalid_argument("model dimensions must be positive");
    }
    const Matrix& g = model.diffusion_g();
    const Matrix& q = model.noise_intensity_q();
    if (g.rows() != n || q.rows() != q.cols() || g.cols() != q.rows()) {
        throw std::invalid_argument("diffusion/noise dimensions inconsistent");
    }
    if (model.meas_cov_r().rows() != m || model.meas_cov_r().cols() != m) {
        throw std::invalid_argument("measurement covariance dimension inconsistent");
    }
    if (model.x0_mean().size() != n || model.x0_cov().rows() != n || model.x0_cov().cols() != n) {
        throw std::invalid_argument("initial law dimensions inconsistent");
    }
    cholesky_lower(model.noise_intensity_q());
    cholesky_lower(model.meas_cov_r());
    cholesky_lower(model.x0_cov());
}

Matrix process_noise_matrix(const ModelSpec& model) {
    const Matrix& g = model.diffusion_g();
    return g * model.noise_intensity_q() * g.transposed();
}

namespace {

// Continuous-time process noise intensity chosen so the truth simulation at
// step 1e-3 injects a per-step variance of 1e-6 per component.
constexpr double kCstrNoiseIntensity = 1e-3;

}  // namespace

CstrModel::CstrModel()
    : g_(Matrix::identity(3)),
      q_(Matrix::diagonal({kCstrNoiseIntensity, kCstrNoiseIntensity, kCstrNoiseIntensity})),
      r_(Matrix::diagonal({0.25 * 0.25})),
      x0_cov_(Matrix::identity(3)),
      x0_mean_{0.5, 0.05, 0.0} {
    validate_model(*this);
}

Vector CstrModel::drift(double /*t*/, const Vector& x) const {
    if (x.size() != 3) throw std::invalid_argument("cstr drift expects a 3-vector");
    const double ca = x[0], cb = x[1], cc = x[2];
    const double r1 = kK1 * ca - kK2 * cb * cc;
    const double r2 = kK3 * cb * cb - kK4 * cc;
    // inflow (feed = x0_mean) - outflow + stoichiometry * rates
    Vector f(3);
    f[0] = (kQf / kVr) * x0_mean_[0] - (kQ0 / kVr) * ca - r1;
    f[1] = (kQf / kVr) * x0_mean_[1] - (kQ0 / kVr) * cb + r1 - 2.0 * r2;
    f[2] = (kQf / kVr) * x0_mean_[2] - (kQ0 / kVr) * cc + r1 + r2;
    return f;
}

Matrix CstrModel::drift_jacobian(double /*t*/, const Vector& x) const {
    const double cb = x[1], cc = x[2];
    // dr1 = [k1, -k2*cc, -k2*cb], dr2 = [0, 2*k3*cb, -k4]
    Matrix j(3, 3);
    const double flow = -kQ0 / kVr;
    j(0, 0) = flow - kK1;
    j(0, 1) = kK2 * cc;
    j(0, 2) = kK2 * cb;
    j(1, 0) = kK1;
    j(1, 1) = flow - kK2 * cc - 4.0 * kK3 * cb;
    j(1, 2) = -kK2 * cb + 2.0 * kK4;
    j(2, 0) = kK1;
    j(2, 1) = -kK2 * cc + 2.0 * kK3 * cb;
    j(2, 2) = flow - kK2 * cb - kK4;
    return j;
}

Vector CstrModel::measurement(std::size_t /*k*/, const Vector& x) const {
    return {kRt * (x[0] + x[1] + x[2])};
}

Matrix CstrModel::measurement_jacobian(std::size_t /*k*/, const Vector& /*x*/) const {
    return Matrix(1, 3, {kRt, kRt, kRt});
}

CstrIllCondModel::CstrIllCondModel(double delta)
    : delta_(delta),
      h_(2, 3,
         {CstrModel::kRt, CstrModel::kRt, CstrModel::kRt,
          CstrModel::kRt, CstrModel::kRt, CstrModel::kRt * (1.0 + delta)}),
      r_(Matrix::diagonal({delta * delta, delta * delta})) {
    if (!(delta > 0.0) || !std::isfinite(delta)) {
        throw std::invalid_argument("ill-conditioning parameter must be positive and finite");
    }
    validate_model(*this);
}

Vector CstrIllCondModel::measurement(std::size_t /*k*/, const Vector& x) const {
    return h_ * x;
}

VanDerPolModel::VanDerPolModel(double lambda)
    : lambda_(lambda),
      g_(2, 2, {0.0, 0.0, 0.0, 1.0}),
      q_(Matrix::identity(2)),
      h_(1, 2, {1.0, 1.0}),
      r_(Matrix::diagonal({0.04})),
      x0_cov_(Matrix::diagonal({0.1, 0.1})),
      x0_mean_{2.0, 0.0} {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("stiffness parameter must be finite and nonnegative");
    }
    validate_model(*this);
}

Vector VanDerPolModel::drift(double /*t*/, const Vector& x) const {
    if (x.size() != 2) throw std::invalid_argument("van der pol drift expects a 2-vector");
    return {x[1], lambda_ * ((1.0 - x[0] * x[0]) * x[1] - x[0])};
}

Matrix VanDerPolModel::drift_jacobian(double /*t*/, const Vector& x) const {
    Matrix j(2, 2);
    j(0, 0) = 0.0;
    j(0, 1) = 1.0;
    j(1, 0) = lambda_ * (-2.0 * x[0] * x[1] - 1.0);
    j(1, 1) = lambda_ * (1.0 - x[0] * x[0]);
    return j;
}

Vector VanDerPolModel::measurement(std::size_t /*k*/, const Vector& x) const {
    return {x[0] + x[1]};
}

LtiModel::LtiModel(Matrix a, Matrix h, Matrix g, Matrix q, Matrix r, Vector x0_mean, Matrix x0_cov)
    : a_(std::move(a)),
      h_(std::move(h)),
      g_(std::move(g)),
      q_(std::move(q)),
      r_(std::move(r)),
      x0_cov_(std::move(x0_cov)),
      x0_mean_(std::move(x0_mean)) {
    if (a_.rows() != a_.cols() || h_.cols() != a_.rows()) {
        throw std::invalid_argument("lti model dimensions inconsistent");
    }
    validate_model(*this);
}

Vector LtiModel::drift(double /*t*/, const Vector& x) const { return a_ * x; }

Vector LtiModel::measurement(std::size_t /*k*/, const Vector& x) const { return h_ * x; }

LtiModel make_lti_test_model() {
    return LtiModel(Matrix(2, 2, {0.0, 1.0, -1.0, -0.4}),  // A
                    Matrix(1, 2, {1.0, 0.0}),              // H
                    Matrix::identity(2),                   // G
                    Matrix::diagonal({0.05, 0.05}),        // Q
                    Matrix::diagonal({0.04}),              // R
                    Vector{1.0, 0.0},                      // x0 mean
                    Matrix::diagonal({0.5, 0.5}));         // x0 covariance
}

}  // namespace cdekf
