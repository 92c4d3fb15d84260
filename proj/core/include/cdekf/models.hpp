#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "cdekf/linalg.hpp"

namespace cdekf {

/// Continuous-discrete model contract: an SDE
///   dx = f(t, x) dt + G dw,   cov(dw) = Q dt
/// observed at discrete instants through z_k = h(k, x(t_k)) + v_k with
/// v_k ~ N(0, R), starting from x(0) ~ N(x0_mean, x0_cov).
///
/// Jacobians have finite-difference fallbacks; concrete models may override
/// them with analytic forms. Model objects are immutable and freely
/// shareable across threads.
class ModelSpec {
public:
    virtual ~ModelSpec() = default;

    virtual std::size_t state_dim() const = 0;
    virtual std::size_t meas_dim() const = 0;

    virtual Vector drift(double t, const Vector& x) const = 0;
    virtual Matrix drift_jacobian(double t, const Vector& x) const;

    virtual const Matrix& diffusion_g() const = 0;       // n x q
    virtual const Matrix& noise_intensity_q() const = 0; // q x q, SPD

    virtual Vector measurement(std::size_t k, const Vector& x) const = 0;
    virtual Matrix measurement_jacobian(std::size_t k, const Vector& x) const;

    virtual const Matrix& meas_cov_r() const = 0;  // m x m, SPD
    virtual const Vector& x0_mean() const = 0;
    virtual const Matrix& x0_cov() const = 0;      // n x n, SPD
};

/// Checks the mutual dimension invariants and that Q, R and the initial
/// covariance admit Cholesky factorizations. Throws std::invalid_argument
/// or NotPositiveDefiniteError. Concrete model constructors call this.
void validate_model(const ModelSpec& model);

/// G Q Gᵀ, the process-noise contribution to the covariance dynamics.
Matrix process_noise_matrix(const ModelSpec& model);

/// Gas-phase reversible reaction A <-> B + C, 2B <-> B + C in a well-mixed
/// isothermal CSTR. State = concentrations [c_A, c_B, c_C]; scalar
/// measurement RT * (c_A + c_B + c_C).
class CstrModel : public ModelSpec {
public:
    static constexpr double kK1 = 0.5;
    static constexpr double kK2 = 0.05;
    static constexpr double kK3 = 0.2;
    static constexpr double kK4 = 0.01;
    static constexpr double kQf = 1.0;
    static constexpr double kQ0 = 1.0;
    static constexpr double kVr = 100.0;
    static constexpr double kRt = 32.84;

    CstrModel();

    std::size_t state_dim() const override { return 3; }
    std::size_t meas_dim() const override { return 1; }
    Vector drift(double t, const Vector& x) const override;
    Matrix drift_jacobian(double t, const Vector& x) const override;
    const Matrix& diffusion_g() const override { return g_; }
    const Matrix& noise_intensity_q() const override { return q_; }
    Vector measurement(std::size_t k, const Vector& x) const override;
    Matrix measurement_jacobian(std::size_t k, const Vector& x) const override;
    const Matrix& meas_cov_r() const override { return r_; }
    const Vector& x0_mean() const override { return x0_mean_; }
    const Matrix& x0_cov() const override { return x0_cov_; }

private:
    Matrix g_, q_, r_, x0_cov_;
    Vector x0_mean_;
};

/// CSTR dynamics with the two-row measurement matrix RT*[1 1 1; 1 1 1+delta]
/// and noise covariance delta^2 * I2; delta drives the innovation covariance
/// toward singularity.
class CstrIllCondModel : public ModelSpec {
public:
    explicit CstrIllCondModel(double delta);

    double delta() const { return delta_; }

    std::size_t state_dim() const override { return 3; }
    std::size_t meas_dim() const override { return 2; }
    Vector drift(double t, const Vector& x) const override { return base_.drift(t, x); }
    Matrix drift_jacobian(double t, const Vector& x) const override {
        return base_.drift_jacobian(t, x);
    }
    const Matrix& diffusion_g() const override { return base_.diffusion_g(); }
    const Matrix& noise_intensity_q() const override { return base_.noise_intensity_q(); }
    Vector measurement(std::size_t k, const Vector& x) const override;
    Matrix measurement_jacobian(std::size_t, const Vector&) const override { return h_; }
    const Matrix& meas_cov_r() const override { return r_; }
    const Vector& x0_mean() const override { return base_.x0_mean(); }
    const Matrix& x0_cov() const override { return base_.x0_cov(); }

private:
    CstrModel base_;
    double delta_;
    Matrix h_, r_;
};

/// Stochastic Van der Pol oscillator, rescaled so the stiffness parameter
/// lambda multiplies the whole second drift component. Noise enters the
/// velocity component only (G = diag(0, 1), Q = I2); measurement x1 + x2.
class VanDerPolModel : public ModelSpec {
public:
    explicit VanDerPolModel(double lambda);

    double lambda() const { return lambda_; }

    std::size_t state_dim() const override { return 2; }
    std::size_t meas_dim() const override { return 1; }
    Vector drift(double t, const Vector& x) const override;
    Matrix drift_jacobian(double t, const Vector& x) const override;
    const Matrix& diffusion_g() const override { return g_; }
    const Matrix& noise_intensity_q() const override { return q_; }
    Vector measurement(std::size_t k, const Vector& x) const override;
    Matrix measurement_jacobian(std::size_t, const Vector&) const override { return h_; }
    const Matrix& meas_cov_r() const override { return r_; }
    const Vector& x0_mean() const override { return x0_mean_; }
    const Matrix& x0_cov() const override { return x0_cov_; }

private:
    double lambda_;
    Matrix g_, q_, h_, r_, x0_cov_;
    Vector x0_mean_;
};

/// Linear time-invariant model: drift A x, measurement H x, analytic
/// Jacobians. Exact-equivalence oracle for the filter tests.
class LtiModel : public ModelSpec {
public:
    LtiModel(Matrix a, Matrix h, Matrix g, Matrix q, Matrix r, Vector x0_mean, Matrix x0_cov);

    const Matrix& a() const { return a_; }
    const Matrix& h() const { return h_; }

    std::size_t state_dim() const override { return a_.rows(); }
    std::size_t meas_dim() const override { return h_.rows(); }
    Vector drift(double t, const Vector& x) const override;
    Matrix drift_jacobian(double, const Vector&) const override { return a_; }
    const Matrix& diffusion_g() const override { return g_; }
    const Matrix& noise_intensity_q() const override { return q_; }
    Vector measurement(std::size_t k, const Vector& x) const override;
    Matrix measurement_jacobian(std::size_t, const Vector&) const override { return h_; }
    const Matrix& meas_cov_r() const override { return r_; }
    const Vector& x0_mean() const override { return x0_mean_; }
    const Matrix& x0_cov() const override { return x0_cov_; }

private:
    Matrix a_, h_, g_, q_, r_, x0_cov_;
    Vector x0_mean_;
};

/// The canonical two-state LTI benchmark instance (damped oscillator with a
/// position measurement) selectable as "lti-test" from the CLI.
LtiModel make_lti_test_model();

}  // namespace cdekf
