#pragma once

#include <span>
#include <vector>

#include "cdekf/filters.hpp"
#include "cdekf/linalg.hpp"
#include "cdekf/models.hpp"

namespace cdekf {

/// Closed-form reference machinery for linear models. None of it shares the
/// continuous-discrete filter path: prediction goes through the matrix
/// exponential and the update through a Joseph-form recursion with its own
/// pivoted solver.

/// Matrix exponential by scaling-and-squaring with a Taylor series; intended
/// for the small dense systems of the test models.
Matrix expm(const Matrix& a);

struct DiscreteLti {
    Matrix f;   // state transition over one period
    Matrix qd;  // discrete process noise covariance
    Matrix h;
    Matrix r;
};

/// Exact discretization of dx = A x dt + noise with intensity G Q Gᵀ over a
/// period: F = e^{A dt}, Qd from the Van Loan block-exponential identity.
DiscreteLti discretize_lti(const Matrix& a, const Matrix& gqg, const Matrix& h, const Matrix& r,
                           double dt);

/// Covariance of the exact prediction P(t0 + dt) = F P0 Fᵀ + Qd for linear
/// drift; the closed-form counterpart of the moment equations.
Matrix lti_predicted_covariance(const Matrix& a, const Matrix& gqg, const Matrix& p0, double dt);

struct KalmanTrace {
    std::vector<Vector> means;   // posterior mean after each measurement
    std::vector<Matrix> covs;    // posterior covariance after each measurement
};

/// Exact discrete Kalman filter on equally-spaced measurements of a
/// discretized LTI model (Joseph-form covariance update).
KalmanTrace exact_kalman_filter(const DiscreteLti& model, const Vector& x0, const Matrix& p0,
                                std::span<const MeasurementRecord> measurements);

}  // namespace cdekf
