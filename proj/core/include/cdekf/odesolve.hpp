#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cdekf/errors.hpp"

namespace cdekf {

enum class OdeMethod {
    NonstiffRk45,   // explicit embedded Runge-Kutta 4(5) pair
    StiffImplicit,  // L-stable linearly-implicit 2(3) pair, FD Jacobian
};

/// Integration options. The defaults mirror the solver configuration the
/// filters run with: AbsTol = RelTol = 1e-4, MaxStep = 0.1.
struct OdeOptions {
    double abs_tol = 1e-4;
    double rel_tol = 1e-4;
    double max_step = 0.1;
    std::optional<double> initial_step;
    OdeMethod method = OdeMethod::NonstiffRk45;
};

struct OdeStats {
    long accepted_steps = 0;
    long rejected_steps = 0;
    long rhs_evaluations = 0;
    long jacobian_evaluations = 0;  // stiff method only

    long attempted_steps() const { return accepted_steps + rejected_steps; }
    OdeStats& operator+=(const OdeStats& other);
};

enum class OdeStatus {
    Ok,
    RhsFailure,     // the right-hand side raised a NumericError
    StepUnderflow,  // controller drove the step below 1e-14 * span
};

struct OdeResult {
    std::vector<double> y_end;
    OdeStats stats;
    OdeStatus status = OdeStatus::Ok;
    double failure_time = 0.0;
    std::optional<FailureCause> failure_cause;

    bool ok() const { return status == OdeStatus::Ok; }
};

/// Right-hand side contract: writes y'(t) into `dydt`. May throw
/// NumericError; the integrator converts that into an RhsFailure result.
using OdeRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// Called after every accepted step with the new time and the step length;
/// test hook for step-size assertions.
using StepObserver = std::function<void(double t_new, double step)>;

/// Integrates y' = rhs(t, y) from t_a to t_b with mixed absolute/relative
/// local error control: a step is accepted when the RMS of
/// e_i / (abs_tol + rel_tol * max(|y_i|, |y_i_new|)) is at most one.
/// Steps never exceed opts.max_step. Deterministic for fixed inputs.
OdeResult integrate(const OdeRhs& rhs, std::span<const double> y0, double t_a, double t_b,
                    const OdeOptions& opts, const StepObserver& observer = nullptr);

}  // namespace cdekf
