#include "cdekf/odesolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdekf {

OdeStats& OdeStats::operator+=(const OdeStats& other) {
    accepted_steps += other.accepted_steps;
    rejected_steps += other.rejected_steps;
    rhs_evaluations += other.rhs_evaluations;
    jacobian_evaluations += other.jacobian_evaluations;
    return *this;
}

namespace {

constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;
constexpr double kSafety = 0.9;
constexpr double kUnderflowFraction = 1e-14;

struct RhsThrew {
    double time;
    FailureCause cause;
};

// Wraps the user rhs so evaluation failures carry the stage time and every
// call is counted.
class CountingRhs {
public:
    CountingRhs(const OdeRhs& rhs, OdeStats& stats) : rhs_(rhs), stats_(stats) {}

    void operator()(double t, std::span<const double> y, std::span<double> dydt) const {
        ++stats_.rhs_evaluations;
        try {
            rhs_(t, y, dydt);
        } catch (const NumericError& e) {
            throw RhsThrew{t, e.cause()};
        }
    }

private:
    const OdeRhs& rhs_;
    OdeStats& stats_;
};

double weighted_rms(std::span<const double> err, std::span<const double> y,
                    std::span<const double> y_new, double abs_tol, double rel_tol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        const double scale = abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
        const double r = err[i] / scale;
        sum += r * r;
    }
    const double rms = std::sqrt(sum / static_cast<double>(err.size()));
    return std::isfinite(rms) ? rms : std::numeric_limits<double>::infinity();
}

// Dormand-Prince 4(5) tableau (the ode45 pair).
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th-order weights coincide with the last tableau row (FSAL).
constexpr double kE[7] = {71.0 / 57600, 0.0,           -71.0 / 16695, 71.0 / 1920,
                          -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

class Dopri45Stepper {
public:
    Dopri45Stepper(const CountingRhs& rhs, std::size_t n) : rhs_(rhs), n_(n) {
        for (auto& k : k_) k.assign(n, 0.0);
        y_stage_.assign(n, 0.0);
    }

    double error_exponent() const { return 1.0 / 5.0; }

    void prime(double t, std::span<const double> y) {
        rhs_(t, y, k_[0]);
        primed_ = true;
    }

    // Attempts one step; fills y_new and err. The trailing stage is the rhs
    // at (t + h, y_new), reused as the first stage of the next step.
    void attempt(double t, double h, std::span<const double> y, std::vector<double>& y_new,
                 std::vector<double>& err) {
        if (!primed_) prime(t, y);
        for (std::size_t s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < n_; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < s; ++j) acc += kA[s][j] * k_[j][i];
                y_stage_[i] = y[i] + h * acc;
            }
            if (s == 6) {
                y_new = y_stage_;
                rhs_(t + kC[6] * h, y_new, k_[6]);
            } else {
                rhs_(t + kC[s] * h, y_stage_, k_[s]);
            }
        }
        err.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double acc = 0.0;
            for (std::size_t s = 0; s < 7; ++s) acc += kE[s] * k_[s][i];
            err[i] = h * acc;
        }
    }

    void on_accept() {
        k_[0] = k_[6];  // FSAL
    }

    void on_reject() {}

private:
    const CountingRhs& rhs_;
    std::size_t n_;
    std::vector<double> k_[7];
    std::vector<double> y_stage_;
    bool primed_ = false;
};

// Dense LU with partial pivoting, for the stage systems of the implicit
// method only.
class LuFactors {
public:
    explicit LuFactors(std::vector<double> a, std::size_t n) : a_(std::move(a)), n_(n), piv_(n) {
        for (std::size_t i = 0; i < n_; ++i) piv_[i] = i;
        for (std::size_t k = 0; k < n_; ++k) {
            std::size_t p = k;
            double best = std::abs(at(k, k));
            for (std::size_t i = k + 1; i < n_; ++i) {
                const double v = std::abs(at(i, k));
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (!(best > 0.0) || !std::isfinite(best)) {
                singular_ = true;
                return;
            }
            if (p != k) {
                std::swap(piv_[p], piv_[k]);
                for (std::size_t j = 0; j < n_; ++j) std::swap(at(p, j), at(k, j));
            }
            for (std::size_t i = k + 1; i < n_; ++i) {
                at(i, k) /= at(k, k);
                const double f = at(i, k);
                for (std::size_t j = k + 1; j < n_; ++j) at(i, j) -= f * at(k, j);
            }
        }
    }

    bool singular() const { return singular_; }

    void solve(std::span<const double> b, std::vector<double>& x) const {
        x.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) x[i] = b[piv_[i]];
        for (std::size_t i = 1; i < n_; ++i) {
            for (std::size_t j = 0; j < i; ++j) x[i] -= at(i, j) * x[j];
        }
        for (std::size_t ii = n_; ii-- > 0;) {
            for (std::size_t j = ii + 1; j < n_; ++j) x[ii] -= at(ii, j) * x[j];
            x[ii] /= at(ii, ii);
        }
    }

private:
    std::vector<double> a_;  // row-major
    std::size_t n_;
    std::vector<std::size_t> piv_;
    bool singular_ = false;

    double& at(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
};

struct SingularIterationMatrix {};

// Modified Rosenbrock pair of order 2 with a 3rd-order error companion
// (the ode23s scheme): L-stable, one LU factorization per step, Jacobian
// by forward differences with perturbation sqrt(ulp) * max(|y_i|, 1).
class Rosenbrock23Stepper {
public:
    Rosenbrock23Stepper(const CountingRhs& rhs, std::size_t n, OdeStats& stats)
        : rhs_(rhs), n_(n), stats_(stats) {
        f0_.assign(n, 0.0);
        jac_.assign(n * n, 0.0);
        dfdt_.assign(n, 0.0);
    }

    double error_exponent() const { return 1.0 / 3.0; }

    void prime(double t, std::span<const double> y) {
        rhs_(t, y, f0_);
        primed_ = true;
    }

    void attempt(double t, double h, std::span<const double> y, std::vector<double>& y_new,
                 std::vector<double>& err) {
        if (!primed_) prime(t, y);
        if (!jac_fresh_) {
            build_jacobian(t, y);
            jac_fresh_ = true;
        }

        const double d = 1.0 / (2.0 + std::sqrt(2.0));
        const double e32 = 6.0 + std::sqrt(2.0);

        // W = I - h*d*J
        std::vector<double> w(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                w[i * n_ + j] = (i == j ? 1.0 : 0.0) - h * d * jac_[i * n_ + j];
            }
        }
        LuFactors lu(std::move(w), n_);
        if (lu.singular()) throw SingularIterationMatrix{};

        std::vector<double> rhs1(n_), k1, f1(n_), rhs2(n_), k2, f2(n_), rhs3(n_), k3;
        for (std::size_t i = 0; i < n_; ++i) rhs1[i] = f0_[i] + h * d * dfdt_[i];
        lu.solve(rhs1, k1);

        std::vector<double> y_half(n_);
        for (std::size_t i = 0; i < n_; ++i) y_half[i] = y[i] + 0.5 * h * k1[i];
        rhs_(t + 0.5 * h, y_half, f1);

        for (std::size_t i = 0; i < n_; ++i) rhs2[i] = f1[i] - k1[i];
        lu.solve(rhs2, k2);
        for (std::size_t i = 0; i < n_; ++i) k2[i] += k1[i];

        y_new.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) y_new[i] = y[i] + h * k2[i];
        rhs_(t + h, y_new, f2);

        for (std::size_t i = 0; i < n_; ++i) {
            rhs3[i] = f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0_[i]) + h * d * dfdt_[i];
        }
        lu.solve(rhs3, k3);

        err.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            err[i] = (h / 6.0) * (k1[i] - 2.0 * k2[i] + k3[i]);
        }
        f2_ = f2;
    }

    void on_accept() {
        f0_ = f2_;       // rhs at the new point is already available
        jac_fresh_ = false;
    }

    void on_reject() {}  // same (t, y): the Jacobian stays valid

private:
    const CountingRhs& rhs_;
    std::size_t n_;
    OdeStats& stats_;
    std::vector<double> f0_, f2_, jac_, dfdt_;
    bool primed_ = false;
    bool jac_fresh_ = false;

    void build_jacobian(double t, std::span<const double> y) {
        ++stats_.jacobian_evaluations;
        const double sqrt_ulp = std::sqrt(std::numeric_limits<double>::epsilon());
        std::vector<double> y_pert(y.begin(), y.end());
        std::vector<double> f_pert(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double delta = sqrt_ulp * std::max(std::abs(y[j]), 1.0);
            y_pert[j] = y[j] + delta;
            rhs_(t, y_pert, f_pert);
            y_pert[j] = y[j];
            for (std::size_t i = 0; i < n_; ++i) {
                jac_[i * n_ + j] = (f_pert[i] - f0_[i]) / delta;
            }
        }
        const double dt = sqrt_ulp * std::max(std::abs(t), 1.0);
        rhs_(t + dt, y, f_pert);
        for (std::size_t i = 0; i < n_; ++i) dfdt_[i] = (f_pert[i] - f0_[i]) / dt;
    }
};

template <typename Stepper>
OdeResult run_loop(Stepper& stepper, std::span<const double> y0, double t_a, double t_b,
                   const OdeOptions& opts, const StepObserver& observer, OdeResult&& result) {
    const double span = t_b - t_a;
    const double h_min = kUnderflowFraction * span;
    double h = opts.initial_step ? std::min(*opts.initial_step, opts.max_step)
                                 : std::min(opts.max_step, 0.01 * span);
    double t = t_a;
    std::vector<double> y(y0.begin(), y0.end());
    std::vector<double> y_new, err;

    bool rejected_last = false;
    while (t < t_b) {
        const bool final_step = (t_b - t) <= h;
        const double h_try = final_step ? (t_b - t) : h;
        try {
            stepper.attempt(t, h_try, y, y_new, err);
        } catch (const RhsThrew& f) {
            result.status = OdeStatus::RhsFailure;
            result.failure_time = f.time;
            result.failure_cause = f.cause;
            result.y_end = std::move(y);
            return std::move(result);
        } catch (const SingularIterationMatrix&) {
            ++result.stats.rejected_steps;
            rejected_last = true;
            h = h_try * kMinFactor;
            if (h < h_min) {
                result.status = OdeStatus::StepUnderflow;
                result.failure_time = t;
                result.failure_cause = FailureCause::StepUnderflow;
                result.y_end = std::move(y);
                return std::move(result);
            }
            continue;
        }
        const double rms = weighted_rms(err, y, y_new, opts.abs_tol, opts.rel_tol);
        if (rms <= 1.0) {
            t = final_step ? t_b : t + h_try;
            y.swap(y_new);
            ++result.stats.accepted_steps;
            stepper.on_accept();
            if (observer) observer(t, h_try);
            double factor = kSafety * std::pow(std::max(rms, 1e-16), -stepper.error_exponent());
            factor = std::clamp(factor, kMinFactor, kMaxFactor);
            if (rejected_last) factor = std::min(factor, 1.0);
            rejected_last = false;
            h = std::min(h_try * factor, opts.max_step);
        } else {
            ++result.stats.rejected_steps;
            stepper.on_reject();
            rejected_last = true;
            double factor = kSafety * std::pow(rms, -stepper.error_exponent());
            factor = std::clamp(factor, kMinFactor, 1.0);
            h = h_try * factor;
        }
        if (h < h_min) {
            result.status = OdeStatus::StepUnderflow;
            result.failure_time = t;
            result.failure_cause = FailureCause::StepUnderflow;
            result.y_end = std::move(y);
            return std::move(result);
        }
    }
    result.y_end = std::move(y);
    return std::move(result);
}

}  // namespace

OdeResult integrate(const OdeRhs& rhs, std::span<const double> y0, double t_a, double t_b,
                    const OdeOptions& opts, const StepObserver& observer) {
    if (!(t_b > t_a)) {
        throw std::invalid_argument("integrate requires t_b > t_a");
    }
    if (!(opts.abs_tol > 0.0) || !(opts.rel_tol > 0.0) || !(opts.max_step > 0.0)) {
        throw std::invalid_argument("integrate requires positive tolerances and max_step");
    }
    for (double v : y0) {
        if (!std::isfinite(v)) throw std::invalid_argument("integrate requires finite y0");
    }

    OdeResult result;
    CountingRhs counting(rhs, result.stats);
    try {
        if (opts.method == OdeMethod::NonstiffRk45) {
            Dopri45Stepper stepper(counting, y0.size());
            return run_loop(stepper, y0, t_a, t_b, opts, observer, std::move(result));
        }
        Rosenbrock23Stepper stepper(counting, y0.size(), result.stats);
        return run_loop(stepper, y0, t_a, t_b, opts, observer, std::move(result));
    } catch (const RhsThrew& f) {
        // Failure during the priming evaluation at (t_a, y0).
        result.status = OdeStatus::RhsFailure;
        result.failure_time = f.time;
        result.failure_cause = f.cause;
        result.y_end.assign(y0.begin(), y0.end());
        return result;
    }
}

}  // namespace cdekf
