#include <doctest.h>

#include <cmath>
#include <vector>

#include "cdekf/odesolve.hpp"

using namespace cdekf;

namespace {

const OdeRhs kZeroRhs = [](double, std::span<const double>, std::span<double> dydt) {
    for (double& v : dydt) v = 0.0;
};

const OdeRhs kDecayRhs = [](double, std::span<const double> y, std::span<double> dydt) {
    dydt[0] = -y[0];
};

OdeOptions options(double let, OdeMethod method = OdeMethod::NonstiffRk45) {
    OdeOptions opts;
    opts.abs_tol = let;
    opts.rel_tol = let;
    opts.method = method;
    return opts;
}

}  // namespace

TEST_CASE("constant solution passes through unchanged") {
    const std::vector<double> y0{1.0, 2.0, 3.0};
    const OdeResult res = integrate(kZeroRhs, y0, 0.0, 2.5, options(1e-6));
    REQUIRE(res.ok());
    CHECK(res.stats.accepted_steps >= 1);
    for (std::size_t i = 0; i < y0.size(); ++i) CHECK(res.y_end[i] == y0[i]);
}

TEST_CASE("exponential decay hits the closed form") {
    const std::vector<double> y0{1.0};
    for (const OdeMethod method : {OdeMethod::NonstiffRk45, OdeMethod::StiffImplicit}) {
        const OdeResult res = integrate(kDecayRhs, y0, 0.0, 1.0, options(1e-8, method));
        REQUIRE(res.ok());
        CHECK(std::abs(res.y_end[0] - std::exp(-1.0)) <= 1e-6);
    }
}

TEST_CASE("rotation through pi lands on the antipode") {
    const OdeRhs rot = [](double, std::span<const double> y, std::span<double> dydt) {
        dydt[0] = y[1];
        dydt[1] = -y[0];
    };
    const std::vector<double> y0{1.0, 0.0};
    const OdeResult res = integrate(rot, y0, 0.0, std::acos(-1.0), options(1e-8));
    REQUIRE(res.ok());
    CHECK(std::abs(res.y_end[0] - (-1.0)) <= 1e-5);
    CHECK(std::abs(res.y_end[1]) <= 1e-5);
}

TEST_CASE("halving the tolerance never doubles the terminal error") {
    const std::vector<double> y0{1.0};
    const double exact = std::exp(-1.0);
    for (int e = 3; e <= 10; ++e) {
        const double let = std::pow(10.0, -e);
        const OdeResult coarse = integrate(kDecayRhs, y0, 0.0, 1.0, options(let));
        const OdeResult fine = integrate(kDecayRhs, y0, 0.0, 1.0, options(let / 2.0));
        REQUIRE(coarse.ok());
        REQUIRE(fine.ok());
        const double err_coarse = std::abs(coarse.y_end[0] - exact);
        const double err_fine = std::abs(fine.y_end[0] - exact);
        CHECK(err_fine <= 2.0 * err_coarse + 1e-15);
    }
}

TEST_CASE("accepted steps obey max_step") {
    OdeOptions opts = options(1e-4);
    opts.max_step = 0.05;
    double largest = 0.0;
    long observed = 0;
    const StepObserver observer = [&](double, double h) {
        largest = std::max(largest, h);
        ++observed;
    };
    const std::vector<double> y0{1.0};
    const OdeResult res = integrate(kDecayRhs, y0, 0.0, 3.0, opts, observer);
    REQUIRE(res.ok());
    CHECK(observed == res.stats.accepted_steps);
    CHECK(largest <= opts.max_step + 1e-15);
    CHECK(res.stats.accepted_steps >= 60);  // span/max_step lower bound
}

TEST_CASE("initial step override is honored") {
    OdeOptions opts = options(1e-6);
    opts.initial_step = 1e-3;
    double first = 0.0;
    const StepObserver observer = [&](double, double h) {
        if (first == 0.0) first = h;
    };
    const std::vector<double> y0{1.0};
    const OdeResult res = integrate(kDecayRhs, y0, 0.0, 1.0, opts, observer);
    REQUIRE(res.ok());
    CHECK(first <= 1e-3 + 1e-15);
}

TEST_CASE("stiff capability on the forced decay problem") {
    const double lambda = 1e4;
    const OdeRhs stiff = [&](double t, std::span<const double> y, std::span<double> dydt) {
        dydt[0] = -lambda * (y[0] - std::cos(t));
    };
    const std::vector<double> y0{0.0};
    const OdeResult implicit =
        integrate(stiff, y0, 0.0, 1.0, options(1e-4, OdeMethod::StiffImplicit));
    REQUIRE(implicit.ok());
    CHECK(implicit.stats.accepted_steps < 500);
    CHECK(implicit.stats.jacobian_evaluations > 0);

    OdeOptions explicit_opts = options(1e-4);
    explicit_opts.max_step = 1.0;  // leave the stability limit in charge
    const OdeResult rk = integrate(stiff, y0, 0.0, 1.0, explicit_opts);
    REQUIRE(rk.ok());
    // The explicit pair is stability-limited to steps of roughly 3.3/lambda,
    // so it grinds through thousands of attempts where the implicit method
    // needs dozens.
    CHECK(rk.stats.attempted_steps() > 3000);
    CHECK(rk.stats.attempted_steps() > 10 * implicit.stats.attempted_steps());
    CHECK(rk.stats.rhs_evaluations > 10000);
    CHECK(std::abs(rk.y_end[0] - implicit.y_end[0]) <= 1e-3);
}

TEST_CASE("rhs failures surface with cause and time") {
    const OdeRhs failing = [](double t, std::span<const double> y, std::span<double> dydt) {
        if (t > 0.5) throw SingularFactorError(0);
        dydt[0] = -y[0];
    };
    const std::vector<double> y0{1.0};
    const OdeResult res = integrate(failing, y0, 0.0, 1.0, options(1e-6));
    CHECK(res.status == OdeStatus::RhsFailure);
    CHECK(res.failure_cause == FailureCause::SingularFactor);
    CHECK(res.failure_time > 0.45);
}

TEST_CASE("non-finite right-hand sides drive the step to underflow") {
    const OdeRhs nan_after_half = [](double t, std::span<const double> y, std::span<double> dydt) {
        dydt[0] = t > 0.5 ? std::nan("") : -y[0];
    };
    const std::vector<double> y0{1.0};
    const OdeResult res = integrate(nan_after_half, y0, 0.0, 1.0, options(1e-6));
    CHECK(res.status == OdeStatus::StepUnderflow);
    CHECK(res.failure_cause == FailureCause::StepUnderflow);
    CHECK(res.failure_time == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("invalid arguments are rejected") {
    const std::vector<double> y0{1.0};
    CHECK_THROWS_AS(integrate(kZeroRhs, y0, 1.0, 1.0, options(1e-6)), std::invalid_argument);
    OdeOptions bad = options(1e-6);
    bad.abs_tol = 0.0;
    CHECK_THROWS_AS(integrate(kZeroRhs, y0, 0.0, 1.0, bad), std::invalid_argument);
    const std::vector<double> bad_y0{std::nan("")};
    CHECK_THROWS_AS(integrate(kZeroRhs, bad_y0, 0.0, 1.0, options(1e-6)),
                    std::invalid_argument);
}
