#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cdekf/models.hpp"
#include "cdekf/sim.hpp"

using namespace cdekf;

TEST_CASE("cstr drift at the feed concentration") {
    const CstrModel model;
    // r = [0.25, 0.0005]; the flow terms cancel because x equals the feed.
    const Vector f = model.drift(0.0, {0.5, 0.05, 0.0});
    CHECK(f[0] == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(0.249).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(0.2505).epsilon(1e-12));
}

TEST_CASE("cstr drift at zero is pure inflow") {
    const CstrModel model;
    const Vector f = model.drift(0.0, {0.0, 0.0, 0.0});
    CHECK(f[0] == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(0.0005).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(0.0));
}

TEST_CASE("cstr reaction-rate signs") {
    const CstrModel model;
    // x = [0, 1, 1]: r1 = -0.05, r2 = 0.19
    const Vector x{0.0, 1.0, 1.0};
    const Vector f = model.drift(0.0, x);
    CHECK(f[0] == doctest::Approx(0.005 - 0.0 + 0.05).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(0.0005 - 0.01 - 0.05 - 2.0 * 0.19).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(0.0 - 0.01 - 0.05 + 0.19).epsilon(1e-12));
}

TEST_CASE("cstr measurement sums concentrations under RT") {
    const CstrModel model;
    CHECK(model.measurement(1, {0.5, 0.05, 0.0})[0] == doctest::Approx(18.062).epsilon(1e-12));
    CHECK(model.measurement(1, {0.0, 0.0, 0.0})[0] == 0.0);
    CHECK(model.meas_cov_r()(0, 0) == doctest::Approx(0.0625));
}

TEST_CASE("cstr measurement is linear") {
    const CstrModel model;
    const Vector x{0.1, 0.2, 0.3};
    const Vector y{-0.05, 0.4, 0.07};
    const double hx = model.measurement(1, x)[0];
    const double hy = model.measurement(1, y)[0];
    const double hxy = model.measurement(1, vec_add(x, y))[0];
    CHECK(hxy == doctest::Approx(hx + hy).epsilon(1e-12));
}

TEST_CASE("ill-conditioned measurement rows") {
    SUBCASE("delta = 1 picks out the first column") {
        const CstrIllCondModel model(1.0);
        const Vector z = model.measurement(1, {1.0, 0.0, 0.0});
        CHECK(z[0] == doctest::Approx(CstrModel::kRt));
        CHECK(z[1] == doctest::Approx(CstrModel::kRt));
    }
    SUBCASE("delta = 1e-3 perturbs only the third component") {
        const CstrIllCondModel model(1e-3);
        const Vector z = model.measurement(1, {0.0, 0.0, 1.0});
        CHECK(z[0] == doctest::Approx(32.84).epsilon(1e-12));
        CHECK(z[1] == doctest::Approx(32.87284).epsilon(1e-12));
        CHECK(model.meas_cov_r()(0, 0) == doctest::Approx(1e-6));
    }
    SUBCASE("rows coincide in the degenerate limit") {
        // delta = 0 itself is rejected (R would be singular); the rows of H
        // differ exactly by RT*delta*x3.
        const CstrIllCondModel model(1e-9);
        const Vector z = model.measurement(1, {0.3, 0.4, 0.5});
        CHECK(z[1] - z[0] == doctest::Approx(CstrModel::kRt * 1e-9 * 0.5).epsilon(1e-6));
        CHECK_THROWS_AS(CstrIllCondModel(0.0), std::invalid_argument);
    }
}

TEST_CASE("van der pol drift values") {
    CHECK(VanDerPolModel(1.0).drift(0.0, {2.0, 0.0})[1] == doctest::Approx(-2.0));
    CHECK(VanDerPolModel(1.0).drift(0.0, {2.0, 0.0})[0] == doctest::Approx(0.0));
    const Vector eq = VanDerPolModel(5.0).drift(0.0, {0.0, 0.0});
    CHECK(eq[0] == 0.0);
    CHECK(eq[1] == 0.0);
    const Vector f = VanDerPolModel(10.0).drift(0.0, {0.0, 1.0});
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(10.0));
}

TEST_CASE("van der pol noise enters the velocity only") {
    const VanDerPolModel model(1.0);
    const Matrix gqg = process_noise_matrix(model);
    CHECK(gqg(0, 0) == 0.0);
    CHECK(gqg(0, 1) == 0.0);
    CHECK(gqg(1, 1) == doctest::Approx(1.0));
    CHECK(model.meas_cov_r()(0, 0) == doctest::Approx(0.04));
    CHECK(model.x0_mean()[0] == 2.0);
    CHECK(model.x0_cov()(0, 0) == doctest::Approx(0.1));
}

TEST_CASE("lti model is linear with exact jacobians") {
    const LtiModel model = make_lti_test_model();
    const Vector f = model.drift(0.0, {1.0, 0.0});
    CHECK(f[0] == doctest::Approx(0.0));
    CHECK(f[1] == doctest::Approx(-1.0));

    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector x{rng.next_normal(), rng.next_normal()};
        const Matrix j = model.drift_jacobian(0.0, x);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t k = 0; k < 2; ++k) CHECK(j(i, k) == model.a()(i, k));
        }
    }
}

TEST_CASE("finite-difference jacobian matches the analytic one") {
    const CstrModel model;
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x{0.5 + 0.2 * rng.next_normal(), 0.05 + 0.02 * rng.next_normal(),
                       0.1 + 0.05 * rng.next_normal()};
        const Matrix analytic = model.drift_jacobian(0.0, x);
        const Matrix fd = model.ModelSpec::drift_jacobian(0.0, x);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                const double scale = std::max(std::abs(analytic(i, j)), 1.0);
                CHECK(std::abs(fd(i, j) - analytic(i, j)) / scale <= 1e-6);
            }
        }
    }
}

TEST_CASE("finite-difference measurement jacobian fallback") {
    const CstrModel model;
    const Matrix fd = model.ModelSpec::measurement_jacobian(1, {0.4, 0.1, 0.05});
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(fd(0, j) == doctest::Approx(CstrModel::kRt).epsilon(1e-7));
    }
}

TEST_CASE("model validation rejects inconsistent dimensions") {
    CHECK_THROWS_AS(LtiModel(Matrix::identity(2), Matrix(1, 3, {1.0, 0.0, 0.0}),
                             Matrix::identity(2), Matrix::identity(2), Matrix::identity(1),
                             Vector{0.0, 0.0}, Matrix::identity(2)),
                    std::invalid_argument);
    // non-SPD measurement covariance
    CHECK_THROWS_AS(LtiModel(Matrix::identity(2), Matrix(1, 2, {1.0, 0.0}), Matrix::identity(2),
                             Matrix::identity(2), Matrix::diagonal({-1.0}), Vector{0.0, 0.0},
                             Matrix::identity(2)),
                    NotPositiveDefiniteError);
}
