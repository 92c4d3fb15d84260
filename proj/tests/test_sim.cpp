#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdekf/oracle.hpp"
#include "cdekf/sim.hpp"

using namespace cdekf;

namespace {

/// Noise-free linear test model x' = A x with unit process placeholders.
LtiModel quiet_lti(Matrix a, double q_scale) {
    const std::size_t n = a.rows();
    return LtiModel(std::move(a), Matrix(1, n, {1.0, 0.0}), Matrix::identity(n),
                    q_scale * Matrix::identity(n), Matrix::diagonal({1.0}), Vector{1.0, 0.5},
                    Matrix::identity(n));
}

}  // namespace

TEST_CASE("zero drift and zero noise give a constant trajectory") {
    // Q cannot be exactly zero (it must stay SPD); 1e-30 is numerically zero
    // against unit states.
    const LtiModel model = quiet_lti(Matrix(2, 2), 1e-30);
    const Trajectory traj = euler_maruyama(model, {1.0, 2.0}, 0.01, 1.0, 5);
    REQUIRE(traj.size() == 101);
    CHECK(traj.states.back()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(traj.states.back()[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(traj.times.back() == doctest::Approx(1.0));
}

TEST_CASE("noise-free linear dynamics match the matrix exponential") {
    const Matrix a(2, 2, {0.0, 1.0, -1.0, 0.0});
    const LtiModel model = quiet_lti(a, 1e-30);
    const Vector x0{1.0, 0.0};
    const Trajectory traj = euler_maruyama(model, x0, 1e-5, 1.0, 5);
    const Matrix f = expm(a);
    const Vector expected = f * x0;
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::abs(traj.states.back()[i] - expected[i]) <=
              1e-3 * std::max(1.0, std::abs(expected[i])));
    }
}

TEST_CASE("brownian motion variance statistics") {
    // x' = 0, Q = 1, n = q = 1: Var x(1) = 1. Sample over many seeds.
    const LtiModel model(Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0}), Matrix::identity(1),
                         Matrix::identity(1), Matrix::diagonal({1.0}), Vector{0.0},
                         Matrix::identity(1));
    const int seeds = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const Trajectory traj =
            euler_maruyama(model, {0.0}, 0.01, 1.0, static_cast<std::uint64_t>(s));
        const double x1 = traj.states.back()[0];
        sum += x1;
        sum_sq += x1 * x1;
    }
    const double mean = sum / seeds;
    const double var = sum_sq / seeds - mean * mean;
    CHECK(var >= 0.94);
    CHECK(var <= 1.06);
    CHECK(std::abs(mean) <= 0.05);
}

TEST_CASE("identical seeds give bit-identical trajectories and measurements") {
    const CstrModel model;
    const Trajectory a = euler_maruyama(model, model.x0_mean(), 1e-3, 2.0, 99);
    const Trajectory b = euler_maruyama(model, model.x0_mean(), 1e-3, 2.0, 99);
    CHECK(checksum(a) == checksum(b));
    for (std::size_t j = 0; j < a.size(); ++j) {
        for (std::size_t i = 0; i < 3; ++i) CHECK(a.states[j][i] == b.states[j][i]);
    }
    const auto za = synthesize_measurements(a, model, 0.5, 123);
    const auto zb = synthesize_measurements(b, model, 0.5, 123);
    CHECK(checksum(za) == checksum(zb));
    CHECK(za.size() == 4);

    const auto zc = synthesize_measurements(a, model, 0.5, 124);
    CHECK(checksum(zc) != checksum(za));
}

TEST_CASE("measurement count over the horizon") {
    const CstrModel model;
    const Trajectory traj = euler_maruyama(model, model.x0_mean(), 1e-3, 30.0, 7);
    const auto records = synthesize_measurements(traj, model, 5.0, 11);
    REQUIRE(records.size() == 6);
    for (std::size_t k = 0; k < records.size(); ++k) {
        CHECK(records[k].time == doctest::Approx(5.0 * static_cast<double>(k + 1)));
    }
}

TEST_CASE("noise-free measurements reproduce the observation function") {
    // R must stay SPD; 1e-30 is zero at the working scale.
    const LtiModel model(Matrix(2, 2), Matrix(1, 2, {1.0, 1.0}), Matrix::identity(2),
                         1e-30 * Matrix::identity(2), Matrix::diagonal({1e-30}),
                         Vector{0.25, 0.5}, Matrix::identity(2));
    const Trajectory traj = euler_maruyama(model, model.x0_mean(), 0.01, 1.0, 3);
    const auto records = synthesize_measurements(traj, model, 0.25, 5);
    REQUIRE(records.size() == 4);
    for (const auto& rec : records) {
        CHECK(rec.value[0] == doctest::Approx(0.75).epsilon(1e-9));
    }
}

TEST_CASE("cstr measurement value at the sampling instant") {
    const CstrModel model;
    Trajectory traj;
    traj.times = {0.0, 1.0};
    traj.states = {{0.5, 0.05, 0.0}, {0.5, 0.05, 0.0}};
    // noise suppressed by reading the noiseless observation directly
    const auto idx = measurement_indices(traj, 1.0);
    REQUIRE(idx.size() == 1);
    CHECK(model.measurement(1, traj.states[idx[0]])[0] == doctest::Approx(18.062));
}

TEST_CASE("rng streams are reproducible and splittable") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(Rng::split(42) != 42);
    CHECK(Rng::split(42) == Rng::split(42));
    Rng c(43);
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs |= (a2.next_u64() != c.next_u64());
    CHECK(differs);
}

TEST_CASE("trajectory csv export") {
    const CstrModel model;
    const Trajectory traj = euler_maruyama(model, model.x0_mean(), 0.5, 1.0, 2);
    const std::string path = "test_trajectory.csv";
    write_trajectory_csv(path, traj);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x1,x2,x3");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3);
    std::remove(path.c_str());
}

TEST_CASE("invalid stepping arguments are rejected") {
    const CstrModel model;
    CHECK_THROWS_AS(euler_maruyama(model, model.x0_mean(), 0.3, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(euler_maruyama(model, {1.0}, 0.1, 1.0, 1), std::invalid_argument);
    const Trajectory traj = euler_maruyama(model, model.x0_mean(), 0.25, 1.0, 1);
    CHECK_THROWS_AS(synthesize_measurements(traj, model, 0.3, 1), std::invalid_argument);
}
