#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdekf/filters.hpp"
#include "cdekf/linalg.hpp"
#include "cdekf/models.hpp"

namespace cdekf {

/// Deterministic 64-bit generator (xoshiro256** core, splitmix64 seeding)
/// with normal deviates from the polar Box-Muller transform. Fixed
/// algorithm and constants so identical seeds give bit-identical streams on
/// every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform double in [0, 1) with 53 random bits.
    double next_uniform();
    /// Standard normal deviate (Marsaglia polar method, pairs cached).
    double next_normal();

    /// Derives an independent stream seed from `seed`; used to split the
    /// truth and measurement-noise streams of one run.
    static std::uint64_t split(std::uint64_t seed);

private:
    std::uint64_t state_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Equidistant ground-truth trajectory of the model SDE.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;

    std::size_t size() const { return times.size(); }
};

/// Euler-Maruyama discretization x_{j+1} = x_j + f(t_j, x_j) dt + G L w_j
/// with L = chol(Q dt) and w_j independent standard normal vectors.
/// Throws NonFiniteError when the trajectory blows up.
Trajectory euler_maruyama(const ModelSpec& model, const Vector& x0, double dt, double horizon,
                          std::uint64_t rng_seed);

/// Noisy measurements z_k = h(k, x(t_k)) + R^{1/2} v_k at t_k = k * period,
/// k = 1, 2, ... while t_k stays within the trajectory horizon. The period
/// must be an integer multiple of the trajectory step.
std::vector<MeasurementRecord> synthesize_measurements(const Trajectory& truth,
                                                       const ModelSpec& model, double period,
                                                       std::uint64_t rng_seed);

/// Indices into `truth` matching t_k = k * period (the instants
/// synthesize_measurements samples).
std::vector<std::size_t> measurement_indices(const Trajectory& truth, double period);

/// Writes `t, x1..xn` rows; debugging aid.
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);

/// FNV-1a digest over the bit patterns of a trajectory or measurement
/// stream; the benchmark harness asserts that all variants in a Monte Carlo
/// run consumed identical data.
std::uint64_t checksum(const Trajectory& trajectory);
std::uint64_t checksum(const std::vector<MeasurementRecord>& measurements);

}  // namespace cdekf
