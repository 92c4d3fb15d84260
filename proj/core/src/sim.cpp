#include "cdekf/sim.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cdekf {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u, v, s;
    do {
        u = 2.0 * next_uniform() - 1.0;
        v = 2.0 * next_uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal_ = v * factor;
    has_cached_normal_ = true;
    return u * factor;
}

std::uint64_t Rng::split(std::uint64_t seed) {
    std::uint64_t sm = seed ^ 0xa5a5a5a55a5a5a5aULL;
    return splitmix64(sm);
}

Trajectory euler_maruyama(const ModelSpec& model, const Vector& x0, double dt, double horizon,
                          std::uint64_t rng_seed) {
    if (!(dt > 0.0) || !(horizon > 0.0)) {
        throw std::invalid_argument("euler_maruyama requires positive dt and horizon");
    }
    const auto steps_real = horizon / dt;
    const auto steps = static_cast<std::size_t>(std::llround(steps_real));
    if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real) {
        throw std::invalid_argument("dt must divide the horizon");
    }
    if (x0.size() != model.state_dim() || !vec_all_finite(x0)) {
        throw std::invalid_argument("invalid initial state");
    }

    const std::size_t q = model.noise_intensity_q().rows();
    Matrix q_dt = model.noise_intensity_q();
    q_dt *= dt;
    const LowerTriangular noise_chol = cholesky_lower(q_dt);
    const Matrix& g = model.diffusion_g();

    Rng rng(rng_seed);
    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.times.push_back(0.0);
    traj.states.push_back(x0);

    Vector x = x0;
    Vector w(q);
    for (std::size_t j = 0; j < steps; ++j) {
        const double t = static_cast<double>(j) * dt;
        const Vector f = model.drift(t, x);
        for (std::size_t i = 0; i < q; ++i) w[i] = rng.next_normal();
        const Vector noise = g * (noise_chol * w);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += f[i] * dt + noise[i];
        }
        if (!vec_all_finite(x)) {
            throw NonFiniteError("simulated trajectory at t=" +
                                 std::to_string(static_cast<double>(j + 1) * dt));
        }
        traj.times.push_back(static_cast<double>(j + 1) * dt);
        traj.states.push_back(x);
    }
    return traj;
}

std::vector<std::size_t> measurement_indices(const Trajectory& truth, double period) {
    if (truth.size() < 2) throw std::invalid_argument("trajectory too short");
    const double dt = truth.times[1] - truth.times[0];
    const double stride_real = period / dt;
    const auto stride = static_cast<std::size_t>(std::llround(stride_real));
    if (stride == 0 || std::abs(stride_real - static_cast<double>(stride)) > 1e-9 * stride_real) {
        throw std::invalid_argument("period must be an integer multiple of the trajectory step");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = stride; i < truth.size(); i += stride) idx.push_back(i);
    return idx;
}

std::vector<MeasurementRecord> synthesize_measurements(const Trajectory& truth,
                                                       const ModelSpec& model, double period,
                                                       std::uint64_t rng_seed) {
    const std::vector<std::size_t> idx = measurement_indices(truth, period);
    const LowerTriangular r_chol = cholesky_lower(model.meas_cov_r());
    const std::size_t m = model.meas_dim();

    Rng rng(rng_seed);
    std::vector<MeasurementRecord> records;
    records.reserve(idx.size());
    Vector v(m);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        Vector z = model.measurement(k + 1, truth.states[idx[k]]);
        for (std::size_t i = 0; i < m; ++i) v[i] = rng.next_normal();
        const Vector noise = r_chol * v;
        for (std::size_t i = 0; i < m; ++i) z[i] += noise[i];
        records.push_back(MeasurementRecord{truth.times[idx[k]], std::move(z)});
    }
    return records;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "t";
    if (!trajectory.states.empty()) {
        for (std::size_t i = 0; i < trajectory.states.front().size(); ++i) {
            out << ",x" << (i + 1);
        }
    }
    out << "\n";
    char buf[32];
    for (std::size_t j = 0; j < trajectory.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.12g", trajectory.times[j]);
        out << buf;
        for (double v : trajectory.states[j]) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            out << "," << buf;
        }
        out << "\n";
    }
}

namespace {

std::uint64_t fnv1a_init() { return 0xcbf29ce484222325ULL; }

void fnv1a_mix(std::uint64_t& h, double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffULL;
        h *= 0x100000001b3ULL;
    }
}

}  // namespace

std::uint64_t checksum(const Trajectory& trajectory) {
    std::uint64_t h = fnv1a_init();
    for (std::size_t j = 0; j < trajectory.size(); ++j) {
        fnv1a_mix(h, trajectory.times[j]);
        for (double v : trajectory.states[j]) fnv1a_mix(h, v);
    }
    return h;
}

std::uint64_t checksum(const std::vector<MeasurementRecord>& measurements) {
    std::uint64_t h = fnv1a_init();
    for (const auto& rec : measurements) {
        fnv1a_mix(h, rec.time);
        for (double v : rec.value) fnv1a_mix(h, v);
    }
    return h;
}

}  // namespace cdekf
