#include "cdekf/filters.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace cdekf {

std::string_view variant_id(FilterVariant variant) {
    switch (variant) {
        case FilterVariant::StdEkf: return "std-ekf";
        case FilterVariant::MdeConventional: return "mde";
        case FilterVariant::SpdeConventional: return "spde";
        case FilterVariant::SrMdeTwoQr: return "sr-mde-a";
        case FilterVariant::SrMdeBlockQr: return "sr-mde-b";
        case FilterVariant::SrSpdeTwoQr: return "sr-spde-a";
        case FilterVariant::SrSpdeBlockQr: return "sr-spde-b";
    }
    return "unknown";
}

std::optional<FilterVariant> variant_from_id(std::string_view id) {
    for (FilterVariant v : kAllVariants) {
        if (variant_id(v) == id) return v;
    }
    return std::nullopt;
}

bool variant_is_square_root(FilterVariant variant) {
    switch (variant) {
        case FilterVariant::SrMdeTwoQr:
        case FilterVariant::SrMdeBlockQr:
        case FilterVariant::SrSpdeTwoQr:
        case FilterVariant::SrSpdeBlockQr:
            return true;
        default:
            return false;
    }
}

bool variant_is_spde(FilterVariant variant) {
    switch (variant) {
        case FilterVariant::SpdeConventional:
        case FilterVariant::SrSpdeTwoQr:
        case FilterVariant::SrSpdeBlockQr:
            return true;
        default:
            return false;
    }
}

Matrix GaussianBelief::dense_covariance() const {
    if (is_square_root()) return gram(chol().dense());
    return cov();
}

SamplePointSet generate_sample_points(const Vector& mean, const LowerTriangular& chol,
                                      double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    const std::size_t n = mean.size();
    if (chol.order() != n) throw std::invalid_argument("sample point dimension mismatch");
    const double spread = std::sqrt(static_cast<double>(n)) / alpha;
    Matrix points(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            points(i, j) = mean[i] + spread * chol(i, j);
        }
    }
    return SamplePointSet{std::move(points), mean, alpha};
}

Matrix center_scale_x(const SamplePointSet& points) {
    return center_scale_z(points.points, points.mean, points.alpha);
}

Matrix center_scale_z(const Matrix& z_points, const Vector& z_mean, double alpha) {
    if (z_points.rows() != z_mean.size()) {
        throw std::invalid_argument("center_scale dimension mismatch");
    }
    const double scale = alpha / std::sqrt(static_cast<double>(z_points.cols()));
    Matrix out(z_points.rows(), z_points.cols());
    for (std::size_t j = 0; j < z_points.cols(); ++j) {
        for (std::size_t i = 0; i < z_points.rows(); ++i) {
            out(i, j) = scale * (z_points(i, j) - z_mean[i]);
        }
    }
    return out;
}

namespace {

// Flips the sign of any column whose diagonal is negative; S Sᵀ is invariant
// under column sign changes, so this canonicalizes a recovered factor to the
// nonnegative-diagonal form without altering the covariance it represents.
LowerTriangular normalize_column_signs(const LowerTriangular& factor) {
    LowerTriangular out(factor.order());
    for (std::size_t j = 0; j < factor.order(); ++j) {
        const double sign = factor(j, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = j; i < factor.order(); ++i) {
            out.set(i, j, sign * factor(i, j));
        }
    }
    return out;
}

bool diagonal_usable(const LowerTriangular& factor) {
    for (std::size_t i = 0; i < factor.order(); ++i) {
        const double d = factor(i, i);
        if (!(std::abs(d) >= 1e-300) || !std::isfinite(d)) return false;
    }
    return true;
}

// FX = [f(t, X_1) - f_mean | ... | f(t, X_n) - f_mean], unscaled.
Matrix centered_drift(const ModelSpec& model, double t, const Vector& f_mean,
                      const Matrix& points) {
    const std::size_t n = points.rows();
    Matrix fx(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vector fj = model.drift(t, points.column(j));
        for (std::size_t i = 0; i < n; ++i) fx(i, j) = fj[i] - f_mean[i];
    }
    return fx;
}

// M = (alpha/sqrt(n)) (S FXᵀ + FX Sᵀ) + G Q Gᵀ; doubles as the covariance
// derivative of the moment equations.
Matrix moment_matrix(const LowerTriangular& s, const Matrix& fx, double alpha,
                     const Matrix& gqg) {
    const double scale = alpha / std::sqrt(static_cast<double>(s.order()));
    Matrix sfx = s.dense() * fx.transposed();
    Matrix m = gqg;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            m(i, j) += scale * (sfx(i, j) + sfx(j, i));
        }
    }
    return m;
}

Matrix mde_cov_dot(double t, const Vector& mean, const Vector& f_mean, const Matrix& cov,
                   const ModelSpec& model, double alpha, const Matrix& gqg) {
    const LowerTriangular s = cholesky_lower(cov);
    const SamplePointSet pts = generate_sample_points(mean, s, alpha);
    const Matrix fx = centered_drift(model, t, f_mean, pts.points);
    return moment_matrix(s, fx, alpha, gqg);
}

LowerTriangular sr_chol_dot(double t, const Vector& mean, const Vector& f_mean,
                            const LowerTriangular& s, const ModelSpec& model, double alpha,
                            const Matrix& gqg) {
    // Transient stage values may carry negative diagonal entries; the factor
    // algebra only needs S nonsingular (the solves reject zero/non-finite).
    const SamplePointSet pts = generate_sample_points(mean, s, alpha);
    const Matrix fx = centered_drift(model, t, f_mean, pts.points);
    return sr_factor_derivative(s, moment_matrix(s, fx, alpha, gqg));
}

struct SpdeState {
    Vector mean;
    Matrix points;  // n x n
};

SpdeState split_stacked(const Matrix& stacked) {
    const std::size_t n = stacked.rows();
    if (stacked.cols() != n + 1) {
        throw std::invalid_argument("stacked state must be n x (n+1)");
    }
    SpdeState st;
    st.mean = stacked.column(0);
    st.points = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) st.points.set_column(j, stacked.column(j + 1));
    return st;
}

// (alpha/sqrt(n)) tril(X - mean 1ᵀ); also reports the discarded
// strictly-upper residue's max-norm.
LowerTriangular recover_factor(const Matrix& points, const Vector& mean, double alpha,
                               double* residue = nullptr) {
    const std::size_t n = points.rows();
    const double scale = alpha / std::sqrt(static_cast<double>(n));
    LowerTriangular s(n);
    double res = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const double v = scale * (points(i, j) - mean[i]);
            if (i >= j) {
                s.set(i, j, v);
            } else {
                res = std::max(res, std::abs(v));
            }
        }
    }
    if (residue != nullptr) *residue = res;
    return s;
}

Matrix spde_points_dot(double t, const SpdeState& st, const Vector& f_mean,
                       const ModelSpec& model, double alpha, const Matrix& gqg) {
    const std::size_t n = st.mean.size();
    const LowerTriangular s = recover_factor(st.points, st.mean, alpha);
    const Matrix fx = centered_drift(model, t, f_mean, st.points);
    const LowerTriangular s_dot = sr_factor_derivative(s, moment_matrix(s, fx, alpha, gqg));
    const double spread = std::sqrt(static_cast<double>(n)) / alpha;
    Matrix points_dot(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            points_dot(i, j) = f_mean[i] + spread * s_dot(i, j);
        }
    }
    return points_dot;
}

Matrix ekf_cov_dot(double t, const Vector& mean, const Matrix& cov, const ModelSpec& model,
                   const Matrix& gqg) {
    const Matrix f = model.drift_jacobian(t, mean);
    const Matrix fp = f * cov;
    Matrix dot = gqg;
    for (std::size_t j = 0; j < dot.cols(); ++j) {
        for (std::size_t i = 0; i < dot.rows(); ++i) {
            dot(i, j) += fp(i, j) + fp(j, i);
        }
    }
    return dot;
}

}  // namespace

LowerTriangular sr_factor_derivative(const LowerTriangular& s, const Matrix& m) {
    // A = S^{-1} M S^{-T} through two triangular solves, then S * Phi(A).
    const Matrix y = solve_lower(s, m);
    const Matrix a = solve_lower(s, y.transposed()).transposed();
    return LowerTriangular::tril_of(s.dense() * phi(a).dense());
}

MeanCovDerivative mde_rhs(double t, const Vector& mean, const Matrix& cov, const ModelSpec& model,
                          double alpha) {
    const Matrix gqg = process_noise_matrix(model);
    const Vector f_mean = model.drift(t, mean);
    return MeanCovDerivative{f_mean, mde_cov_dot(t, mean, f_mean, cov, model, alpha, gqg)};
}

MeanCholDerivative sr_mde_rhs(double t, const Vector& mean, const LowerTriangular& chol,
                              const ModelSpec& model, double alpha) {
    const Matrix gqg = process_noise_matrix(model);
    const Vector f_mean = model.drift(t, mean);
    return MeanCholDerivative{f_mean, sr_chol_dot(t, mean, f_mean, chol, model, alpha, gqg)};
}

Matrix spde_rhs(double t, const Matrix& stacked, const ModelSpec& model, double alpha) {
    const Matrix gqg = process_noise_matrix(model);
    const SpdeState st = split_stacked(stacked);
    const Vector f_mean = model.drift(t, st.mean);
    const Matrix points_dot = spde_points_dot(t, st, f_mean, model, alpha, gqg);
    Matrix out(stacked.rows(), stacked.cols());
    out.set_column(0, f_mean);
    for (std::size_t j = 0; j < points_dot.cols(); ++j) {
        out.set_column(j + 1, points_dot.column(j));
    }
    return out;
}

MeanCovDerivative std_ekf_rhs(double t, const Vector& mean, const Matrix& cov,
                              const ModelSpec& model) {
    const Matrix gqg = process_noise_matrix(model);
    return MeanCovDerivative{model.drift(t, mean), ekf_cov_dot(t, mean, cov, model, gqg)};
}

// ---------------------------------------------------------------------------
// Measurement updates
// ---------------------------------------------------------------------------

namespace {

struct MeasurementGeometry {
    Vector z_hat;
    Matrix z_bar;  // m x n
    Matrix x_bar;  // n x n
};

MeasurementGeometry propagate_points(const ModelSpec& model, std::size_t k,
                                     const SamplePointSet& pts) {
    const std::size_t n = pts.points.cols();
    const std::size_t m = model.meas_dim();
    MeasurementGeometry geo;
    geo.z_hat = model.measurement(k, pts.mean);
    Matrix z_points(m, n);
    for (std::size_t j = 0; j < n; ++j) {
        z_points.set_column(j, model.measurement(k, pts.points.column(j)));
    }
    geo.z_bar = center_scale_z(z_points, geo.z_hat, pts.alpha);
    geo.x_bar = center_scale_x(pts);
    return geo;
}

// K from K R_e = P_xz with R_e = S_e S_eᵀ: two triangular solves.
Matrix gain_from_cholesky(const Matrix& p_xz, const LowerTriangular& s_e) {
    const Matrix y = solve_lower(s_e, p_xz.transposed());
    return solve_upper(s_e, y).transposed();
}

Vector updated_mean(const Vector& mean, const Matrix& gain, const Vector& z,
                    const Vector& z_hat) {
    return vec_add(mean, gain * vec_sub(z, z_hat));
}

void check_finite_belief(const GaussianBelief& belief) {
    const bool ok = vec_all_finite(belief.mean) &&
                    (belief.is_square_root() ? belief.chol().dense().all_finite()
                                             : belief.cov().all_finite());
    if (!ok) throw NonFiniteError("posterior state");
}

GaussianBelief conventional_update(const GaussianBelief& prior, const Matrix& prior_cov,
                                   const MeasurementGeometry& geo, const Vector& z,
                                   const ModelSpec& model) {
    Matrix r_e = gram(geo.z_bar) + model.meas_cov_r();
    const LowerTriangular s_e = cholesky_lower(r_e);
    const Matrix p_xz = geo.x_bar * geo.z_bar.transposed();
    const Matrix gain = gain_from_cholesky(p_xz, s_e);

    // P+ = P - K R_e Kᵀ computed as P - (K S_e)(K S_e)ᵀ, then symmetrized.
    Matrix p_post = prior_cov - gram(gain * s_e);
    for (std::size_t j = 0; j < p_post.cols(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            const double v = 0.5 * (p_post(i, j) + p_post(j, i));
            p_post(i, j) = v;
            p_post(j, i) = v;
        }
    }
    GaussianBelief post{prior.time, updated_mean(prior.mean, gain, z, geo.z_hat),
                        std::move(p_post)};
    check_finite_belief(post);
    return post;
}

GaussianBelief two_qr_update(const GaussianBelief& prior, const MeasurementGeometry& geo,
                             const Vector& z, const ModelSpec& model) {
    const LowerTriangular r_sqrt = cholesky_lower(model.meas_cov_r());
    const LowerTriangular s_e = triangularize_lower(hstack(geo.z_bar, r_sqrt.dense()));

    // K = P_xz R_e^{-T/2} R_e^{-1/2}
    const Matrix p_xz = geo.x_bar * geo.z_bar.transposed();
    const Matrix gain = gain_from_cholesky(p_xz, s_e);

    const Matrix centered = geo.x_bar - gain * geo.z_bar;
    const LowerTriangular p_sqrt =
        triangularize_lower(hstack(centered, gain * r_sqrt.dense()));

    GaussianBelief post{prior.time, updated_mean(prior.mean, gain, z, geo.z_hat), p_sqrt};
    check_finite_belief(post);
    return post;
}

GaussianBelief block_qr_update(const GaussianBelief& prior, const MeasurementGeometry& geo,
                               const Vector& z, const ModelSpec& model) {
    const LowerTriangular r_sqrt = cholesky_lower(model.meas_cov_r());
    BlockTriangularization blocks = block_triangularize(geo.z_bar, geo.x_bar, r_sqrt);

    // K = Pxz_bar R_e^{-1/2}: a single triangular solve.
    const Matrix gain = solve_upper(blocks.re_sqrt, blocks.pxz_bar.transposed()).transposed();

    GaussianBelief post{prior.time, updated_mean(prior.mean, gain, z, geo.z_hat),
                        std::move(blocks.p_sqrt)};
    check_finite_belief(post);
    return post;
}

SamplePointSet points_from_prior(const GaussianBelief& prior, double alpha) {
    if (prior.is_square_root()) {
        return generate_sample_points(prior.mean, prior.chol(), alpha);
    }
    return generate_sample_points(prior.mean, cholesky_lower(prior.cov()), alpha);
}

}  // namespace

GaussianBelief mu_conventional(const GaussianBelief& prior, std::size_t k, const Vector& z,
                               const ModelSpec& model, double alpha) {
    return mu_conventional(prior, points_from_prior(prior, alpha), k, z, model, alpha);
}

GaussianBelief mu_conventional(const GaussianBelief& prior, const SamplePointSet& points,
                               std::size_t k, const Vector& z, const ModelSpec& model,
                               double alpha) {
    (void)alpha;
    return conventional_update(prior, prior.dense_covariance(),
                               propagate_points(model, k, points), z, model);
}

GaussianBelief mu_sr_two_qr(const GaussianBelief& prior, std::size_t k, const Vector& z,
                            const ModelSpec& model, double alpha) {
    return mu_sr_two_qr(prior, points_from_prior(prior, alpha), k, z, model, alpha);
}

GaussianBelief mu_sr_two_qr(const GaussianBelief& prior, const SamplePointSet& points,
                            std::size_t k, const Vector& z, const ModelSpec& model,
                            double alpha) {
    (void)alpha;
    return two_qr_update(prior, propagate_points(model, k, points), z, model);
}

GaussianBelief mu_sr_block_qr(const GaussianBelief& prior, std::size_t k, const Vector& z,
                              const ModelSpec& model, double alpha) {
    return mu_sr_block_qr(prior, points_from_prior(prior, alpha), k, z, model, alpha);
}

GaussianBelief mu_sr_block_qr(const GaussianBelief& prior, const SamplePointSet& points,
                              std::size_t k, const Vector& z, const ModelSpec& model,
                              double alpha) {
    (void)alpha;
    return block_qr_update(prior, propagate_points(model, k, points), z, model);
}

GaussianBelief mu_std_ekf(const GaussianBelief& prior, std::size_t k, const Vector& z,
                          const ModelSpec& model) {
    const Matrix& p = prior.cov();
    const Matrix h = model.measurement_jacobian(k, prior.mean);
    Matrix r_e = h * p * h.transposed() + model.meas_cov_r();
    const LowerTriangular s_e = cholesky_lower(r_e);
    const Matrix p_xz = p * h.transposed();
    const Matrix gain = gain_from_cholesky(p_xz, s_e);
    const Vector z_hat = model.measurement(k, prior.mean);

    Matrix p_post = p - gram(gain * s_e.dense());
    for (std::size_t j = 0; j < p_post.cols(); ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            const double v = 0.5 * (p_post(i, j) + p_post(j, i));
            p_post(i, j) = v;
            p_post(j, i) = v;
        }
    }
    GaussianBelief post{prior.time, updated_mean(prior.mean, gain, z, z_hat), std::move(p_post)};
    check_finite_belief(post);
    return post;
}

// ---------------------------------------------------------------------------
// Prediction and filter loop
// ---------------------------------------------------------------------------

namespace {

// A rejectable stage state: an explicit stage that overshot into overflow is
// reported back as a NaN derivative so the error control shrinks the step,
// matching how plain floating-point arithmetic behaves in the solver loop.
bool stage_state_usable(std::span<const double> y, std::span<double> dydt) {
    for (double v : y) {
        if (!std::isfinite(v)) {
            for (double& d : dydt) d = std::numeric_limits<double>::quiet_NaN();
            return false;
        }
    }
    return true;
}

std::vector<double> pack_state(const Vector& mean, const Matrix& block) {
    std::vector<double> y;
    y.reserve(mean.size() + block.rows() * block.cols());
    y.insert(y.end(), mean.begin(), mean.end());
    const auto data = block.data();
    y.insert(y.end(), data.begin(), data.end());
    return y;
}

void unpack_state(std::span<const double> y, std::size_t n, Vector& mean, Matrix& block) {
    mean.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
    block = Matrix::unflatten(y.subspan(n), n, y.size() / n - 1);
}

PredictOutcome failed_outcome(const GaussianBelief& belief, double time, FailureCause cause,
                              OdeStats stats) {
    PredictOutcome out;
    out.belief = belief;
    out.stats = stats;
    out.failure = FilterFailure{time, cause};
    return out;
}

}  // namespace

GaussianBelief initial_belief(FilterVariant variant, const ModelSpec& model, double t0) {
    GaussianBelief belief;
    belief.time = t0;
    belief.mean = model.x0_mean();
    if (variant_is_square_root(variant)) {
        belief.uncertainty = cholesky_lower(model.x0_cov());
    } else {
        belief.uncertainty = model.x0_cov();
    }
    return belief;
}

PredictOutcome predict(FilterVariant variant, const GaussianBelief& belief, double t_end,
                       const ModelSpec& model, double alpha, const OdeOptions& opts) {
    const std::size_t n = model.state_dim();
    if (belief.mean.size() != n) throw std::invalid_argument("belief dimension mismatch");
    if (t_end < belief.time) throw std::invalid_argument("prediction must move forward in time");
    const Matrix gqg = process_noise_matrix(model);
    const bool spde = variant_is_spde(variant);

    // Assemble the initial state block for the variant's encoding.
    Matrix block;
    try {
        if (spde) {
            const LowerTriangular s0 = belief.is_square_root()
                                           ? belief.chol()
                                           : cholesky_lower(belief.cov());
            block = generate_sample_points(belief.mean, s0, alpha).points;
        } else if (variant_is_square_root(variant)) {
            block = belief.chol().dense();
        } else {
            block = belief.cov();
        }
    } catch (const NumericError& e) {
        return failed_outcome(belief, belief.time, e.cause(), {});
    }

    PredictOutcome out;
    std::vector<double> y_end;
    if (t_end > belief.time) {
        OdeRhs rhs;
        switch (variant) {
            case FilterVariant::StdEkf:
                rhs = [&](double t, std::span<const double> y, std::span<double> dydt) {
                    if (!stage_state_usable(y, dydt)) return;
                    Vector mean;
                    Matrix cov;
                    unpack_state(y, n, mean, cov);
                    const Vector f_mean = model.drift(t, mean);
                    const Matrix cov_dot = ekf_cov_dot(t, mean, cov, model, gqg);
                    const auto packed = pack_state(f_mean, cov_dot);
                    std::copy(packed.begin(), packed.end(), dydt.begin());
                };
                break;
            case FilterVariant::MdeConventional:
                rhs = [&](double t, std::span<const double> y, std::span<double> dydt) {
                    if (!stage_state_usable(y, dydt)) return;
                    Vector mean;
                    Matrix cov;
                    unpack_state(y, n, mean, cov);
                    const Vector f_mean = model.drift(t, mean);
                    const Matrix cov_dot = mde_cov_dot(t, mean, f_mean, cov, model, alpha, gqg);
                    const auto packed = pack_state(f_mean, cov_dot);
                    std::copy(packed.begin(), packed.end(), dydt.begin());
                };
                break;
            case FilterVariant::SrMdeTwoQr:
            case FilterVariant::SrMdeBlockQr:
                rhs = [&](double t, std::span<const double> y, std::span<double> dydt) {
                    if (!stage_state_usable(y, dydt)) return;
                    Vector mean;
                    Matrix s_block;
                    unpack_state(y, n, mean, s_block);
                    const LowerTriangular s = LowerTriangular::tril_of(s_block);
                    const Vector f_mean = model.drift(t, mean);
                    const LowerTriangular s_dot =
                        sr_chol_dot(t, mean, f_mean, s, model, alpha, gqg);
                    const auto packed = pack_state(f_mean, s_dot.dense());
                    std::copy(packed.begin(), packed.end(), dydt.begin());
                };
                break;
            default:  // SPDE encodings
                rhs = [&](double t, std::span<const double> y, std::span<double> dydt) {
                    if (!stage_state_usable(y, dydt)) return;
                    SpdeState st;
                    Vector mean;
                    Matrix points;
                    unpack_state(y, n, mean, points);
                    st.mean = std::move(mean);
                    st.points = std::move(points);
                    const Vector f_mean = model.drift(t, st.mean);
                    const Matrix points_dot = spde_points_dot(t, st, f_mean, model, alpha, gqg);
                    const auto packed = pack_state(f_mean, points_dot);
                    std::copy(packed.begin(), packed.end(), dydt.begin());
                };
                break;
        }

        const std::vector<double> y0 = pack_state(belief.mean, block);
        OdeResult ode = integrate(rhs, y0, belief.time, t_end, opts);
        out.stats = ode.stats;
        if (!ode.ok()) {
            const FailureCause cause =
                ode.failure_cause.value_or(FailureCause::StepUnderflow);
            return failed_outcome(belief, ode.failure_time, cause, ode.stats);
        }
        y_end = std::move(ode.y_end);
    } else {
        y_end = pack_state(belief.mean, block);
    }

    Vector mean_end;
    Matrix block_end;
    unpack_state(y_end, n, mean_end, block_end);

    out.belief.time = t_end;
    out.belief.mean = std::move(mean_end);
    if (spde) {
        LowerTriangular s = recover_factor(block_end, out.belief.mean, alpha, &out.tril_residue);
        if (!diagonal_usable(s)) {
            return failed_outcome(belief, t_end, FailureCause::SingularFactor, out.stats);
        }
        s = normalize_column_signs(s);
        if (variant_is_square_root(variant)) {
            out.belief.uncertainty = s;
        } else {
            out.belief.uncertainty = gram(s.dense());
        }
        out.points = SamplePointSet{std::move(block_end), out.belief.mean, alpha};
    } else if (variant_is_square_root(variant)) {
        LowerTriangular s = LowerTriangular::tril_of(block_end);
        if (!diagonal_usable(s)) {
            return failed_outcome(belief, t_end, FailureCause::SingularFactor, out.stats);
        }
        out.belief.uncertainty = normalize_column_signs(s);
    } else {
        out.belief.uncertainty = std::move(block_end);
    }
    return out;
}

GaussianBelief measurement_update(FilterVariant variant, const PredictOutcome& predicted,
                                  std::size_t k, const Vector& z, const ModelSpec& model,
                                  double alpha) {
    const GaussianBelief& prior = predicted.belief;
    switch (variant) {
        case FilterVariant::StdEkf:
            return mu_std_ekf(prior, k, z, model);
        case FilterVariant::MdeConventional:
            return mu_conventional(prior, k, z, model, alpha);
        case FilterVariant::SpdeConventional:
            return mu_conventional(prior, predicted.points.value(), k, z, model, alpha);
        case FilterVariant::SrMdeTwoQr:
            return mu_sr_two_qr(prior, k, z, model, alpha);
        case FilterVariant::SrMdeBlockQr:
            return mu_sr_block_qr(prior, k, z, model, alpha);
        case FilterVariant::SrSpdeTwoQr:
            return mu_sr_two_qr(prior, predicted.points.value(), k, z, model, alpha);
        case FilterVariant::SrSpdeBlockQr:
            return mu_sr_block_qr(prior, predicted.points.value(), k, z, model, alpha);
    }
    throw std::logic_error("unknown filter variant");
}

FilterRun run_filter(FilterVariant variant, const ModelSpec& model,
                     std::span<const MeasurementRecord> measurements, double alpha,
                     const OdeOptions& opts, double t0) {
    FilterRun run;
    GaussianBelief belief;
    try {
        belief = initial_belief(variant, model, t0);
    } catch (const NumericError& e) {
        run.failure = FilterFailure{t0, e.cause()};
        return run;
    }
    run.beliefs.push_back(belief);

    double prev_time = t0;
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        const MeasurementRecord& record = measurements[i];
        if (!(record.time >= prev_time) || (i > 0 && record.time <= measurements[i - 1].time)) {
            throw std::invalid_argument("measurement times must be strictly increasing");
        }
        PredictOutcome predicted = predict(variant, belief, record.time, model, alpha, opts);
        run.stats += predicted.stats;
        if (!predicted.ok()) {
            run.failure = predicted.failure;
            return run;
        }
        try {
            belief = measurement_update(variant, predicted, i + 1, record.value, model, alpha);
        } catch (const NumericError& e) {
            run.failure = FilterFailure{record.time, e.cause()};
            return run;
        }
        run.beliefs.push_back(belief);
        prev_time = record.time;
    }
    return run;
}

}  // namespace cdekf
