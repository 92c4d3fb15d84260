#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "cdekf/linalg.hpp"
#include "cdekf/models.hpp"
#include "cdekf/odesolve.hpp"

namespace cdekf {

/// The seven estimators. The derivative-free variants differ in the
/// prediction encoding (moment equations, square-root moment equations or
/// sample point equations) and in the measurement-update kernel
/// (conventional, two-QR square root or one block-QR square root).
enum class FilterVariant {
    StdEkf,
    MdeConventional,
    SpdeConventional,
    SrMdeTwoQr,
    SrMdeBlockQr,
    SrSpdeTwoQr,
    SrSpdeBlockQr,
};

inline constexpr std::array<FilterVariant, 7> kAllVariants = {
    FilterVariant::StdEkf,        FilterVariant::MdeConventional, FilterVariant::SpdeConventional,
    FilterVariant::SrMdeTwoQr,    FilterVariant::SrMdeBlockQr,    FilterVariant::SrSpdeTwoQr,
    FilterVariant::SrSpdeBlockQr,
};

/// Stable string ids: std-ekf, mde, spde, sr-mde-a, sr-mde-b, sr-spde-a, sr-spde-b.
std::string_view variant_id(FilterVariant variant);
std::optional<FilterVariant> variant_from_id(std::string_view id);

bool variant_is_square_root(FilterVariant variant);
bool variant_is_spde(FilterVariant variant);

/// Gaussian state estimate at a time instant. Conventional variants carry
/// the full covariance; square-root variants carry its lower Cholesky
/// factor.
struct GaussianBelief {
    double time = 0.0;
    Vector mean;
    std::variant<Matrix, LowerTriangular> uncertainty;

    bool is_square_root() const { return std::holds_alternative<LowerTriangular>(uncertainty); }
    const Matrix& cov() const { return std::get<Matrix>(uncertainty); }
    const LowerTriangular& chol() const { return std::get<LowerTriangular>(uncertainty); }
    /// The covariance regardless of representation (chol * cholᵀ for
    /// square-root beliefs).
    Matrix dense_covariance() const;
};

/// The n state-space points about the mean, one per column:
/// column i = mean + (sqrt(n)/alpha) * chol column i.
struct SamplePointSet {
    Matrix points;  // n x n
    Vector mean;
    double alpha = 0.0;
};

SamplePointSet generate_sample_points(const Vector& mean, const LowerTriangular& chol,
                                      double alpha);

/// Mean-adjusted and scaled spread (alpha/sqrt(n)) * [X_1 - mean | ... | X_n - mean].
Matrix center_scale_x(const SamplePointSet& points);
/// Same scaling applied to measurement-space points about z_mean.
Matrix center_scale_z(const Matrix& z_points, const Vector& z_mean, double alpha);

struct FilterFailure {
    double time = 0.0;
    FailureCause cause = FailureCause::NonFinite;
};

// ---------------------------------------------------------------------------
// Prediction right-hand sides
// ---------------------------------------------------------------------------

struct MeanCovDerivative {
    Vector mean_dot;
    Matrix cov_dot;
};

struct MeanCholDerivative {
    Vector mean_dot;
    LowerTriangular chol_dot;
};

/// Factor dynamics kernel: S * Phi(S^{-1} M S^{-T}) with the inner inverses
/// applied through triangular solves.
LowerTriangular sr_factor_derivative(const LowerTriangular& s, const Matrix& m);

/// Moment equations: mean' = f(t, mean) and
/// cov' = (alpha/sqrt(n)) (S FXᵀ + FX Sᵀ) + G Q Gᵀ with S = chol(cov) and
/// FX the centered drift propagation of the sample points. Throws
/// NotPositiveDefiniteError when cov fails to factorize; this is the
/// documented fragility of the conventional moment form.
MeanCovDerivative mde_rhs(double t, const Vector& mean, const Matrix& cov, const ModelSpec& model,
                          double alpha);

/// Square-root moment equations: chol' = sr_factor_derivative(chol, M).
MeanCholDerivative sr_mde_rhs(double t, const Vector& mean, const LowerTriangular& chol,
                              const ModelSpec& model, double alpha);

/// Sample point equations on the stacked state [mean | X] (n x (n+1)):
/// X' = f(t, mean) 1ᵀ + (sqrt(n)/alpha) S Phi(S^{-1} M S^{-T}) with
/// S = (alpha/sqrt(n)) tril(X - mean 1ᵀ). Throws SingularFactorError when
/// the recovered factor has a non-positive or non-finite diagonal.
Matrix spde_rhs(double t, const Matrix& stacked, const ModelSpec& model, double alpha);

/// Classic extended-Kalman moment equations using the model Jacobian:
/// cov' = F P + P Fᵀ + G Q Gᵀ.
MeanCovDerivative std_ekf_rhs(double t, const Vector& mean, const Matrix& cov,
                              const ModelSpec& model);

// ---------------------------------------------------------------------------
// Measurement updates
// ---------------------------------------------------------------------------

/// Conventional derivative-free update: R_e = Z Zᵀ + R, P_xz = X Zᵀ, gain by
/// two triangular solves on chol(R_e), P+ = P - (K S_e)(K S_e)ᵀ followed by
/// symmetrization. The first overload factorizes the prior covariance to
/// build the sample points; the second consumes points already available
/// from the time update.
GaussianBelief mu_conventional(const GaussianBelief& prior, std::size_t k, const Vector& z,
                               const ModelSpec& model, double alpha);
GaussianBelief mu_conventional(const GaussianBelief& prior, const SamplePointSet& points,
                               std::size_t k, const Vector& z, const ModelSpec& model,
                               double alpha);

/// Square-root update with two orthogonal triangularizations:
/// R_e^{1/2} from [Z R^{1/2}] and P+^{1/2} from [(X - K Z)  K R^{1/2}].
GaussianBelief mu_sr_two_qr(const GaussianBelief& prior, std::size_t k, const Vector& z,
                            const ModelSpec& model, double alpha);
GaussianBelief mu_sr_two_qr(const GaussianBelief& prior, const SamplePointSet& points,
                            std::size_t k, const Vector& z, const ModelSpec& model, double alpha);

/// Square-root update reading all three post-array blocks off one block
/// triangularization; the gain needs a single triangular solve.
GaussianBelief mu_sr_block_qr(const GaussianBelief& prior, std::size_t k, const Vector& z,
                              const ModelSpec& model, double alpha);
GaussianBelief mu_sr_block_qr(const GaussianBelief& prior, const SamplePointSet& points,
                              std::size_t k, const Vector& z, const ModelSpec& model,
                              double alpha);

/// Standard EKF update with the model measurement Jacobian.
GaussianBelief mu_std_ekf(const GaussianBelief& prior, std::size_t k, const Vector& z,
                          const ModelSpec& model);

// ---------------------------------------------------------------------------
// Filter loop
// ---------------------------------------------------------------------------

struct PredictOutcome {
    GaussianBelief belief;
    /// Sample points propagated through the time update; present for the
    /// SPDE encodings so the measurement step can skip refactorization.
    std::optional<SamplePointSet> points;
    OdeStats stats;
    std::optional<FilterFailure> failure;
    /// Max-norm of the strictly-upper residue discarded when recovering the
    /// factor from propagated sample points (SPDE encodings only).
    double tril_residue = 0.0;

    bool ok() const { return !failure.has_value(); }
};

/// Flattens the variant's state encoding column-major (mean first, then P,
/// S or X), integrates it over [belief.time, t_end] and unflattens.
PredictOutcome predict(FilterVariant variant, const GaussianBelief& belief, double t_end,
                       const ModelSpec& model, double alpha, const OdeOptions& opts);

GaussianBelief initial_belief(FilterVariant variant, const ModelSpec& model, double t0 = 0.0);

/// Applies the variant's measurement-update kernel to a successful
/// prediction. Throws NumericError on divergence.
GaussianBelief measurement_update(FilterVariant variant, const PredictOutcome& predicted,
                                  std::size_t k, const Vector& z, const ModelSpec& model,
                                  double alpha);

struct MeasurementRecord {
    double time = 0.0;
    Vector value;
};

struct FilterRun {
    /// Initial belief followed by the posterior at each processed instant.
    std::vector<GaussianBelief> beliefs;
    std::optional<FilterFailure> failure;
    OdeStats stats;

    bool diverged() const { return failure.has_value(); }
};

/// Full filtering loop from the model's initial law. Divergence stops the
/// loop and is returned as data (partial trajectory plus failure record),
/// never as an exception.
FilterRun run_filter(FilterVariant variant, const ModelSpec& model,
                     std::span<const MeasurementRecord> measurements, double alpha,
                     const OdeOptions& opts, double t0 = 0.0);

}  // namespace cdekf
