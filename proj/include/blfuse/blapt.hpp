#pragma once

#include "blfuse/fusion.hpp"
#include "blfuse/gaussian.hpp"

#include <optional>
#include <string>
#include <vector>

namespace blfuse {

/// Linear factor model r = X f + e, e ~ N(0, D) with D diagonal, and
/// f = mu_f + e_f, e_f ~ N(0, F).
struct FactorModel {
    Mat exposures;  ///< X, n x k, full column rank
    Vec idio_var;   ///< diagonal of D, length n, entries > 0
    Mat factor_cov; ///< F, k x k SPD; default aleatoric factor covariance

    Index n_assets() const { return exposures.rows(); }
    Index n_factors() const { return exposures.cols(); }

    /// Throws ValidationError on shape or positivity violations. Column rank is
    /// not enforced here: the predictive formulas stay well defined for
    /// rank-deficient X (including X = 0); estimation routines check it.
    void validate() const;
};

/// Absolute views on the k factor risk premia: q = mu_f + e, e ~ N(0, Omega),
/// Omega diagonal.
struct ViewSet {
    Vec q;
    Vec omega;  ///< diagonal of Omega, entries > 0

    void validate() const;
};

/// Gaussian prior N(xi, V) on the factor risk premia.
struct Prior {
    Vec xi;
    Mat V;

    void validate() const;
};

/// Conjugate update: cov = (V^{-1} + Omega^{-1})^{-1},
/// mean = cov (V^{-1} xi + Omega^{-1} q).
GaussianEstimate posterior_theta(const Prior& prior, const ViewSet& views);

/// Predictive factor returns f | q: same mean, covariance post.cov + F.
GaussianEstimate predictive_factors(const GaussianEstimate& posterior, const Mat& factor_cov);

/// Asset-level predictive r | q, evaluated in the hierarchical form
///   cov  = [D^{-1} - D^{-1} X (X'D^{-1}X + M^{-1})^{-1} X'D^{-1}]^{-1}
///   mean = cov D^{-1} X (X'D^{-1}X + M^{-1})^{-1} M^{-1} E(f|q)
/// with M = var(f|q). Throws NumericalError if X'D^{-1}X + M^{-1} has
/// condition number above kMaxInnerCondition.
GaussianEstimate predictive_returns(const FactorModel& fm, const GaussianEstimate& factors);

inline constexpr double kMaxInnerCondition = 1e12;

/// Unconstrained single-step optimal weights
///   h = gamma^{-1} D^{-1} X (X'D^{-1}X + M^{-1})^{-1} M^{-1} E(f|q).
Vec optimal_weights_bl(const FactorModel& fm, const GaussianEstimate& factors, double gamma);

enum class FusionMethod { single, pw, ci, ici, cu };

struct FusionSpec {
    FusionMethod method = FusionMethod::single;
    std::size_t single_index = 0;  ///< which source when method == single
    CiOptions ci;
    IciOptions ici;
    CuOptions cu;

    /// Parses "pw", "ci", "ici", "cu", "single" or "single:<index>".
    static FusionSpec parse(const std::string& tag);
    std::string tag() const;
};

/// One view source: its views and the aleatoric factor covariance that goes
/// with them (F_s). An empty F falls back to FactorModel::factor_cov.
struct SourceViews {
    std::string name;
    ViewSet views;
    Mat factor_cov;
};

struct FusedFactors {
    GaussianEstimate estimate;             ///< fused f | q
    std::vector<GaussianEstimate> sources; ///< per-source f | q_s before fusion
    std::optional<FusionWeights> weights;  ///< CI weights, or ICI weights of a two-source fold
};

/// Per-source posterior_theta then predictive_factors, followed by
/// state-level fusion of the resulting f | q_s estimates.
FusedFactors fuse_factor_views(const Prior& prior, const std::vector<SourceViews>& sources,
                               const FactorModel& fm, const FusionSpec& fusion);

/// Applies an already-configured fusion to a list of estimates.
FusedFactors fuse_estimates(std::vector<GaussianEstimate> estimates, const FusionSpec& fusion);

struct PipelineResult {
    FusedFactors factors;
    Vec weights;
};

/// Views -> per-source predictive factors -> fusion -> optimal_weights_bl.
PipelineResult bl_pipeline(const Prior& prior, const std::vector<SourceViews>& sources,
                           const FactorModel& fm, const FusionSpec& fusion, double gamma);

}  // namespace blfuse
