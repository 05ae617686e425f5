#pragma once

#include "blfuse/gaussian.hpp"

#include <span>
#include <vector>

namespace blfuse {

/// Convex scalar weights over sources: each in [0, 1], summing to 1.
class FusionWeights {
public:
    static constexpr double kSumTol = 1e-10;

    explicit FusionWeights(std::vector<double> omegas);
    static FusionWeights uniform(std::size_t n);

    const std::vector<double>& omegas() const noexcept { return omegas_; }
    double operator[](std::size_t i) const { return omegas_[i]; }
    std::size_t size() const noexcept { return omegas_.size(); }

private:
    std::vector<double> omegas_;
};

/// What the CI / ICI weight search minimizes.
enum class TightnessObjective { trace, determinant };

/// Thrown when an iterative fusion fails to converge; carries the best
/// estimate found so far.
class FusionConvergenceError : public NumericalError {
public:
    FusionConvergenceError(const std::string& what, GaussianEstimate best)
        : NumericalError(what), best_(std::move(best)) {}
    const GaussianEstimate& best_so_far() const noexcept { return best_; }

private:
    GaussianEstimate best_;
};

/// Precision-weighted fusion, optimal when cross-covariances are zero:
/// cov = (sum_s S_s^{-1})^{-1}, mean = cov * sum_s S_s^{-1} m_s.
GaussianEstimate fuse_pw(std::span<const GaussianEstimate> sources);

struct CiOptions {
    TightnessObjective objective = TightnessObjective::trace;
    double interval_tol = 1e-10;      ///< golden-section tolerance in omega (two sources)
    int iterations_per_source = 200;  ///< Nelder-Mead budget is this times S (S > 2)
};

struct CiResult {
    GaussianEstimate estimate;
    FusionWeights weights;
};

/// Covariance Intersection: cov^{-1} = sum_s w_s S_s^{-1},
/// mean = cov * sum_s w_s S_s^{-1} m_s, with w on the simplex minimizing the
/// tightness objective of cov. Consistent for any unknown cross-correlation.
CiResult fuse_ci(std::span<const GaussianEstimate> sources, const CiOptions& opts = {});

struct IciOptions {
    TightnessObjective objective = TightnessObjective::trace;
    double interval_tol = 1e-10;
};

struct IciPairResult {
    GaussianEstimate estimate;
    FusionWeights weights;  ///< (w, 1 - w): w multiplies the first source's covariance
    Mat gain_a;             ///< mean = gain_a * m_a + gain_b * m_b, gain_a + gain_b = I
    Mat gain_b;
};

/// Inverse Covariance Intersection of a pair:
/// cov^{-1} = S_a^{-1} + S_b^{-1} - (w S_a + (1 - w) S_b)^{-1}.
/// Throws NumericalError when the fused information matrix is not positive
/// definite at the selected w.
IciPairResult fuse_ici_pair(const GaussianEstimate& a, const GaussianEstimate& b,
                            const IciOptions& opts = {});

struct IciResult {
    GaussianEstimate estimate;
    std::vector<std::size_t> order;           ///< source indices in fusion order
    std::vector<FusionWeights> step_weights;  ///< one entry per pairwise step
};

/// Recursive ICI: left fold of fuse_ici_pair over the sources in input order.
IciResult fuse_ici(std::span<const GaussianEstimate> sources, const IciOptions& opts = {});

struct CuOptions {
    double rho_initial = 10.0;
    double rho_max = 1e6;
    double rho_growth = 2.0;
    int iterations_per_stage = 400;  ///< Nelder-Mead iterations per penalty stage, per parameter
    int polish_restarts = 1;         ///< extra Nelder-Mead restarts at the final penalty
    double stage_f_tol = 1e-6;
    double stage_x_tol = 1e-4;
    double final_f_tol = 1e-10;
    double final_x_tol = 1e-7;
    int max_start_doublings = 60;
};

struct CUSolution {
    GaussianEstimate estimate;
    double objective;        ///< det of the fused covariance
    double constraint_slack; ///< min_s min eig(cov - S_s - d_s d_s'), d_s = mean - m_s
    int evaluations;
    bool converged;  ///< final Nelder-Mead stage met its tolerance within budget
};

/// Covariance Union: minimize det(cov) over (mean, cov) subject to
/// cov >= S_s + (mean - m_s)(mean - m_s)' for every source s.
///
/// The search vector holds the n mean entries followed by the n(n+1)/2
/// upper-triangle entries of cov. It is solved in coordinates whitened by the
/// average source covariance with a quadratic penalty on the constraint
/// violation (rho doubling up to rho_max) and Nelder-Mead inner solves; a
/// final diagonal shift restores exact feasibility.
CUSolution fuse_cu(std::span<const GaussianEstimate> sources, const CuOptions& opts = {});

/// min_s min eig(cov - S_s - (mean - m_s)(mean - m_s)').
double cu_constraint_slack(const Vec& mean, const Mat& cov, std::span<const GaussianEstimate> sources);

}  // namespace blfuse
