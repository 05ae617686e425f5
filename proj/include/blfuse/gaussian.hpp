#pragma once

#include "blfuse/linalg.hpp"

#include <json.hpp>

#include <array>
#include <span>
#include <vector>

namespace blfuse {

/// A multivariate Gaussian summary (mean, covariance). Views, posteriors and
/// fused estimates are all carried in this form.
///
/// Construction validates and normalizes the covariance:
///  - asymmetry above 1e-10 (scaled by max(1, max|cov|)) is rejected,
///    smaller asymmetry is removed by (M + M')/2;
///  - a minimum eigenvalue in (-1e-10, 1e-12] is treated as round-off and
///    1e-10 * I is added once; below -1e-10 the input is rejected.
class GaussianEstimate {
public:
    static constexpr double kSymmetryTol = 1e-10;
    static constexpr double kJitter = 1e-10;
    static constexpr double kJitterTrigger = 1e-12;

    GaussianEstimate(Vec mean, Mat cov);

    const Vec& mean() const noexcept { return mean_; }
    const Mat& cov() const noexcept { return cov_; }
    Index dim() const noexcept { return mean_.size(); }

    /// Whether construction had to add jitter to reach positive definiteness.
    bool jittered() const noexcept { return jittered_; }

private:
    Vec mean_;
    Mat cov_;
    bool jittered_ = false;
};

inline constexpr double kDefaultConsistencyTol = 1e-8;

/// True iff candidate - truth is positive semi-definite up to `tol`, i.e. the
/// candidate covariance does not understate the true error covariance.
bool is_consistent_wrt(const Mat& candidate, const Mat& truth,
                       double tol = kDefaultConsistencyTol);

/// sqrt((ma - mb)' (Sa + Sb)^{-1} (ma - mb)). Throws NumericalError carrying
/// the condition estimate if the pooled covariance is singular.
double mahalanobis_distance(const GaussianEstimate& a, const GaussianEstimate& b);

struct PairDistance {
    std::size_t first;
    std::size_t second;
    double distance;
};

/// All pairwise Mahalanobis distances, i < j. With a threshold, callers can
/// flag mutually inconsistent sources (a Covariance Union use case).
std::vector<PairDistance> pairwise_mahalanobis(std::span<const GaussianEstimate> sources);

using Point2 = std::array<double, 2>;

/// Points on {x : (x - mean)' cov^{-1} (x - mean) = 1} for a 2-D estimate,
/// counter-clockwise by parameter angle starting on the major axis.
std::vector<Point2> concentration_ellipse(const GaussianEstimate& e, int n_points);

/// {"mean": [...], "cov": [[...], ...]} with cov stored as full row-major rows.
nlohmann::json to_json(const GaussianEstimate& e);
GaussianEstimate gaussian_from_json(const nlohmann::json& j);

}  // namespace blfuse
