#include "blfuse/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace blfuse {

GaussianEstimate::GaussianEstimate(Vec mean, Mat cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    linalg::require_square(cov_, "GaussianEstimate", "cov");
    if (cov_.rows() != mean_.size()) {
        throw ValidationError("GaussianEstimate: mean length " + std::to_string(mean_.size()) +
                              " does not match cov dimension " + std::to_string(cov_.rows()));
    }
    if (mean_.size() == 0) throw ValidationError("GaussianEstimate: empty estimate");
    if (!mean_.allFinite() || !cov_.allFinite()) {
        throw ValidationError("GaussianEstimate: non-finite entries");
    }
    const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
    const double asym = linalg::max_asymmetry(cov_);
    if (asym > kSymmetryTol * scale) {
        throw ValidationError("GaussianEstimate: cov is not symmetric (max asymmetry " +
                              std::to_string(asym) + ")");
    }
    cov_ = linalg::symmetrize(cov_);
    const double lo = linalg::min_eigenvalue(cov_);
    if (lo <= -kJitter) {
        throw ValidationError("GaussianEstimate: cov is not positive definite (min eigenvalue " +
                              std::to_string(lo) + ")");
    }
    if (lo <= kJitterTrigger) {
        cov_ += kJitter * Mat::Identity(cov_.rows(), cov_.cols());
        jittered_ = true;
    }
}

bool is_consistent_wrt(const Mat& candidate, const Mat& truth, double tol) {
    linalg::require_square(candidate, "is_consistent_wrt", "candidate");
    linalg::require_square(truth, "is_consistent_wrt", "truth");
    linalg::require_same_size(candidate.rows(), truth.rows(), "is_consistent_wrt");
    for (const Mat* m : {&candidate, &truth}) {
        const double scale = std::max(1.0, m->cwiseAbs().maxCoeff());
        if (linalg::max_asymmetry(*m) > GaussianEstimate::kSymmetryTol * scale) {
            throw ValidationError("is_consistent_wrt: input is not symmetric");
        }
    }
    return linalg::min_eigenvalue(linalg::symmetrize(candidate - truth)) >= -tol;
}

double mahalanobis_distance(const GaussianEstimate& a, const GaussianEstimate& b) {
    linalg::require_same_size(a.dim(), b.dim(), "mahalanobis_distance");
    const Mat pooled = a.cov() + b.cov();
    const double cond = linalg::spd_condition(pooled);
    if (!(cond < 1e14)) {
        throw NumericalError("mahalanobis_distance: pooled covariance is singular", cond);
    }
    const Vec d = a.mean() - b.mean();
    const double q = d.dot(linalg::spd_solve(pooled, d, "mahalanobis_distance"));
    return std::sqrt(std::max(q, 0.0));
}

std::vector<PairDistance> pairwise_mahalanobis(std::span<const GaussianEstimate> sources) {
    std::vector<PairDistance> out;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = i + 1; j < sources.size(); ++j) {
            out.push_back({i, j, mahalanobis_distance(sources[i], sources[j])});
        }
    }
    return out;
}

std::vector<Point2> concentration_ellipse(const GaussianEstimate& e, int n_points) {
    if (e.dim() != 2) {
        throw ValidationError("concentration_ellipse: estimate must be 2-D, got dimension " +
                              std::to_string(e.dim()));
    }
    if (n_points < 3) throw ValidationError("concentration_ellipse: need n_points >= 3");

    Eigen::SelfAdjointEigenSolver<Mat> es(e.cov());
    // Major axis first; flip the minor axis if needed so the map is orientation preserving.
    Mat axes(2, 2);
    axes.col(0) = es.eigenvectors().col(1) * std::sqrt(es.eigenvalues()(1));
    axes.col(1) = es.eigenvectors().col(0) * std::sqrt(es.eigenvalues()(0));
    if (axes.determinant() < 0.0) axes.col(1) = -axes.col(1);

    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        const double theta = 2.0 * std::numbers::pi * i / n_points;
        const Eigen::Vector2d x = e.mean() + axes * Eigen::Vector2d(std::cos(theta), std::sin(theta));
        pts.push_back({x(0), x(1)});
    }
    return pts;
}

nlohmann::json to_json(const GaussianEstimate& e) {
    nlohmann::json mean = nlohmann::json::array();
    for (Index i = 0; i < e.dim(); ++i) mean.push_back(e.mean()(i));
    nlohmann::json cov = nlohmann::json::array();
    for (Index i = 0; i < e.dim(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < e.dim(); ++j) row.push_back(e.cov()(i, j));
        cov.push_back(std::move(row));
    }
    return {{"mean", std::move(mean)}, {"cov", std::move(cov)}};
}

GaussianEstimate gaussian_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("mean") || !j.contains("cov")) {
        throw ValidationError("estimate JSON must be an object with \"mean\" and \"cov\"");
    }
    const auto& jm = j.at("mean");
    const auto& jc = j.at("cov");
    if (!jm.is_array() || !jc.is_array()) {
        throw ValidationError("estimate JSON: \"mean\" and \"cov\" must be arrays");
    }
    const auto n = static_cast<Index>(jm.size());
    Vec mean(n);
    for (Index i = 0; i < n; ++i) {
        if (!jm[i].is_number()) throw ValidationError("estimate JSON: mean entries must be numbers");
        mean(i) = jm[i].get<double>();
    }
    if (static_cast<Index>(jc.size()) != n) {
        throw ValidationError("estimate JSON: cov must have " + std::to_string(n) + " rows");
    }
    Mat cov(n, n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = jc[i];
        if (!row.is_array() || static_cast<Index>(row.size()) != n) {
            throw ValidationError("estimate JSON: cov row " + std::to_string(i) + " must have " +
                                  std::to_string(n) + " entries");
        }
        for (Index k = 0; k < n; ++k) {
            if (!row[k].is_number()) throw ValidationError("estimate JSON: cov entries must be numbers");
            cov(i, k) = row[k].get<double>();
        }
    }
    return GaussianEstimate(std::move(mean), std::move(cov));
}

}  // namespace blfuse
