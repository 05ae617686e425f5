#include "blfuse/blapt.hpp"

#include <cmath>

namespace blfuse {

namespace {

void require_positive(const Vec& v, const char* context, const char* name) {
    for (Index i = 0; i < v.size(); ++i) {
        if (!(v(i) > 0.0) || !std::isfinite(v(i))) {
            throw ValidationError(std::string(context) + ": " + name + " entries must be positive and finite");
        }
    }
}

void require_spd(const Mat& m, const char* context, const char* name) {
    linalg::require_square(m, context, name);
    if (linalg::max_asymmetry(m) > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
        throw ValidationError(std::string(context) + ": " + name + " is not symmetric");
    }
    if (Eigen::LLT<Mat>(linalg::symmetrize(m)).info() != Eigen::Success) {
        throw ValidationError(std::string(context) + ": " + name + " is not positive definite");
    }
}

// Shared pieces of the hierarchical predictive: D^{-1}X, and the k x k inner
// system A = X'D^{-1}X + M^{-1} factored once.
struct Hierarchy {
    Mat dinv_x;
    Eigen::LLT<Mat> inner;
    Vec rhs;  // M^{-1} E(f|q)
};

Hierarchy build_hierarchy(const FactorModel& fm, const GaussianEstimate& factors, const char* context) {
    fm.validate();
    linalg::require_same_size(factors.dim(), fm.n_factors(), context);
    const Mat& x = fm.exposures;
    const Vec dinv = fm.idio_var.cwiseInverse();
    Mat dinv_x = dinv.asDiagonal() * x;
    const Mat minv = linalg::spd_inverse(factors.cov(), context);
    const Mat a = linalg::symmetrize(x.transpose() * dinv_x + minv);
    const double cond = linalg::spd_condition(a);
    if (!(cond <= kMaxInnerCondition)) {
        throw NumericalError(std::string(context) + ": X'D^{-1}X + M^{-1} is ill-conditioned (condition " +
                                 std::to_string(cond) + ")",
                             cond);
    }
    return {std::move(dinv_x), Eigen::LLT<Mat>(a), minv * factors.mean()};
}

}  // namespace

void FactorModel::validate() const {
    if (exposures.rows() == 0 || exposures.cols() == 0) throw ValidationError("FactorModel: empty exposures");
    linalg::require_same_size(idio_var.size(), exposures.rows(), "FactorModel (idio_var vs exposures rows)");
    require_positive(idio_var, "FactorModel", "idio_var");
    if (factor_cov.size() != 0) {
        linalg::require_same_size(factor_cov.rows(), exposures.cols(), "FactorModel (factor_cov vs exposures cols)");
        require_spd(factor_cov, "FactorModel", "factor_cov");
    }
}

void ViewSet::validate() const {
    linalg::require_same_size(q.size(), omega.size(), "ViewSet");
    require_positive(omega, "ViewSet", "omega");
    if (!q.allFinite()) throw ValidationError("ViewSet: q must be finite");
}

void Prior::validate() const {
    linalg::require_same_size(xi.size(), V.rows(), "Prior");
    require_spd(V, "Prior", "V");
}

GaussianEstimate posterior_theta(const Prior& prior, const ViewSet& views) {
    prior.validate();
    views.validate();
    linalg::require_same_size(prior.xi.size(), views.q.size(), "posterior_theta");
    const Mat vinv = linalg::spd_inverse(prior.V, "posterior_theta");
    const Vec omega_inv = views.omega.cwiseInverse();
    Mat precision = vinv;
    precision.diagonal() += omega_inv;
    const Mat cov = linalg::spd_inverse(precision, "posterior_theta");
    Vec mean = cov * (vinv * prior.xi + omega_inv.cwiseProduct(views.q));
    return GaussianEstimate(std::move(mean), cov);
}

GaussianEstimate predictive_factors(const GaussianEstimate& posterior, const Mat& factor_cov) {
    linalg::require_square(factor_cov, "predictive_factors", "F");
    linalg::require_same_size(posterior.dim(), factor_cov.rows(), "predictive_factors");
    return GaussianEstimate(posterior.mean(), posterior.cov() + factor_cov);
}

GaussianEstimate predictive_returns(const FactorModel& fm, const GaussianEstimate& factors) {
    const Hierarchy h = build_hierarchy(fm, factors, "predictive_returns");
    // K = (X'D^{-1}X + M^{-1})^{-1} X'D^{-1}, k x n
    const Mat k = h.inner.solve(h.dinv_x.transpose());
    Mat precision = -h.dinv_x * k;
    precision.diagonal() += fm.idio_var.cwiseInverse();
    const Mat cov = linalg::spd_inverse(linalg::symmetrize(precision), "predictive_returns");
    Vec mean = cov * (h.dinv_x * h.inner.solve(h.rhs));
    return GaussianEstimate(std::move(mean), cov);
}

Vec optimal_weights_bl(const FactorModel& fm, const GaussianEstimate& factors, double gamma) {
    if (!(gamma > 0.0)) throw ValidationError("optimal_weights_bl: gamma must be positive");
    const Hierarchy h = build_hierarchy(fm, factors, "optimal_weights_bl");
    return (h.dinv_x * h.inner.solve(h.rhs)) / gamma;
}

FusionSpec FusionSpec::parse(const std::string& tag) {
    FusionSpec spec;
    if (tag == "pw") {
        spec.method = FusionMethod::pw;
    } else if (tag == "ci") {
        spec.method = FusionMethod::ci;
    } else if (tag == "ici") {
        spec.method = FusionMethod::ici;
    } else if (tag == "cu") {
        spec.method = FusionMethod::cu;
    } else if (tag == "single") {
        spec.method = FusionMethod::single;
    } else if (tag.rfind("single:", 0) == 0) {
        spec.method = FusionMethod::single;
        const std::string idx = tag.substr(7);
        if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos) {
            throw ValidationError("fusion method '" + tag + "': expected single:<index>");
        }
        spec.single_index = std::stoul(idx);
    } else {
        throw ValidationError("unknown fusion method '" + tag + "' (expected pw, ci, ici, cu or single[:i])");
    }
    return spec;
}

std::string FusionSpec::tag() const {
    switch (method) {
        case FusionMethod::pw: return "pw";
        case FusionMethod::ci: return "ci";
        case FusionMethod::ici: return "ici";
        case FusionMethod::cu: return "cu";
        case FusionMethod::single: return "single:" + std::to_string(single_index);
    }
    return "single";
}

FusedFactors fuse_estimates(std::vector<GaussianEstimate> estimates, const FusionSpec& fusion) {
    if (estimates.empty()) throw ValidationError("fuse_estimates: no sources");
    std::optional<FusionWeights> weights;
    auto fused = [&]() -> GaussianEstimate {
        if (estimates.size() == 1 && fusion.method != FusionMethod::single) return estimates.front();
        switch (fusion.method) {
            case FusionMethod::single:
                if (fusion.single_index >= estimates.size()) {
                    throw ValidationError("fuse_estimates: single source index " +
                                          std::to_string(fusion.single_index) + " out of range");
                }
                return estimates[fusion.single_index];
            case FusionMethod::pw:
                return fuse_pw(estimates);
            case FusionMethod::ci: {
                auto r = fuse_ci(estimates, fusion.ci);
                weights = std::move(r.weights);
                return std::move(r.estimate);
            }
            case FusionMethod::ici: {
                auto r = fuse_ici(estimates, fusion.ici);
                if (r.step_weights.size() == 1) weights = r.step_weights.front();
                return std::move(r.estimate);
            }
            case FusionMethod::cu:
                return fuse_cu(estimates, fusion.cu).estimate;
        }
        throw ValidationError("fuse_estimates: unknown method");
    }();
    return {std::move(fused), std::move(estimates), std::move(weights)};
}

FusedFactors fuse_factor_views(const Prior& prior, const std::vector<SourceViews>& sources,
                               const FactorModel& fm, const FusionSpec& fusion) {
    if (sources.empty()) throw ValidationError("bl_pipeline: need at least one view source");
    std::vector<GaussianEstimate> per_source;
    per_source.reserve(sources.size());
    for (const auto& src : sources) {
        const Mat& f = src.factor_cov.size() != 0 ? src.factor_cov : fm.factor_cov;
        if (f.size() == 0) {
            throw ValidationError("bl_pipeline: source '" + src.name + "' has no factor covariance");
        }
        per_source.push_back(predictive_factors(posterior_theta(prior, src.views), f));
    }
    return fuse_estimates(std::move(per_source), fusion);
}

PipelineResult bl_pipeline(const Prior& prior, const std::vector<SourceViews>& sources,
                           const FactorModel& fm, const FusionSpec& fusion, double gamma) {
    auto factors = fuse_factor_views(prior, sources, fm, fusion);
    Vec w = optimal_weights_bl(fm, factors.estimate, gamma);
    return {std::move(factors), std::move(w)};
}

}  // namespace blfuse
