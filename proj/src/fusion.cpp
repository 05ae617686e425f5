#include "blfuse/fusion.hpp"

#include "blfuse/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace blfuse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_sources(std::span<const GaussianEstimate> sources, std::size_t min_count, const char* context) {
    if (sources.size() < min_count) {
        throw ValidationError(std::string(context) + ": need at least " + std::to_string(min_count) +
                              " source(s), got " + std::to_string(sources.size()));
    }
    for (const auto& s : sources) linalg::require_same_size(s.dim(), sources.front().dim(), context);
}

std::vector<Mat> precisions(std::span<const GaussianEstimate> sources, const char* context) {
    std::vector<Mat> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(linalg::spd_inverse(s.cov(), context));
    return out;
}

// Tightness of a covariance given its information matrix; +inf if not PD.
double tightness_from_information(const Mat& info, TightnessObjective objective) {
    Eigen::LLT<Mat> llt(info);
    if (llt.info() != Eigen::Success) return kInf;
    if (objective == TightnessObjective::determinant) {
        const auto ld = linalg::spd_log_det(info);
        return ld ? -*ld : kInf;
    }
    return llt.solve(Mat::Identity(info.rows(), info.cols())).trace();
}

bool nearly_equal(double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

GaussianEstimate from_information(const Mat& info, const Vec& info_mean, const char* context) {
    const Mat cov = linalg::spd_inverse(linalg::symmetrize(info), context);
    return GaussianEstimate(cov * info_mean, cov);
}

}  // namespace

FusionWeights::FusionWeights(std::vector<double> omegas) : omegas_(std::move(omegas)) {
    if (omegas_.empty()) throw ValidationError("FusionWeights: empty weight vector");
    double sum = 0.0;
    for (double w : omegas_) {
        if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("FusionWeights: weight outside [0, 1]");
        sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTol) {
        throw ValidationError("FusionWeights: weights sum to " + std::to_string(sum));
    }
}

FusionWeights FusionWeights::uniform(std::size_t n) {
    return FusionWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

GaussianEstimate fuse_pw(std::span<const GaussianEstimate> sources) {
    require_sources(sources, 1, "fuse_pw");
    if (sources.size() == 1) return sources.front();
    const Index n = sources.front().dim();
    Mat info = Mat::Zero(n, n);
    Vec info_mean = Vec::Zero(n);
    for (const auto& s : sources) {
        const Mat p = linalg::spd_inverse(s.cov(), "fuse_pw");
        info += p;
        info_mean += p * s.mean();
    }
    return from_information(info, info_mean, "fuse_pw");
}

CiResult fuse_ci(std::span<const GaussianEstimate> sources, const CiOptions& opts) {
    require_sources(sources, 2, "fuse_ci");
    const std::size_t count = sources.size();
    const auto prec = precisions(sources, "fuse_ci");

    auto information = [&](const std::vector<double>& w) {
        Mat info = Mat::Zero(prec.front().rows(), prec.front().cols());
        for (std::size_t s = 0; s < count; ++s) info += w[s] * prec[s];
        return info;
    };
    auto objective = [&](const std::vector<double>& w) {
        return tightness_from_information(information(w), opts.objective);
    };
    auto finish = [&](std::vector<double> w) {
        const double sum = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto& v : w) v = std::clamp(v / sum, 0.0, 1.0);
        Vec info_mean = Vec::Zero(sources.front().dim());
        for (std::size_t s = 0; s < count; ++s) info_mean += w[s] * (prec[s] * sources[s].mean());
        return CiResult{from_information(information(w), info_mean, "fuse_ci"), FusionWeights(w)};
    };

    // Objective is convex on the simplex: equal values at the centroid and all
    // vertices means it is flat, and the uniform weights are returned.
    const std::vector<double> centroid(count, 1.0 / static_cast<double>(count));
    const double f_centroid = objective(centroid);
    std::vector<double> best_vertex_w;
    double best_vertex_f = kInf;
    bool flat = true;
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> e(count, 0.0);
        e[s] = 1.0;
        const double f = objective(e);
        flat = flat && nearly_equal(f, f_centroid);
        if (f < best_vertex_f) {
            best_vertex_f = f;
            best_vertex_w = e;
        }
    }
    if (flat) return finish(centroid);

    if (count == 2) {
        const auto m = optim::minimize_bracketed(
            [&](double w) { return objective({w, 1.0 - w}); }, 0.0, 1.0, opts.interval_tol);
        return finish({m.x, 1.0 - m.x});
    }

    // Softmax parameterization over S - 1 free logits (last logit pinned at 0).
    auto softmax = [count](const Vec& z) {
        std::vector<double> w(count);
        double zmax = 0.0;
        for (Index i = 0; i < z.size(); ++i) zmax = std::max(zmax, z(i));
        double sum = 0.0;
        for (std::size_t s = 0; s < count; ++s) {
            const double zs = s + 1 < count ? z(static_cast<Index>(s)) : 0.0;
            w[s] = std::exp(zs - zmax);
            sum += w[s];
        }
        for (auto& v : w) v /= sum;
        return w;
    };
    optim::NelderMeadOptions nm;
    nm.max_iterations = opts.iterations_per_source * static_cast<int>(count);
    nm.f_tol = 1e-13;
    nm.x_tol = kInf;
    nm.initial_step = 1.0;
    const auto res = optim::nelder_mead([&](const Vec& z) { return objective(softmax(z)); },
                                        Vec::Zero(static_cast<Index>(count - 1)), nm);
    if (best_vertex_f <= res.fx) return finish(best_vertex_w);
    if (!res.converged) {
        throw FusionConvergenceError("fuse_ci: weight search did not converge in " +
                                         std::to_string(nm.max_iterations) + " iterations",
                                     finish(softmax(res.x)).estimate);
    }
    return finish(softmax(res.x));
}

IciPairResult fuse_ici_pair(const GaussianEstimate& a, const GaussianEstimate& b, const IciOptions& opts) {
    linalg::require_same_size(a.dim(), b.dim(), "fuse_ici_pair");
    const Mat pa = linalg::spd_inverse(a.cov(), "fuse_ici_pair");
    const Mat pb = linalg::spd_inverse(b.cov(), "fuse_ici_pair");
    const Mat joint = pa + pb;

    auto mixed = [&](double w) { return Mat(w * a.cov() + (1.0 - w) * b.cov()); };
    auto information = [&](double w) -> std::optional<std::pair<Mat, Mat>> {
        Eigen::LLT<Mat> llt(mixed(w));
        if (llt.info() != Eigen::Success) return std::nullopt;
        Mat mixed_inv = linalg::symmetrize(llt.solve(Mat::Identity(a.dim(), a.dim())));
        return std::pair{linalg::symmetrize(joint - mixed_inv), std::move(mixed_inv)};
    };
    auto objective = [&](double w) {
        const auto info = information(w);
        return info ? tightness_from_information(info->first, opts.objective) : kInf;
    };

    const double f0 = objective(0.0);
    const double f1 = objective(1.0);
    const double fh = objective(0.5);
    double w = 0.5;
    if (!(nearly_equal(f0, fh) && nearly_equal(f1, fh))) {
        w = optim::minimize_bracketed(objective, 0.0, 1.0, opts.interval_tol).x;
    }

    const auto info = information(w);
    if (!info || !std::isfinite(tightness_from_information(info->first, opts.objective))) {
        throw NumericalError("fuse_ici_pair: fused information matrix is not positive definite "
                             "(a tight consistent estimate does not exist)");
    }
    const Mat cov = linalg::spd_inverse(info->first, "fuse_ici_pair");
    Mat gain_a = cov * (pa - w * info->second);
    Mat gain_b = cov * (pb - (1.0 - w) * info->second);
    Vec mean = gain_a * a.mean() + gain_b * b.mean();
    return {GaussianEstimate(std::move(mean), cov), FusionWeights({w, 1.0 - w}), std::move(gain_a),
            std::move(gain_b)};
}

IciResult fuse_ici(std::span<const GaussianEstimate> sources, const IciOptions& opts) {
    require_sources(sources, 2, "fuse_ici");
    auto first = fuse_ici_pair(sources[0], sources[1], opts);
    IciResult out{std::move(first.estimate), {0, 1}, {std::move(first.weights)}};
    for (std::size_t s = 2; s < sources.size(); ++s) {
        auto step = fuse_ici_pair(out.estimate, sources[s], opts);
        out.estimate = std::move(step.estimate);
        out.order.push_back(s);
        out.step_weights.push_back(std::move(step.weights));
    }
    return out;
}

double cu_constraint_slack(const Vec& mean, const Mat& cov, std::span<const GaussianEstimate> sources) {
    double slack = kInf;
    for (const auto& s : sources) {
        const Vec d = mean - s.mean();
        slack = std::min(slack, linalg::min_eigenvalue(linalg::symmetrize(cov - s.cov() - d * d.transpose())));
    }
    return slack;
}

namespace {

// (mean, upper triangle of cov) packing for the CU search vector.
struct CuLayout {
    Index n;

    Index size() const { return n + n * (n + 1) / 2; }

    Vec pack(const Vec& mean, const Mat& cov) const {
        Vec x(size());
        x.head(n) = mean;
        Index k = n;
        for (Index i = 0; i < n; ++i) {
            for (Index j = i; j < n; ++j) x(k++) = cov(i, j);
        }
        return x;
    }

    void unpack(const Vec& x, Vec& mean, Mat& cov) const {
        mean = x.head(n);
        cov.resize(n, n);
        Index k = n;
        for (Index i = 0; i < n; ++i) {
            for (Index j = i; j < n; ++j) {
                cov(i, j) = x(k);
                cov(j, i) = x(k);
                ++k;
            }
        }
    }
};

// Minimum eigenvalue of a small symmetric matrix; closed forms for n <= 3.
double small_min_eigenvalue(const Mat& m) {
    switch (m.rows()) {
        case 1:
            return m(0, 0);
        case 2: {
            const double tr = 0.5 * (m(0, 0) + m(1, 1));
            const double diff = 0.5 * (m(0, 0) - m(1, 1));
            return tr - std::sqrt(diff * diff + m(0, 1) * m(0, 1));
        }
        case 3: {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
            es.computeDirect(Eigen::Matrix3d(m), Eigen::EigenvaluesOnly);
            return es.eigenvalues()(0);
        }
        default:
            return linalg::min_eigenvalue(m);
    }
}

}  // namespace

CUSolution fuse_cu(std::span<const GaussianEstimate> sources, const CuOptions& opts) {
    require_sources(sources, 2, "fuse_cu");
    const Index n = sources.front().dim();
    const CuLayout layout{n};

    // Whitening: centre on the PW mean, scale by the average source covariance.
    const GaussianEstimate pw = fuse_pw(sources);
    Mat avg = Mat::Zero(n, n);
    for (const auto& s : sources) avg += s.cov();
    avg /= static_cast<double>(sources.size());
    const Mat chol = Eigen::LLT<Mat>(avg).matrixL();
    const auto whiten_vec = [&](const Vec& v) -> Vec { return chol.triangularView<Eigen::Lower>().solve(v - pw.mean()); };
    const auto whiten_mat = [&](const Mat& m) -> Mat {
        const Mat half = chol.triangularView<Eigen::Lower>().solve(m);
        return linalg::symmetrize(chol.triangularView<Eigen::Lower>().solve(half.transpose()));
    };

    std::vector<Vec> means;
    std::vector<Mat> covs;
    for (const auto& s : sources) {
        means.push_back(whiten_vec(s.mean()));
        covs.push_back(whiten_mat(s.cov()));
    }

    Vec mean;
    Mat cov;
    Mat work(n, n);
    auto slack_of = [&](const Vec& m, const Mat& c) {
        double slack = kInf;
        for (std::size_t s = 0; s < means.size(); ++s) {
            const Vec d = m - means[s];
            work.noalias() = c - covs[s];
            work.noalias() -= d * d.transpose();
            slack = std::min(slack, small_min_eigenvalue(work));
        }
        return slack;
    };

    int evaluations = 0;
    double rho = opts.rho_initial;
    auto penalized = [&](const Vec& x) {
        ++evaluations;
        layout.unpack(x, mean, cov);
        const auto ld = linalg::spd_log_det(cov);
        if (!ld) return kInf;
        const double violation = std::max(0.0, -slack_of(mean, cov));
        return *ld + rho * violation * violation;
    };

    // Feasible start: PW mean (the whitening origin) and a doubled-up copy of
    // the widest inflated source covariance.
    const Vec start_mean = Vec::Zero(n);
    Mat base;
    double widest = -kInf;
    for (std::size_t s = 0; s < means.size(); ++s) {
        const Mat inflated = covs[s] + means[s] * means[s].transpose();
        if (inflated.trace() > widest) {
            widest = inflated.trace();
            base = inflated;
        }
    }
    double alpha = 1.0;
    int doublings = 0;
    while (slack_of(start_mean, alpha * base) < 0.0) {
        if (++doublings > opts.max_start_doublings) {
            throw NumericalError("fuse_cu: could not construct a feasible starting point");
        }
        alpha *= 2.0;
    }
    Vec x = layout.pack(start_mean, alpha * base);

    // Intermediate stages only need to track the penalty path; the final
    // stage and the polish restarts run at the tight tolerance.
    optim::NelderMeadOptions nm;
    nm.max_iterations = opts.iterations_per_stage * static_cast<int>(layout.size());
    nm.f_tol = opts.stage_f_tol;
    nm.x_tol = opts.stage_x_tol;
    nm.initial_step = 0.25;
    for (; rho < opts.rho_max; rho *= opts.rho_growth) {
        x = optim::nelder_mead(penalized, x, nm).x;
        nm.initial_step = 0.05;
    }
    rho = opts.rho_max;
    nm.f_tol = opts.final_f_tol;
    nm.x_tol = opts.final_x_tol;
    bool converged = true;
    for (int r = 0; r <= opts.polish_restarts; ++r) {
        nm.initial_step = r == 0 ? 0.05 : 0.01;
        const auto res = optim::nelder_mead(penalized, x, nm);
        x = res.x;
        converged = res.converged;
    }

    layout.unpack(x, mean, cov);
    // Diagonal shift: raises every constraint eigenvalue by the same amount.
    const double slack = slack_of(mean, cov);
    if (slack < 0.0) cov += (-slack * (1.0 + 1e-9) + 1e-14) * Mat::Identity(n, n);
    if (!linalg::spd_log_det(cov)) throw NumericalError("fuse_cu: solver returned an indefinite covariance");

    const Vec fused_mean = pw.mean() + chol * mean;
    const Mat fused_cov = linalg::symmetrize(chol * cov * chol.transpose());
    GaussianEstimate estimate(fused_mean, fused_cov);
    const double objective = std::exp(*linalg::spd_log_det(estimate.cov()));
    const double final_slack = cu_constraint_slack(estimate.mean(), estimate.cov(), sources);
    return {std::move(estimate), objective, final_slack, evaluations, converged};
}

}  // namespace blfuse
