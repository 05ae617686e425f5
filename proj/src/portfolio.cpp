#include "blfuse/portfolio.hpp"

#include <cmath>

namespace blfuse {

namespace {

void check_gamma(double gamma, const char* context) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw ValidationError(std::string(context) + ": gamma must be positive");
    }
}

void check_sigma(const Mat& sigma, Index n, const char* context) {
    linalg::require_square(sigma, context, "sigma");
    linalg::require_same_size(sigma.rows(), n, context);
}

}  // namespace

void CostModel::validate() const {
    for (Index i = 0; i < dollar_volume.size(); ++i) {
        if (!(dollar_volume(i) > 0.0)) throw ValidationError("CostModel: dollar volumes must be positive");
    }
    if (!(wealth > 0.0)) throw ValidationError("CostModel: wealth must be positive");
    linalg::require_same_size(realized_return_adj.size(), dollar_volume.size(), "CostModel");
}

DiagMat CostModel::impact(double impact_scale) const {
    DiagMat lambda = impact_matrix(dollar_volume);
    lambda.diagonal() *= impact_scale;
    return lambda;
}

double wealth_from_volumes(const Vec& dollar_volume, double fraction) {
    return fraction * dollar_volume.sum();
}

Vec drift_adjustment(const Vec& asset_returns, double wealth_prev, double wealth_now) {
    if (!(wealth_prev > 0.0) || !(wealth_now > 0.0)) {
        throw ValidationError("drift_adjustment: wealth must be positive");
    }
    return (Vec::Ones(asset_returns.size()) + asset_returns) * (wealth_prev / wealth_now);
}

Vec markowitz_weights(const Vec& mu, const Mat& sigma, double gamma) {
    check_gamma(gamma, "markowitz_weights");
    check_sigma(sigma, mu.size(), "markowitz_weights");
    return linalg::spd_solve(Mat(gamma * sigma), mu, "markowitz_weights");
}

DiagMat impact_matrix(const Vec& dollar_volume) {
    for (Index i = 0; i < dollar_volume.size(); ++i) {
        if (!(dollar_volume(i) > 0.0)) {
            throw ValidationError("impact_matrix: dollar volume " + std::to_string(i) + " is not positive");
        }
    }
    // m = 1/2 Lambda (1% L) = 10 bps  =>  Lambda = 2 * 0.001 / (0.01 L) = 1 / (5 L)
    return DiagMat(Vec((5.0 * dollar_volume).cwiseInverse()));
}

Vec turnover(const Vec& w, const Vec& w_prev, const Vec& drift, double wealth) {
    linalg::require_same_size(w.size(), w_prev.size(), "turnover");
    linalg::require_same_size(w.size(), drift.size(), "turnover");
    return wealth * (w - drift.cwiseProduct(w_prev));
}

double transaction_cost_dollars(const Vec& delta, const DiagMat& impact) {
    linalg::require_same_size(delta.size(), impact.rows(), "transaction_cost_dollars");
    return 0.5 * delta.dot(impact * delta);
}

Vec optimal_weights_tc(const Vec& mu, const Mat& sigma, double gamma, const CostModel& cost,
                       const Vec& w_prev, double impact_scale) {
    check_gamma(gamma, "optimal_weights_tc");
    check_sigma(sigma, mu.size(), "optimal_weights_tc");
    cost.validate();
    linalg::require_same_size(cost.dollar_volume.size(), mu.size(), "optimal_weights_tc");
    linalg::require_same_size(w_prev.size(), mu.size(), "optimal_weights_tc");
    const Vec pi_lambda = cost.wealth * cost.impact(impact_scale).diagonal();
    Mat lhs = gamma * sigma;
    lhs.diagonal() += pi_lambda;
    const Vec rhs = mu + pi_lambda.cwiseProduct(cost.realized_return_adj.cwiseProduct(w_prev));
    return linalg::spd_solve(lhs, rhs, "optimal_weights_tc");
}

double tc_objective(const Vec& w, const Vec& mu, const Mat& sigma, double gamma, const CostModel& cost,
                    const Vec& w_prev, double impact_scale) {
    const Vec trade = w - cost.realized_return_adj.cwiseProduct(w_prev);
    const Vec lambda = cost.impact(impact_scale).diagonal();
    return mu.dot(w) - 0.5 * gamma * w.dot(sigma * w) - 0.5 * cost.wealth * trade.dot(lambda.cwiseProduct(trade));
}

}  // namespace blfuse
