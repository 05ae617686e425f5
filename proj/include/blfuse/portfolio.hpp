#pragma once

#include "blfuse/linalg.hpp"

namespace blfuse {

using DiagMat = Eigen::DiagonalMatrix<double, Eigen::Dynamic>;

/// Quadratic transaction-cost inputs for one rebalance.
struct CostModel {
    Vec dollar_volume;        ///< L, rolling average daily dollar volume, > 0
    double wealth = 0.0;      ///< Pi, investable wealth, > 0
    Vec realized_return_adj;  ///< diagonal of R: drift of last period's holdings

    /// Lambda for this model's volumes; scaled by `impact_scale` (0 disables costs).
    DiagMat impact(double impact_scale = 1.0) const;

    void validate() const;
};

/// Pi = fraction * sum(L); the default fraction is one tenth.
double wealth_from_volumes(const Vec& dollar_volume, double fraction = 0.1);

/// R diagonal: (1 + r_i) scaled by the wealth ratio Pi_{t-1} / Pi_t so that
/// drifted holdings are expressed as fractions of the new wealth.
Vec drift_adjustment(const Vec& asset_returns, double wealth_prev, double wealth_now);

/// Solves (gamma Sigma) w = mu.
Vec markowitz_weights(const Vec& mu, const Mat& sigma, double gamma);

/// Lambda = diag(1 / (5 L_i)): trading 1% of daily dollar volume costs 10 bps of impact.
DiagMat impact_matrix(const Vec& dollar_volume);

/// Delta = Pi (w - R w_prev), the dollar trade vector.
Vec turnover(const Vec& w, const Vec& w_prev, const Vec& drift, double wealth);

/// TC^d = 1/2 Delta' Lambda Delta, in dollars.
double transaction_cost_dollars(const Vec& delta, const DiagMat& impact);

/// Cost-aware weights w = (gamma Sigma + Pi Lambda)^{-1} (mu + Pi Lambda R w_prev).
Vec optimal_weights_tc(const Vec& mu, const Mat& sigma, double gamma, const CostModel& cost,
                       const Vec& w_prev, double impact_scale = 1.0);

/// mu'w - gamma/2 w'Sigma w - Pi/2 (w - R w_prev)' Lambda (w - R w_prev).
double tc_objective(const Vec& w, const Vec& mu, const Mat& sigma, double gamma, const CostModel& cost,
                    const Vec& w_prev, double impact_scale = 1.0);

}  // namespace blfuse
