#pragma once

#include "blfuse/linalg.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace blfuse {

struct MarketConfig {
    int n_assets = 30;
    int n_factors = 3;
    int horizon = 600;
    Vec true_premia;          ///< mu_f, length n_factors
    Mat factor_cov;           ///< F, SPD
    double idio_scale = 0.14; ///< typical idiosyncratic vol per period; 0 gives r = X f exactly
    double volume_scale = 1e7;
    double exposure_persistence = 0.99;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Defaults for the fields a config may omit: premia 0.5% per period, F = (3%)^2 I.
MarketConfig default_market_config(int n_assets, int n_factors, int horizon, std::uint64_t seed);

nlohmann::json to_json(const MarketConfig& cfg);
/// Strict reader: unknown keys and missing n_assets / n_factors / horizon / seed
/// are ValidationErrors naming the key.
MarketConfig market_config_from_json(const nlohmann::json& j);

/// Simulated market. Per period t: r_t = X_t f_t + e_t, e_t ~ N(0, diag(idio_var)).
struct MarketPath {
    MarketConfig config;
    std::vector<Mat> exposures; ///< X_t, n x k, one per period
    Mat factor_returns;         ///< T x k
    Mat asset_returns;          ///< T x n
    Vec idio_var;               ///< diagonal of D (constant through time)
    Mat dollar_volume;          ///< T x n, > 0
    Vec benchmark;              ///< equal-weight asset return, length T

    Index horizon() const { return asset_returns.rows(); }
    Index n_assets() const { return asset_returns.cols(); }
    Index n_factors() const { return factor_returns.cols(); }
};

/// Deterministic given config.seed. Exposures start N(0,1) and follow a
/// stationary AR(1) per entry; factor returns are N(mu_f, F); dollar volumes are
/// a lognormal cross-section held fixed through time.
MarketPath generate(const MarketConfig& config);

enum class CrossSectionEstimator { gls, ols };

struct CrossSectionFit {
    Vec factors;   ///< f-hat
    Vec residuals; ///< r - X f-hat
    double mse;    ///< sum of squared residuals / (n - k)
};

/// f-hat = (X'D^{-1}X)^{-1} X'D^{-1} r (GLS) or the OLS estimate. `idio_var` is
/// the diagonal of D and is ignored for OLS. Rank-deficient X is rejected.
CrossSectionFit estimate_factor_returns(const Mat& x, const Vec& idio_var, const Vec& r,
                                        CrossSectionEstimator estimator = CrossSectionEstimator::gls);

/// Directory layout: exposures_t.csv (t,asset,x_0..), factors.csv, returns.csv
/// (with a benchmark column), volumes.csv and manifest.json.
void write_market(const std::filesystem::path& dir, const MarketPath& path);
MarketPath load_market(const std::filesystem::path& dir);

}  // namespace blfuse
