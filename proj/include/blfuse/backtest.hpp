#pragma once

#include "blfuse/blapt.hpp"
#include "blfuse/market.hpp"
#include "blfuse/views.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace blfuse {

/// Where a view source gets its per-factor views.
struct ViewSourceConfig {
    enum class Kind {
        ar,     ///< rolling AR(p) on the estimated factor returns
        oracle  ///< realized factor returns of the period being traded, Omega at the floor
    };
    std::string name;
    Kind kind = Kind::ar;
    ArViewConfig ar;
};

struct BacktestConfig {
    std::vector<std::string> methods;   ///< fusion tags; "single:<name>" may name a source
    std::vector<ViewSourceConfig> sources;
    double gamma = 10.0;
    int prior_window = 20;
    int prior_oos_window = 20;
    int rebalance_every = 1;   ///< in data periods; weights drift untraded in between
    int periods_per_year = 6;  ///< data periods per calendar year
    int volume_window = 3;     ///< rolling mean of dollar volumes
    int mse_window = 20;       ///< rolling mean of regression MSEs for D = sigma^2 I
    double impact_scale = 1.0; ///< multiplies Lambda; 0 ignores costs
    double wealth_fraction = 0.1;
    CrossSectionEstimator estimator = CrossSectionEstimator::gls;
    CiOptions ci;
    IciOptions ici;
    CuOptions cu;
    std::uint64_t seed = 0;
    int threads = 0;  ///< methods run concurrently; 0 = hardware concurrency

    /// Three AR sources: AR(1)/20, AR(2)/30 and AR(3)/40 fit windows, 20-period OOS windows.
    static std::vector<ViewSourceConfig> default_sources();

    /// First period at which a decision can be made.
    int warmup() const;
    void validate() const;
};

/// Strict reader; `methods` and `seed` are required unless `seed_override` is set.
BacktestConfig backtest_config_from_json(const nlohmann::json& j,
                                         std::optional<std::uint64_t> seed_override = std::nullopt);

struct PeriodRecord {
    Index t;
    Vec weights;
    double gross;     ///< w' r_t
    double cost;      ///< transaction cost in dollars
    double wealth;    ///< Pi_t
    double net;       ///< gross - cost / wealth
    double turnover;  ///< l1 norm of w - R w_prev
};

struct MethodRun {
    std::string method;
    std::vector<PeriodRecord> periods;
    std::optional<std::string> failure;  ///< set when the run aborted
    Index failed_at = -1;
};

struct MetricRow {
    std::string method;
    int year;        ///< 1-based year index from the first decision period
    double cuml_ret; ///< annualized mean return, percent
    double ret_vol;  ///< annualized volatility, percent
    double sharpe;
    double ir;       ///< NaN for the benchmark row
    double sortino;  ///< NaN when the year has no negative return
    double max_dd;   ///< percent, <= 0
};

struct BacktestReport {
    int periods_per_year;
    std::vector<Index> periods;   ///< traded data periods
    std::vector<double> benchmark;
    std::vector<MethodRun> runs;
    std::vector<MetricRow> rows;  ///< benchmark first, then methods in config order
};

BacktestReport run(const MarketPath& market, const BacktestConfig& cfg);

/// Scales `strategy` by vol(benchmark) / vol(strategy).
std::vector<double> normalize_to_benchmark_vol(std::span<const double> strategy,
                                               std::span<const double> benchmark);

/// Per-year rows for complete years only. Each year's strategy returns are
/// first normalized to that year's benchmark volatility.
std::vector<MetricRow> metric_rows(const std::string& method, std::span<const double> returns,
                                   std::span<const double> benchmark, int periods_per_year);
std::vector<MetricRow> benchmark_rows(std::span<const double> benchmark, int periods_per_year);

std::string format_metrics_csv(const std::vector<MetricRow>& rows);
/// t, benchmark and one compounded net-equity column per method (nan after a failure).
std::string format_equity_csv(const BacktestReport& report);
/// Long format: method,t,gross,cost,wealth,net,turnover.
std::string format_periods_csv(const BacktestReport& report);

}  // namespace blfuse
