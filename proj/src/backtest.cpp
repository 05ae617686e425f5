#include "blfuse/backtest.hpp"

#include "blfuse/config.hpp"
#include "blfuse/csv.hpp"
#include "blfuse/metrics.hpp"
#include "blfuse/portfolio.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace blfuse {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TightnessObjective objective_from(const std::string& s, const char* key) {
    if (s == "trace") return TightnessObjective::trace;
    if (s == "determinant") return TightnessObjective::determinant;
    throw ValidationError(std::string("backtest config: key '") + key + "' must be trace or determinant");
}

void read_fusion_options(const nlohmann::json& j, BacktestConfig& cfg) {
    ConfigReader rd(j, "backtest config 'fusion'");
    if (rd.has("ci_objective")) cfg.ci.objective = objective_from(rd.text("ci_objective"), "ci_objective");
    cfg.ci.interval_tol = rd.number_or("ci_interval_tol", cfg.ci.interval_tol);
    cfg.ci.iterations_per_source = static_cast<int>(rd.integer_or("ci_iterations_per_source", cfg.ci.iterations_per_source));
    if (rd.has("ici_objective")) cfg.ici.objective = objective_from(rd.text("ici_objective"), "ici_objective");
    cfg.ici.interval_tol = rd.number_or("ici_interval_tol", cfg.ici.interval_tol);
    cfg.cu.rho_initial = rd.number_or("cu_rho_initial", cfg.cu.rho_initial);
    cfg.cu.rho_max = rd.number_or("cu_rho_max", cfg.cu.rho_max);
    cfg.cu.rho_growth = rd.number_or("cu_rho_growth", cfg.cu.rho_growth);
    cfg.cu.iterations_per_stage = static_cast<int>(rd.integer_or("cu_iterations_per_stage", cfg.cu.iterations_per_stage));
    cfg.cu.polish_restarts = static_cast<int>(rd.integer_or("cu_polish_restarts", cfg.cu.polish_restarts));
    rd.finish();
}

ViewSourceConfig read_source(const nlohmann::json& j, std::size_t index) {
    ConfigReader rd(j, "backtest config sources[" + std::to_string(index) + "]");
    ViewSourceConfig src;
    src.name = rd.text("name");
    const std::string kind = rd.text_or("kind", "ar");
    if (kind == "ar") {
        src.kind = ViewSourceConfig::Kind::ar;
        src.ar.order = static_cast<int>(rd.integer_or("order", src.ar.order));
        src.ar.fit_window = static_cast<int>(rd.integer_or("fit_window", src.ar.fit_window));
        src.ar.oos_window = static_cast<int>(rd.integer_or("oos_window", src.ar.oos_window));
    } else if (kind == "oracle") {
        src.kind = ViewSourceConfig::Kind::oracle;
    } else {
        throw ValidationError("backtest config sources[" + std::to_string(index) + "]: key 'kind' must be ar or oracle");
    }
    rd.finish();
    return src;
}

// Resolves "single:<source name>" to the index form FusionSpec understands.
FusionSpec resolve_method(const std::string& tag, const BacktestConfig& cfg) {
    std::string canonical = tag;
    if (tag.rfind("single:", 0) == 0) {
        const std::string rest = tag.substr(7);
        if (!rest.empty() && rest.find_first_not_of("0123456789") != std::string::npos) {
            const auto it = std::find_if(cfg.sources.begin(), cfg.sources.end(),
                                         [&](const ViewSourceConfig& s) { return s.name == rest; });
            if (it == cfg.sources.end()) throw ValidationError("method '" + tag + "': no source named '" + rest + "'");
            canonical = "single:" + std::to_string(it - cfg.sources.begin());
        }
    }
    FusionSpec spec = FusionSpec::parse(canonical);
    if (spec.method == FusionMethod::single && spec.single_index >= cfg.sources.size()) {
        throw ValidationError("method '" + tag + "': source index out of range");
    }
    spec.ci = cfg.ci;
    spec.ici = cfg.ici;
    spec.cu = cfg.cu;
    return spec;
}

// Everything a decision at period t needs that does not depend on the method.
struct StepInputs {
    Index t;
    Prior prior;
    std::vector<SourceViews> sources;
    FactorModel model;
    CostModel cost;
};

Vec rolling_volume(const MarketPath& m, Index t, int window) {
    return m.dollar_volume.middleRows(t - window, window).colwise().mean().transpose();
}

std::vector<StepInputs> prepare_steps(const MarketPath& m, const BacktestConfig& cfg, Index first) {
    const Index horizon = m.horizon();
    const Index k = m.n_factors();
    const Index n = m.n_assets();

    // Cross-sectional estimates use only period-s data, so compute them once.
    Mat f_hat(horizon, k);
    Vec mse(horizon);
    for (Index s = 0; s < horizon; ++s) {
        const auto fit = estimate_factor_returns(m.exposures[static_cast<std::size_t>(s)], m.idio_var,
                                                 m.asset_returns.row(s).transpose(), cfg.estimator);
        f_hat.row(s) = fit.factors.transpose();
        mse(s) = fit.mse;
    }

    std::vector<StepInputs> steps;
    for (Index t = first; t < horizon; ++t) {
        const Mat history = f_hat.topRows(t);
        StepInputs step{t, prior_from_history(history, cfg.prior_window, cfg.prior_oos_window), {}, {}, {}};

        Vec fallback_aleatoric(k);
        for (Index j = 0; j < k; ++j) {
            const auto last = history.col(j).tail(cfg.prior_window);
            const double mean = last.mean();
            fallback_aleatoric(j) = std::max((last.array() - mean).square().sum() / (cfg.prior_window - 1), kVarianceFloor);
        }
        for (const auto& src : cfg.sources) {
            SourceViews sv{src.name, ViewSet{Vec(k), Vec(k)}, Mat::Zero(k, k)};
            for (Index j = 0; j < k; ++j) {
                if (src.kind == ViewSourceConfig::Kind::ar) {
                    const Vec col = history.col(j);
                    const auto view = ar_view(std::span<const double>(col.data(), static_cast<std::size_t>(t)), src.ar);
                    sv.views.q(j) = view.triple.mean;
                    sv.views.omega(j) = view.triple.epistemic;
                    sv.factor_cov(j, j) = view.triple.aleatoric;
                } else {
                    sv.views.q(j) = m.factor_returns(t, j);
                    sv.views.omega(j) = kVarianceFloor;
                    sv.factor_cov(j, j) = fallback_aleatoric(j);
                }
            }
            step.sources.push_back(std::move(sv));
        }

        const double sigma2 = mse.segment(t - cfg.mse_window, cfg.mse_window).mean();
        step.model = FactorModel{m.exposures[static_cast<std::size_t>(t)], Vec::Constant(n, sigma2), Mat()};

        step.cost.dollar_volume = rolling_volume(m, t, cfg.volume_window);
        step.cost.wealth = wealth_from_volumes(step.cost.dollar_volume, cfg.wealth_fraction);
        const double wealth_prev = wealth_from_volumes(rolling_volume(m, t - 1, cfg.volume_window), cfg.wealth_fraction);
        step.cost.realized_return_adj =
            drift_adjustment(m.asset_returns.row(t - 1).transpose(), wealth_prev, step.cost.wealth);
        steps.push_back(std::move(step));
    }
    return steps;
}

MethodRun run_method(const std::string& tag, const FusionSpec& spec, const MarketPath& m,
                     const std::vector<StepInputs>& steps, const BacktestConfig& cfg) {
    MethodRun out;
    out.method = tag;
    Vec w_prev = Vec::Zero(m.n_assets());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const StepInputs& step = steps[i];
        const Vec drifted = step.cost.realized_return_adj.cwiseProduct(w_prev);
        Vec w;
        try {
            if (i % static_cast<std::size_t>(cfg.rebalance_every) == 0) {
                const auto fused = fuse_factor_views(step.prior, step.sources, step.model, spec);
                const auto predictive = predictive_returns(step.model, fused.estimate);
                w = optimal_weights_tc(predictive.mean(), predictive.cov(), cfg.gamma, step.cost, w_prev,
                                       cfg.impact_scale);
            } else {
                w = drifted;
            }
        } catch (const std::exception& e) {
            out.failure = e.what();
            out.failed_at = step.t;
            return out;
        }
        const Vec delta = turnover(w, w_prev, step.cost.realized_return_adj, step.cost.wealth);
        const double cost = transaction_cost_dollars(delta, step.cost.impact(cfg.impact_scale));
        const double gross = w.dot(m.asset_returns.row(step.t).transpose());
        out.periods.push_back({step.t, w, gross, cost, step.cost.wealth, gross - cost / step.cost.wealth,
                               (w - drifted).lpNorm<1>()});
        w_prev = std::move(w);
    }
    return out;
}

double or_nan(auto&& f) {
    try {
        return f();
    } catch (const ValidationError&) {
        return kNaN;
    }
}

}  // namespace

std::vector<ViewSourceConfig> BacktestConfig::default_sources() {
    std::vector<ViewSourceConfig> out;
    const int fit[] = {20, 30, 40};
    for (int p = 1; p <= 3; ++p) {
        ViewSourceConfig s;
        s.name = "ar" + std::to_string(p);
        s.ar = ArViewConfig{p, fit[p - 1], 20};
        out.push_back(s);
    }
    return out;
}

int BacktestConfig::warmup() const {
    int w = std::max({prior_window + prior_oos_window, mse_window, volume_window + 1, 1});
    for (const auto& s : sources) {
        if (s.kind == ViewSourceConfig::Kind::ar) w = std::max(w, s.ar.warmup());
    }
    return w;
}

void BacktestConfig::validate() const {
    if (methods.empty()) throw ValidationError("backtest config: key 'methods' must list at least one method");
    if (sources.empty()) throw ValidationError("backtest config: key 'sources' must list at least one source");
    if (!(gamma > 0.0)) throw ValidationError("backtest config: key 'gamma' must be positive");
    if (prior_window < 2) throw ValidationError("backtest config: key 'prior_window' must be at least 2");
    if (prior_oos_window < 1) throw ValidationError("backtest config: key 'prior_oos_window' must be at least 1");
    if (rebalance_every < 1) throw ValidationError("backtest config: key 'rebalance_every' must be at least 1");
    if (periods_per_year < 2) throw ValidationError("backtest config: key 'periods_per_year' must be at least 2");
    if (volume_window < 1) throw ValidationError("backtest config: key 'volume_window' must be at least 1");
    if (mse_window < 1) throw ValidationError("backtest config: key 'mse_window' must be at least 1");
    if (!(impact_scale >= 0.0)) throw ValidationError("backtest config: key 'impact_scale' must be >= 0");
    if (!(wealth_fraction > 0.0)) throw ValidationError("backtest config: key 'wealth_fraction' must be positive");
    for (const auto& s : sources) {
        if (s.name.empty()) throw ValidationError("backtest config: source names must be non-empty");
        if (s.kind == ViewSourceConfig::Kind::ar && (s.ar.order < 1 || s.ar.fit_window < s.ar.order + 10 ||
                                                     s.ar.oos_window < 1)) {
            throw ValidationError("backtest config: source '" + s.name +
                                  "' needs order >= 1, fit_window >= order + 10 and oos_window >= 1");
        }
    }
    for (const auto& m : methods) resolve_method(m, *this);
}

BacktestConfig backtest_config_from_json(const nlohmann::json& j, std::optional<std::uint64_t> seed_override) {
    ConfigReader rd(j, "backtest config");
    BacktestConfig cfg;
    cfg.methods = rd.strings("methods");
    if (seed_override) {
        cfg.seed = *seed_override;
        if (rd.has("seed")) rd.seed("seed");
    } else {
        cfg.seed = rd.seed("seed");
    }
    cfg.gamma = rd.number_or("gamma", cfg.gamma);
    cfg.prior_window = static_cast<int>(rd.integer_or("prior_window", cfg.prior_window));
    cfg.prior_oos_window = static_cast<int>(rd.integer_or("prior_oos_window", cfg.prior_oos_window));
    cfg.rebalance_every = static_cast<int>(rd.integer_or("rebalance_every", cfg.rebalance_every));
    cfg.periods_per_year = static_cast<int>(rd.integer_or("periods_per_year", cfg.periods_per_year));
    cfg.volume_window = static_cast<int>(rd.integer_or("volume_window", cfg.volume_window));
    cfg.mse_window = static_cast<int>(rd.integer_or("mse_window", cfg.mse_window));
    cfg.impact_scale = rd.number_or("impact_scale", cfg.impact_scale);
    cfg.wealth_fraction = rd.number_or("wealth_fraction", cfg.wealth_fraction);
    const std::string est = rd.text_or("estimator", "gls");
    if (est == "gls") {
        cfg.estimator = CrossSectionEstimator::gls;
    } else if (est == "ols") {
        cfg.estimator = CrossSectionEstimator::ols;
    } else {
        throw ValidationError("backtest config: key 'estimator' must be gls or ols");
    }
    if (rd.has("sources")) {
        const auto& arr = rd.raw("sources");
        if (!arr.is_array()) throw ValidationError("backtest config: key 'sources' must be an array");
        for (std::size_t i = 0; i < arr.size(); ++i) cfg.sources.push_back(read_source(arr[i], i));
    } else {
        cfg.sources = BacktestConfig::default_sources();
    }
    if (rd.has("fusion")) read_fusion_options(rd.raw("fusion"), cfg);
    rd.finish();
    cfg.validate();
    return cfg;
}

std::vector<double> normalize_to_benchmark_vol(std::span<const double> strategy,
                                               std::span<const double> benchmark) {
    if (strategy.size() != benchmark.size() || strategy.size() < 2) {
        throw ValidationError("normalize_to_benchmark_vol: need equal-length series of at least 2 returns");
    }
    const double vs = annualized_vol(strategy, 1);
    if (!(vs > 0.0)) throw ValidationError("normalize_to_benchmark_vol: strategy has zero volatility");
    const double scale = annualized_vol(benchmark, 1) / vs;
    std::vector<double> out(strategy.begin(), strategy.end());
    for (double& r : out) r *= scale;
    return out;
}

std::vector<MetricRow> metric_rows(const std::string& method, std::span<const double> returns,
                                   std::span<const double> benchmark, int periods_per_year) {
    if (returns.size() > benchmark.size()) throw ValidationError("metric_rows: more returns than benchmark periods");
    std::vector<MetricRow> rows;
    const auto ppy = static_cast<std::size_t>(periods_per_year);
    for (std::size_t start = 0, year = 1; start + ppy <= returns.size(); start += ppy, ++year) {
        const auto r = returns.subspan(start, ppy);
        const auto b = benchmark.subspan(start, ppy);
        MetricRow row{method, static_cast<int>(year), kNaN, kNaN, kNaN, kNaN, kNaN, kNaN};
        std::vector<double> s;
        try {
            s = normalize_to_benchmark_vol(r, b);
        } catch (const ValidationError&) {
            rows.push_back(row);
            continue;
        }
        row.cuml_ret = 100.0 * annualized_mean(s, periods_per_year);
        row.ret_vol = 100.0 * annualized_vol(s, periods_per_year);
        row.sharpe = or_nan([&] { return sharpe(s, periods_per_year); });
        row.ir = or_nan([&] { return information_ratio(s, b, periods_per_year); });
        row.sortino = or_nan([&] { return sortino(s, periods_per_year); });
        row.max_dd = 100.0 * max_drawdown(s);
        rows.push_back(row);
    }
    return rows;
}

std::vector<MetricRow> benchmark_rows(std::span<const double> benchmark, int periods_per_year) {
    auto rows = metric_rows("benchmark", benchmark, benchmark, periods_per_year);
    for (auto& r : rows) r.ir = kNaN;
    return rows;
}

BacktestReport run(const MarketPath& market, const BacktestConfig& cfg) {
    cfg.validate();
    const Index first = cfg.warmup();
    if (market.horizon() <= first) {
        throw ValidationError("backtest: market horizon " + std::to_string(market.horizon()) +
                              " does not exceed the warmup of " + std::to_string(first) + " periods");
    }
    std::vector<FusionSpec> specs;
    for (const auto& m : cfg.methods) specs.push_back(resolve_method(m, cfg));

    const auto steps = prepare_steps(market, cfg, first);

    BacktestReport report;
    report.periods_per_year = cfg.periods_per_year;
    for (const auto& s : steps) {
        report.periods.push_back(s.t);
        report.benchmark.push_back(market.benchmark(s.t));
    }

    report.runs.resize(cfg.methods.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto n_threads = std::min<std::size_t>(cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : hw,
                                                 cfg.methods.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.methods.size(); i = next++) {
            report.runs[i] = run_method(cfg.methods[i], specs[i], market, steps, cfg);
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }

    report.rows = benchmark_rows(report.benchmark, cfg.periods_per_year);
    for (const auto& r : report.runs) {
        std::vector<double> net;
        for (const auto& p : r.periods) net.push_back(p.net);
        auto rows = metric_rows(r.method, net, report.benchmark, cfg.periods_per_year);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    return report;
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
    std::ostringstream out;
    out << "method,year,cuml_ret,ret_vol,sharpe,ir,sortino,max_dd\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.year << ',' << csv::format_double(r.cuml_ret) << ','
            << csv::format_double(r.ret_vol) << ',' << csv::format_double(r.sharpe) << ','
            << csv::format_double(r.ir) << ',' << csv::format_double(r.sortino) << ','
            << csv::format_double(r.max_dd) << '\n';
    }
    return out.str();
}

std::string format_equity_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "t,benchmark";
    for (const auto& r : report.runs) out << ',' << r.method;
    out << '\n';
    double bench = 1.0;
    std::vector<double> equity(report.runs.size(), 1.0);
    for (std::size_t i = 0; i < report.periods.size(); ++i) {
        bench *= 1.0 + report.benchmark[i];
        out << report.periods[i] << ',' << csv::format_double(bench);
        for (std::size_t m = 0; m < report.runs.size(); ++m) {
            const auto& periods = report.runs[m].periods;
            if (i < periods.size()) {
                equity[m] *= 1.0 + periods[i].net;
                out << ',' << csv::format_double(equity[m]);
            } else {
                out << ",nan";
            }
        }
        out << '\n';
    }
    return out.str();
}

std::string format_periods_csv(const BacktestReport& report) {
    std::ostringstream out;
    out << "method,t,gross,cost,wealth,net,turnover\n";
    for (const auto& r : report.runs) {
        for (const auto& p : r.periods) {
            out << r.method << ',' << p.t << ',' << csv::format_double(p.gross) << ',' << csv::format_double(p.cost)
                << ',' << csv::format_double(p.wealth) << ',' << csv::format_double(p.net) << ','
                << csv::format_double(p.turnover) << '\n';
        }
    }
    return out.str();
}

}  // namespace blfuse
