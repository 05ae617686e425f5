#include "cli.hpp"

#include "blfuse/backtest.hpp"
#include "blfuse/config.hpp"
#include "blfuse/csv.hpp"
#include "blfuse/fusion.hpp"
#include "blfuse/gaussian.hpp"
#include "blfuse/market.hpp"
#include "blfuse/metrics.hpp"
#include "blfuse/portfolio.hpp"
#include "blfuse/rng.hpp"
#include "blfuse/views.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace blfuse::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kBootstrapStream = 3;

json read_json(const fs::path& path) {
    try {
        return json::parse(csv::read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) { csv::write_atomic(path, j.dump(2) + "\n"); }

TightnessObjective parse_objective(const std::string& s) {
    if (s == "trace") return TightnessObjective::trace;
    if (s == "determinant") return TightnessObjective::determinant;
    throw ValidationError("objective must be trace or determinant, got '" + s + "'");
}

int threads_from_env() {
    const char* v = std::getenv("BLFUSE_THREADS");
    if (!v || !*v) return 0;
    const auto n = csv::parse_int(v, "BLFUSE_THREADS");
    if (n < 1) throw ValidationError("BLFUSE_THREADS must be a positive integer");
    return static_cast<int>(n);
}

// ---- fuse ------------------------------------------------------------------

struct FuseArgs {
    std::string method;
    std::string in;
    std::string out;
    std::string ellipse;
    std::string config;
    int ellipse_points = 100;
    double mahalanobis_threshold = -1.0;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out, std::ostream& err) {
    const json input = read_json(a.in);
    if (!input.is_array() || input.empty()) {
        throw ValidationError(a.in + ": expected a non-empty array of estimates");
    }
    std::vector<GaussianEstimate> sources;
    for (std::size_t i = 0; i < input.size(); ++i) {
        try {
            sources.push_back(gaussian_from_json(input[i]));
        } catch (const ValidationError& e) {
            throw ValidationError(a.in + " estimate " + std::to_string(i) + ": " + e.what());
        }
        if (sources.back().dim() != sources.front().dim()) {
            throw ValidationError(a.in + " estimate " + std::to_string(i) + ": dimension differs from estimate 0");
        }
    }

    CiOptions ci;
    IciOptions ici;
    CuOptions cu;
    if (!a.config.empty()) {
        const json cfg = read_json(a.config);
        ConfigReader rd(cfg, a.config);
        if (rd.has("objective")) ci.objective = ici.objective = parse_objective(rd.text("objective"));
        ci.interval_tol = ici.interval_tol = rd.number_or("interval_tol", ci.interval_tol);
        ci.iterations_per_source = static_cast<int>(rd.integer_or("ci_iterations_per_source", ci.iterations_per_source));
        cu.rho_initial = rd.number_or("cu_rho_initial", cu.rho_initial);
        cu.rho_max = rd.number_or("cu_rho_max", cu.rho_max);
        cu.rho_growth = rd.number_or("cu_rho_growth", cu.rho_growth);
        cu.iterations_per_stage = static_cast<int>(rd.integer_or("cu_iterations_per_stage", cu.iterations_per_stage));
        cu.polish_restarts = static_cast<int>(rd.integer_or("cu_polish_restarts", cu.polish_restarts));
        rd.finish();
    }

    const FusionSpec spec = FusionSpec::parse(a.method);
    json result;
    GaussianEstimate fused = sources.front();
    switch (spec.method) {
        case FusionMethod::single:
            if (spec.single_index >= sources.size()) throw ValidationError("single: source index out of range");
            fused = sources[spec.single_index];
            break;
        case FusionMethod::pw:
            fused = fuse_pw(sources);
            break;
        case FusionMethod::ci: {
            auto r = fuse_ci(sources, ci);
            fused = r.estimate;
            result["weights"] = r.weights.omegas();
            break;
        }
        case FusionMethod::ici: {
            auto r = fuse_ici(sources, ici);
            fused = r.estimate;
            result["ici_order"] = r.order;
            json steps = json::array();
            for (const auto& w : r.step_weights) steps.push_back(w.omegas());
            result["ici_step_weights"] = steps;
            if (r.step_weights.size() == 1) result["weights"] = r.step_weights.front().omegas();
            break;
        }
        case FusionMethod::cu: {
            auto r = fuse_cu(sources, cu);
            fused = r.estimate;
            result["cu_objective"] = r.objective;
            result["cu_constraint_slack"] = r.constraint_slack;
            result["cu_converged"] = r.converged;
            if (!r.converged) err << "warning: covariance union optimizer stopped before meeting its tolerance\n";
            break;
        }
    }

    result["method"] = a.method;
    result["mean"] = to_json(fused)["mean"];
    result["cov"] = to_json(fused)["cov"];
    result["n_sources"] = sources.size();
    if (sources.size() > 1) {
        try {
            double worst = 0.0;
            for (const auto& p : pairwise_mahalanobis(sources)) worst = std::max(worst, p.distance);
            result["max_mahalanobis"] = worst;
            if (a.mahalanobis_threshold >= 0.0 && worst > a.mahalanobis_threshold) {
                result["mahalanobis_warning"] = true;
                err << "warning: sources disagree (max pairwise Mahalanobis distance " << worst << " > "
                    << a.mahalanobis_threshold << ")\n";
            }
        } catch (const NumericalError& e) {
            result["max_mahalanobis"] = nullptr;
            err << "warning: " << e.what() << '\n';
        }
    }
    write_json(a.out, result);

    if (!a.ellipse.empty()) {
        std::ostringstream csvout;
        csvout << "source_id,x,y\n";
        auto emit = [&](const std::string& id, const GaussianEstimate& e) {
            for (const auto& p : concentration_ellipse(e, a.ellipse_points)) {
                csvout << id << ',' << csv::format_double(p[0]) << ',' << csv::format_double(p[1]) << '\n';
            }
        };
        for (std::size_t i = 0; i < sources.size(); ++i) emit(std::to_string(i), sources[i]);
        emit("fused", fused);
        csv::write_atomic(a.ellipse, csvout.str());
    }
    out << "fused " << sources.size() << " estimates with " << a.method << " -> " << a.out << '\n';
    return kExitOk;
}

// ---- simulate --------------------------------------------------------------

int cmd_simulate(const std::string& config, const std::string& out_dir, std::optional<std::uint64_t> seed,
                 std::ostream& out) {
    json j = read_json(config);
    if (seed && j.is_object()) j["seed"] = *seed;
    const MarketConfig cfg = market_config_from_json(j);
    const MarketPath path = generate(cfg);
    write_market(out_dir, path);
    out << "simulated " << cfg.horizon << " periods, " << cfg.n_assets << " assets, " << cfg.n_factors
        << " factors -> " << out_dir << '\n';
    return kExitOk;
}

// ---- significance helpers --------------------------------------------------

struct MetricTable {
    std::vector<std::string> methods;  // first-seen order
    std::map<std::string, std::map<int, double>> values;
};

MetricTable metric_table_from_csv(const csv::Table& t, const std::string& metric, const std::string& origin) {
    const auto mcol = t.column("method");
    const auto ycol = t.column("year");
    const auto vcol = t.column(metric);
    MetricTable out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = origin + " row " + std::to_string(r + 1);
        const std::string& method = row[mcol];
        if (!out.values.count(method)) out.methods.push_back(method);
        const auto year = static_cast<int>(csv::parse_int(row[ycol], where + ", field year"));
        out.values[method][year] = csv::parse_double(row[vcol], where + ", field " + metric);
    }
    return out;
}

std::string significance_csv(const MetricTable& mt, bool include_benchmark, const SignificanceOptions& opts,
                             std::ostream& err) {
    std::vector<std::string> methods;
    for (const auto& m : mt.methods) {
        if (include_benchmark || m != "benchmark") methods.push_back(m);
    }
    SignificanceTable table;
    if (methods.size() >= 2) {
        table = significance_table(methods, mt.values, opts);
    } else {
        table.notes.push_back("fewer than two methods; no comparisons");
    }
    for (const auto& n : table.notes) err << "note: " << n << '\n';
    return format_significance_csv(table);
}

// ---- backtest --------------------------------------------------------------

int cmd_backtest(const std::string& market_dir, const std::string& config, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, std::ostream& out, std::ostream& err) {
    json j = read_json(config);
    SignificanceOptions sig;
    std::string metric = "sharpe";
    if (j.is_object() && j.contains("significance")) {
        ConfigReader rd(j["significance"], "backtest config 'significance'");
        sig.level = rd.number_or("level", sig.level);
        sig.n_boot = static_cast<int>(rd.integer_or("n_boot", sig.n_boot));
        metric = rd.text_or("metric", metric);
        rd.finish();
        j.erase("significance");
    }
    BacktestConfig cfg = backtest_config_from_json(j, seed);
    cfg.threads = threads_from_env();
    sig.seed = split_seed(cfg.seed, kBootstrapStream);

    const MarketPath market = load_market(market_dir);
    const BacktestReport report = run(market, cfg);

    const fs::path dir(out_dir);
    const std::string metrics_csv = format_metrics_csv(report.rows);
    csv::write_atomic(dir / "metrics_by_year.csv", metrics_csv);
    csv::write_atomic(dir / "equity_curves.csv", format_equity_csv(report));
    csv::write_atomic(dir / "periods.csv", format_periods_csv(report));

    std::istringstream metrics_in(metrics_csv);
    const auto mt = metric_table_from_csv(csv::parse(metrics_in, "metrics_by_year.csv"), metric, "metrics_by_year.csv");
    csv::write_atomic(dir / "significance.csv", significance_csv(mt, false, sig, err));

    std::ostringstream failures;
    failures << "method,t,error\n";
    bool any_failure = false;
    for (const auto& r : report.runs) {
        if (!r.failure) continue;
        any_failure = true;
        std::string msg = *r.failure;
        for (char& c : msg) {
            if (c == ',' || c == '\n') c = ';';
        }
        failures << r.method << ',' << r.failed_at << ',' << msg << '\n';
        err << "method " << r.method << " failed at period " << r.failed_at << ": " << *r.failure << '\n';
    }
    if (any_failure) csv::write_atomic(dir / "failures.csv", failures.str());

    out << "backtest: " << report.periods.size() << " periods, " << report.runs.size() << " methods -> " << out_dir
        << '\n';
    return kExitOk;
}

// ---- allocate --------------------------------------------------------------

int cmd_allocate(const std::string& model_path, const std::string& views_path, const std::string& date,
                 const std::string& method, double gamma, const std::string& out_path, std::ostream& out) {
    const json j = read_json(model_path);
    ConfigReader rd(j, model_path);
    FactorModel fm;
    const auto factors = rd.strings("factors");
    fm.exposures = rd.matrix("exposures");
    fm.idio_var = rd.vector("idio_var");
    if (rd.has("factor_cov")) fm.factor_cov = rd.matrix("factor_cov");
    std::vector<std::string> assets;
    if (rd.has("assets")) assets = rd.strings("assets");
    ConfigReader prd(rd.raw("prior"), model_path + " prior");
    Prior prior{prd.vector("xi"), prd.matrix("V")};
    prd.finish();
    rd.finish();
    fm.validate();
    if (static_cast<Index>(factors.size()) != fm.n_factors()) {
        throw ValidationError(model_path + ": 'factors' must name each exposure column");
    }
    if (assets.empty()) {
        for (Index i = 0; i < fm.n_assets(); ++i) assets.push_back(std::to_string(i));
    } else if (static_cast<Index>(assets.size()) != fm.n_assets()) {
        throw ValidationError(model_path + ": 'assets' must name each exposure row");
    }

    const auto sources = views_for_date(load_views(views_path), date, factors);
    if (sources.empty()) throw ValidationError(views_path + ": no views dated " + date);
    const auto result = bl_pipeline(prior, sources, fm, FusionSpec::parse(method), gamma);
    const auto predictive = predictive_returns(fm, result.factors.estimate);

    std::ostringstream csvout;
    csvout << "asset,weight,expected_return\n";
    for (Index i = 0; i < fm.n_assets(); ++i) {
        csvout << assets[static_cast<std::size_t>(i)] << ',' << csv::format_double(result.weights(i)) << ','
               << csv::format_double(predictive.mean()(i)) << '\n';
    }
    csv::write_atomic(out_path, csvout.str());
    out << "allocated " << fm.n_assets() << " assets from " << sources.size() << " view sources -> " << out_path
        << '\n';
    return kExitOk;
}

// ---- weights ---------------------------------------------------------------

int cmd_weights(const std::string& assets_path, const std::string& sigma_path, const std::string& config,
                const std::string& out_path, std::ostream& out) {
    const auto assets = csv::read(assets_path);
    const auto n = static_cast<Index>(assets.rows.size());
    if (n == 0) throw ValidationError(assets_path + ": no assets");
    const auto c_asset = assets.column("asset");
    const auto c_mu = assets.column("mu");
    const auto c_prev = assets.column("w_prev");
    const auto c_vol = assets.column("dollar_volume");
    std::optional<std::size_t> c_drift;
    for (std::size_t i = 0; i < assets.header.size(); ++i) {
        if (assets.header[i] == "drift") c_drift = i;
    }
    Vec mu(n), w_prev(n), volume(n), drift = Vec::Ones(n);
    std::vector<std::string> names;
    for (Index i = 0; i < n; ++i) {
        const auto& row = assets.rows[static_cast<std::size_t>(i)];
        const std::string where = assets_path + " row " + std::to_string(i + 1);
        names.push_back(row[c_asset]);
        mu(i) = csv::parse_double(row[c_mu], where + ", field mu");
        w_prev(i) = csv::parse_double(row[c_prev], where + ", field w_prev");
        volume(i) = csv::parse_double(row[c_vol], where + ", field dollar_volume");
        if (c_drift) drift(i) = csv::parse_double(row[*c_drift], where + ", field drift");
    }

    const auto sig = csv::read(sigma_path);
    if (static_cast<Index>(sig.rows.size()) != n || static_cast<Index>(sig.header.size()) != n) {
        throw ValidationError(sigma_path + ": expected a " + std::to_string(n) + " x " + std::to_string(n) + " matrix");
    }
    Mat sigma(n, n);
    for (Index i = 0; i < n; ++i) {
        if (sig.header[static_cast<std::size_t>(i)] != names[static_cast<std::size_t>(i)]) {
            throw ValidationError(sigma_path + ": header must list the assets in the order of " + assets_path);
        }
        for (Index k = 0; k < n; ++k) {
            sigma(i, k) = csv::parse_double(sig.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)],
                                            sigma_path + " row " + std::to_string(i + 1));
        }
    }

    double gamma = 10.0;
    double impact_scale = 1.0;
    std::optional<double> wealth;
    if (!config.empty()) {
        const json j = read_json(config);
        ConfigReader rd(j, config);
        gamma = rd.number_or("gamma", gamma);
        impact_scale = rd.number_or("impact_scale", impact_scale);
        if (rd.has("wealth")) wealth = rd.number("wealth");
        rd.finish();
    }
    CostModel cost{volume, wealth ? *wealth : wealth_from_volumes(volume), drift};
    const Vec w = optimal_weights_tc(mu, sigma, gamma, cost, w_prev, impact_scale);
    const Vec trade = turnover(w, w_prev, drift, cost.wealth);

    std::ostringstream csvout;
    csvout << "asset,weight,trade_dollars\n";
    for (Index i = 0; i < n; ++i) {
        csvout << names[static_cast<std::size_t>(i)] << ',' << csv::format_double(w(i)) << ','
               << csv::format_double(trade(i)) << '\n';
    }
    csv::write_atomic(out_path, csvout.str());
    out << "weights for " << n << " assets -> " << out_path << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Black-Litterman allocation with fused views"};
    app.require_subcommand(1);

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "Fuse Gaussian estimates");
    fuse->add_option("--method", fa.method, "pw, ci, ici, cu or single:<i>")->required();
    fuse->add_option("--in", fa.in, "JSON array of {mean, cov} estimates")->required();
    fuse->add_option("--out", fa.out, "fused estimate JSON")->required();
    fuse->add_option("--ellipse", fa.ellipse, "write concentration ellipses (2-D only)");
    fuse->add_option("--ellipse-points", fa.ellipse_points, "points per ellipse")->check(CLI::Range(3, 100000));
    fuse->add_option("--mahalanobis-threshold", fa.mahalanobis_threshold, "warn above this pairwise distance");
    fuse->add_option("--config", fa.config, "JSON fusion options");

    std::string sim_config, sim_out;
    std::uint64_t sim_seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic factor market");
    simulate->add_option("--config", sim_config, "market config JSON")->required();
    simulate->add_option("--out", sim_out, "output directory")->required();
    auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "overrides the config seed");

    std::string bt_market, bt_config, bt_out;
    std::uint64_t bt_seed = 0;
    auto* backtest = app.add_subcommand("backtest", "Run the rebalance loop over a simulated market");
    backtest->add_option("--market", bt_market, "market directory")->required();
    backtest->add_option("--config", bt_config, "backtest config JSON")->required();
    backtest->add_option("--out", bt_out, "report directory")->required();
    auto* bt_seed_opt = backtest->add_option("--seed", bt_seed, "overrides the config seed");

    std::string rs_in, rs_out, rs_metric = "sharpe", rs_config;
    double rs_level = 0.10;
    int rs_boot = 2000;
    std::uint64_t rs_seed = 0;
    bool rs_benchmark = false;
    auto* report = app.add_subcommand("report", "Reports over backtest output");
    report->require_subcommand(1);
    auto* stats = report->add_subcommand("stats", "Pairwise significance tests over yearly metrics");
    stats->add_option("--in", rs_in, "metrics_by_year.csv")->required();
    stats->add_option("--out", rs_out, "significance.csv")->required();
    stats->add_option("--metric", rs_metric, "metric column to compare");
    stats->add_option("--level", rs_level, "significance level");
    stats->add_option("--n-boot", rs_boot, "bootstrap replicates");
    stats->add_option("--seed", rs_seed, "bootstrap seed");
    stats->add_option("--config", rs_config, "JSON with level, n_boot, metric, seed");
    stats->add_flag("--include-benchmark", rs_benchmark, "also compare against the benchmark rows");

    std::string al_model, al_views, al_date, al_method = "pw", al_out;
    double al_gamma = 10.0;
    auto* allocate = app.add_subcommand("allocate", "Optimal weights from a factor model and a views file");
    allocate->add_option("--model", al_model, "factor model and prior JSON")->required();
    allocate->add_option("--views", al_views, "views CSV")->required();
    allocate->add_option("--date", al_date, "view date (yyyy-mm-dd)")->required();
    allocate->add_option("--method", al_method, "fusion method");
    allocate->add_option("--gamma", al_gamma, "risk aversion");
    allocate->add_option("--out", al_out, "weights CSV")->required();

    std::string w_assets, w_sigma, w_config, w_out;
    auto* weights = app.add_subcommand("weights", "Transaction-cost-aware mean-variance weights");
    weights->add_option("--assets", w_assets, "CSV: asset,mu,w_prev,dollar_volume[,drift]")->required();
    weights->add_option("--sigma", w_sigma, "CSV covariance with asset names as header")->required();
    weights->add_option("--config", w_config, "JSON with gamma, impact_scale, wealth");
    weights->add_option("--out", w_out, "weights CSV")->required();

    std::vector<const char*> argv{"blfuse"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*fuse) return cmd_fuse(fa, out, err);
        if (*simulate) {
            return cmd_simulate(sim_config, sim_out, sim_seed_opt->count() ? std::optional(sim_seed) : std::nullopt, out);
        }
        if (*backtest) {
            return cmd_backtest(bt_market, bt_config, bt_out,
                                bt_seed_opt->count() ? std::optional(bt_seed) : std::nullopt, out, err);
        }
        if (*stats) {
            if (!rs_config.empty()) {
                const json j = read_json(rs_config);
                ConfigReader rd(j, rs_config);
                rs_level = rd.number_or("level", rs_level);
                rs_boot = static_cast<int>(rd.integer_or("n_boot", rs_boot));
                rs_metric = rd.text_or("metric", rs_metric);
                if (rd.has("seed")) rs_seed = rd.seed("seed");
                rd.finish();
            }
            SignificanceOptions opts{rs_level, rs_boot, split_seed(rs_seed, kBootstrapStream)};
            const auto mt = metric_table_from_csv(csv::read(rs_in), rs_metric, rs_in);
            csv::write_atomic(rs_out, significance_csv(mt, rs_benchmark, opts, err));
            out << "significance table -> " << rs_out << '\n';
            return kExitOk;
        }
        if (*allocate) return cmd_allocate(al_model, al_views, al_date, al_method, al_gamma, al_out, out);
        if (*weights) return cmd_weights(w_assets, w_sigma, w_config, w_out, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace blfuse::cli
