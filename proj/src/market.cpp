#include "blfuse/market.hpp"

#include "blfuse/config.hpp"
#include "blfuse/csv.hpp"
#include "blfuse/rng.hpp"

#include <cmath>
#include <sstream>

namespace blfuse {

namespace {

constexpr std::uint64_t kMarketStream = 1;

}  // namespace

void MarketConfig::validate() const {
    if (n_factors < 1) throw ValidationError("market: n_factors must be at least 1");
    if (n_assets < n_factors) throw ValidationError("market: n_assets must be at least n_factors");
    if (horizon < 1) throw ValidationError("market: horizon must be at least 1");
    linalg::require_same_size(true_premia.size(), n_factors, "market: true_premia vs n_factors");
    linalg::require_square(factor_cov, "market", "factor_cov");
    linalg::require_same_size(factor_cov.rows(), n_factors, "market: factor_cov vs n_factors");
    if (linalg::max_asymmetry(factor_cov) > 1e-10 * std::max(1.0, factor_cov.cwiseAbs().maxCoeff()) ||
        Eigen::LLT<Mat>(linalg::symmetrize(factor_cov)).info() != Eigen::Success) {
        throw ValidationError("market: factor_cov must be symmetric positive definite");
    }
    if (!(idio_scale >= 0.0) || !std::isfinite(idio_scale)) throw ValidationError("market: idio_scale must be >= 0");
    if (!(volume_scale > 0.0) || !std::isfinite(volume_scale)) {
        throw ValidationError("market: volume_scale must be positive");
    }
    if (!(exposure_persistence >= 0.0 && exposure_persistence < 1.0)) {
        throw ValidationError("market: exposure_persistence must be in [0, 1)");
    }
}

MarketConfig default_market_config(int n_assets, int n_factors, int horizon, std::uint64_t seed) {
    MarketConfig cfg;
    cfg.n_assets = n_assets;
    cfg.n_factors = n_factors;
    cfg.horizon = horizon;
    cfg.true_premia = Vec::Constant(std::max(n_factors, 0), 0.005);
    cfg.factor_cov = Mat::Identity(std::max(n_factors, 0), std::max(n_factors, 0)) * 9e-4;
    cfg.seed = seed;
    return cfg;
}

nlohmann::json to_json(const MarketConfig& cfg) {
    return {{"n_assets", cfg.n_assets},
            {"n_factors", cfg.n_factors},
            {"horizon", cfg.horizon},
            {"true_premia", vec_to_json(cfg.true_premia)},
            {"factor_cov", mat_to_json(cfg.factor_cov)},
            {"idio_scale", cfg.idio_scale},
            {"volume_scale", cfg.volume_scale},
            {"exposure_persistence", cfg.exposure_persistence},
            {"seed", cfg.seed}};
}

MarketConfig market_config_from_json(const nlohmann::json& j) {
    ConfigReader rd(j, "market config");
    const auto n = static_cast<int>(rd.integer("n_assets"));
    const auto k = static_cast<int>(rd.integer("n_factors"));
    const auto horizon = static_cast<int>(rd.integer("horizon"));
    MarketConfig cfg = default_market_config(n, k, horizon, rd.seed("seed"));
    if (rd.has("true_premia")) cfg.true_premia = rd.vector("true_premia");
    if (rd.has("factor_cov")) cfg.factor_cov = rd.matrix("factor_cov");
    cfg.idio_scale = rd.number_or("idio_scale", cfg.idio_scale);
    cfg.volume_scale = rd.number_or("volume_scale", cfg.volume_scale);
    cfg.exposure_persistence = rd.number_or("exposure_persistence", cfg.exposure_persistence);
    rd.finish();
    cfg.validate();
    return cfg;
}

MarketPath generate(const MarketConfig& config) {
    config.validate();
    const Index n = config.n_assets;
    const Index k = config.n_factors;
    const Index horizon = config.horizon;
    Rng rng(split_seed(config.seed, kMarketStream));

    MarketPath path;
    path.config = config;
    const Mat chol = Eigen::LLT<Mat>(linalg::symmetrize(config.factor_cov)).matrixL();

    Vec volume(n);
    for (Index i = 0; i < n; ++i) volume(i) = config.volume_scale * std::exp(rng.normal());
    path.idio_var.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double vol = config.idio_scale * std::exp(0.25 * rng.normal());
        path.idio_var(i) = vol * vol;
    }

    const double phi = config.exposure_persistence;
    const double innovation = std::sqrt(1.0 - phi * phi);
    Mat x(n, k);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < k; ++j) x(i, j) = rng.normal();
    }

    path.exposures.reserve(static_cast<std::size_t>(horizon));
    path.factor_returns.resize(horizon, k);
    path.asset_returns.resize(horizon, n);
    path.dollar_volume.resize(horizon, n);
    path.benchmark.resize(horizon);
    const Vec idio_sd = path.idio_var.cwiseSqrt();
    for (Index t = 0; t < horizon; ++t) {
        if (t > 0) {
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < k; ++j) x(i, j) = phi * x(i, j) + innovation * rng.normal();
            }
        }
        Vec z(k);
        for (Index j = 0; j < k; ++j) z(j) = rng.normal();
        const Vec f = config.true_premia + chol * z;
        Vec eps(n);
        for (Index i = 0; i < n; ++i) eps(i) = idio_sd(i) * rng.normal();
        const Vec r = x * f + eps;

        path.exposures.push_back(x);
        path.factor_returns.row(t) = f.transpose();
        path.asset_returns.row(t) = r.transpose();
        path.dollar_volume.row(t) = volume.transpose();
        path.benchmark(t) = r.mean();
    }
    return path;
}

CrossSectionFit estimate_factor_returns(const Mat& x, const Vec& idio_var, const Vec& r,
                                        CrossSectionEstimator estimator) {
    const Index n = x.rows();
    const Index k = x.cols();
    linalg::require_same_size(r.size(), n, "estimate_factor_returns (r vs X rows)");
    if (k == 0 || n <= k) throw ValidationError("estimate_factor_returns: need more assets than factors");
    Vec sqrt_w = Vec::Ones(n);
    if (estimator == CrossSectionEstimator::gls) {
        linalg::require_same_size(idio_var.size(), n, "estimate_factor_returns (D vs X rows)");
        for (Index i = 0; i < n; ++i) {
            if (!(idio_var(i) > 0.0)) throw ValidationError("estimate_factor_returns: D entries must be positive");
        }
        sqrt_w = idio_var.cwiseSqrt().cwiseInverse();
    }
    const Mat xw = sqrt_w.asDiagonal() * x;
    Eigen::ColPivHouseholderQR<Mat> qr(xw);
    if (qr.rank() < k) {
        throw ValidationError("estimate_factor_returns: exposures are rank deficient (rank " +
                              std::to_string(qr.rank()) + " of " + std::to_string(k) + ")");
    }
    CrossSectionFit fit;
    fit.factors = qr.solve(Vec(sqrt_w.cwiseProduct(r)));
    fit.residuals = r - x * fit.factors;
    fit.mse = fit.residuals.squaredNorm() / static_cast<double>(n - k);
    return fit;
}

namespace {

std::string numbered_header(const std::string& prefix, Index count) {
    std::string out;
    for (Index i = 0; i < count; ++i) out += "," + prefix + std::to_string(i);
    return out;
}

void append_row(std::ostringstream& out, const auto& row) {
    for (Index i = 0; i < row.size(); ++i) out << ',' << csv::format_double(row(i));
    out << '\n';
}

// Loads a t,<prefix>0..<prefix>{count-1}[,extra] table into a T x count matrix.
Mat read_wide(const std::filesystem::path& file, const std::string& prefix, Index count, Index horizon,
              Vec* extra = nullptr, const std::string& extra_name = "") {
    const auto table = csv::read(file);
    const auto expected = static_cast<std::size_t>(count) + 1 + (extra ? 1 : 0);
    if (table.header.size() != expected || table.header[0] != "t") {
        throw ValidationError(file.string() + ": unexpected header");
    }
    if (static_cast<Index>(table.rows.size()) != horizon) {
        throw ValidationError(file.string() + ": expected " + std::to_string(horizon) + " rows");
    }
    std::vector<std::size_t> cols;
    for (Index i = 0; i < count; ++i) cols.push_back(table.column(prefix + std::to_string(i)));
    Mat m(horizon, count);
    if (extra) extra->resize(horizon);
    for (Index t = 0; t < horizon; ++t) {
        const auto& row = table.rows[static_cast<std::size_t>(t)];
        const std::string where = file.string() + " row " + std::to_string(t + 1);
        if (csv::parse_int(row[0], where + ", field t") != t) throw ValidationError(where + ": t out of order");
        for (Index i = 0; i < count; ++i) {
            m(t, i) = csv::parse_double(row[cols[static_cast<std::size_t>(i)]], where);
        }
        if (extra) (*extra)(t) = csv::parse_double(row[table.column(extra_name)], where);
    }
    return m;
}

}  // namespace

void write_market(const std::filesystem::path& dir, const MarketPath& path) {
    const Index horizon = path.horizon();
    const Index n = path.n_assets();
    const Index k = path.n_factors();

    std::ostringstream exposures;
    exposures << "t,asset" << numbered_header("x_", k) << '\n';
    for (Index t = 0; t < horizon; ++t) {
        const Mat& x = path.exposures[static_cast<std::size_t>(t)];
        for (Index i = 0; i < n; ++i) {
            exposures << t << ',' << i;
            append_row(exposures, x.row(i));
        }
    }

    std::ostringstream factors, returns, volumes;
    factors << "t" << numbered_header("f_", k) << '\n';
    returns << "t" << numbered_header("r_", n) << ",benchmark\n";
    volumes << "t" << numbered_header("L_", n) << '\n';
    for (Index t = 0; t < horizon; ++t) {
        factors << t;
        append_row(factors, path.factor_returns.row(t));
        returns << t;
        for (Index i = 0; i < n; ++i) returns << ',' << csv::format_double(path.asset_returns(t, i));
        returns << ',' << csv::format_double(path.benchmark(t)) << '\n';
        volumes << t;
        append_row(volumes, path.dollar_volume.row(t));
    }

    const nlohmann::json manifest = {{"format", "blfuse-market-1"},
                                     {"config", to_json(path.config)},
                                     {"seed", path.config.seed},
                                     {"idio_var", vec_to_json(path.idio_var)}};

    std::filesystem::create_directories(dir);
    csv::write_atomic(dir / "exposures_t.csv", exposures.str());
    csv::write_atomic(dir / "factors.csv", factors.str());
    csv::write_atomic(dir / "returns.csv", returns.str());
    csv::write_atomic(dir / "volumes.csv", volumes.str());
    csv::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

MarketPath load_market(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(csv::read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError((dir / "manifest.json").string() + ": " + e.what());
    }
    ConfigReader rd(manifest, (dir / "manifest.json").string());
    if (rd.text("format") != "blfuse-market-1") throw ValidationError("manifest.json: unsupported format");
    MarketPath path;
    path.config = market_config_from_json(rd.raw("config"));
    rd.seed("seed");
    path.idio_var = rd.vector("idio_var");
    rd.finish();

    const Index n = path.config.n_assets;
    const Index k = path.config.n_factors;
    const Index horizon = path.config.horizon;
    linalg::require_same_size(path.idio_var.size(), n, "manifest.json idio_var");

    path.factor_returns = read_wide(dir / "factors.csv", "f_", k, horizon);
    path.asset_returns = read_wide(dir / "returns.csv", "r_", n, horizon, &path.benchmark, "benchmark");
    path.dollar_volume = read_wide(dir / "volumes.csv", "L_", n, horizon);
    for (Index t = 0; t < horizon; ++t) {
        for (Index i = 0; i < n; ++i) {
            if (!(path.dollar_volume(t, i) > 0.0)) {
                throw ValidationError("volumes.csv row " + std::to_string(t + 1) + ": volumes must be positive");
            }
        }
    }

    const auto file = dir / "exposures_t.csv";
    const auto table = csv::read(file);
    if (table.header.size() != static_cast<std::size_t>(k) + 2 || table.header[0] != "t" ||
        table.header[1] != "asset") {
        throw ValidationError(file.string() + ": unexpected header");
    }
    if (static_cast<Index>(table.rows.size()) != horizon * n) {
        throw ValidationError(file.string() + ": expected " + std::to_string(horizon * n) + " rows");
    }
    path.exposures.assign(static_cast<std::size_t>(horizon), Mat(n, k));
    std::size_t r = 0;
    for (Index t = 0; t < horizon; ++t) {
        for (Index i = 0; i < n; ++i, ++r) {
            const auto& row = table.rows[r];
            const std::string where = file.string() + " row " + std::to_string(r + 1);
            if (csv::parse_int(row[0], where + ", field t") != t || csv::parse_int(row[1], where + ", field asset") != i) {
                throw ValidationError(where + ": rows must be ordered by t then asset");
            }
            for (Index j = 0; j < k; ++j) {
                path.exposures[static_cast<std::size_t>(t)](i, j) =
                    csv::parse_double(row[static_cast<std::size_t>(j) + 2], where);
            }
        }
    }
    return path;
}

}  // namespace blfuse
