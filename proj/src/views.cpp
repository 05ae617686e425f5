#include "blfuse/views.hpp"

#include "blfuse/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <regex>
#include <sstream>

namespace blfuse {

double ArModel::forecast(std::span<const double> recent) const {
    const auto p = static_cast<std::size_t>(order());
    if (recent.size() < p) {
        throw ValidationError("ArModel::forecast: need " + std::to_string(p) + " recent values");
    }
    double y = intercept;
    for (std::size_t i = 0; i < p; ++i) y += coefficients(static_cast<Index>(i)) * recent[recent.size() - 1 - i];
    return y;
}

ArModel fit_ar(std::span<const double> history, int order) {
    if (order < 1) throw ValidationError("fit_ar: order must be at least 1");
    const auto len = static_cast<Index>(history.size());
    if (len < order + 10) {
        throw ValidationError("fit_ar: series of length " + std::to_string(len) + " is too short for order " +
                              std::to_string(order) + " (need " + std::to_string(order + 10) + ")");
    }
    const Index rows = len - order;
    Mat design(rows, order + 1);
    Vec target(rows);
    for (Index r = 0; r < rows; ++r) {
        const Index t = r + order;
        target(r) = history[static_cast<std::size_t>(t)];
        design(r, 0) = 1.0;
        for (Index i = 1; i <= order; ++i) design(r, i) = history[static_cast<std::size_t>(t - i)];
    }

    const auto [lo, hi] = std::minmax_element(history.begin(), history.end());
    const bool constant = *hi - *lo <= 1e-14 * std::max(1.0, std::abs(*hi));
    Vec beta;
    if (constant) {
        beta = design.completeOrthogonalDecomposition().solve(target);
    } else {
        Eigen::ColPivHouseholderQR<Mat> qr(design);
        if (qr.rank() < order + 1) {
            throw NumericalError("fit_ar: lag matrix is collinear (rank " + std::to_string(qr.rank()) + " of " +
                                 std::to_string(order + 1) + ")");
        }
        beta = qr.solve(target);
    }
    const double sse = (target - design * beta).squaredNorm();
    ArModel m;
    m.intercept = beta(0);
    m.coefficients = beta.tail(order);
    m.residual_variance = sse / static_cast<double>(len - order - 1);
    return m;
}

double oos_error_variance(std::span<const double> errors) {
    if (errors.empty()) return 0.0;
    double acc = 0.0;
    for (double e : errors) acc += e * e;
    return acc / static_cast<double>(errors.size());
}

ViewPrediction predict_view(const ArModel& model, std::span<const double> recent,
                            std::span<const double> oos_errors) {
    ViewPrediction out;
    out.triple.mean = model.forecast(recent);
    out.triple.aleatoric = std::max(model.residual_variance, kVarianceFloor);
    if (oos_errors.empty()) {
        out.triple.epistemic = kVarianceFloor;
        out.empty_oos_window = true;
    } else {
        out.triple.epistemic = std::max(oos_error_variance(oos_errors) - out.triple.aleatoric, kVarianceFloor);
    }
    return out;
}

UncertaintySplit decompose_total(double total, double aleatoric) {
    if (!(total >= 0.0) || !(aleatoric >= 0.0)) {
        throw ValidationError("decompose_total: variances must be non-negative");
    }
    const double diff = total - aleatoric;
    return {std::max(diff, kVarianceFloor), aleatoric, diff < kVarianceFloor};
}

ViewPrediction ar_view(std::span<const double> history, const ArViewConfig& cfg) {
    if (cfg.fit_window < cfg.order + 10 || cfg.oos_window < 0) {
        throw ValidationError("ar_view: fit_window must be at least order + 10");
    }
    const auto fit = static_cast<std::size_t>(cfg.fit_window);
    const auto oos = static_cast<std::size_t>(cfg.oos_window);
    if (history.size() < fit + oos) {
        throw ValidationError("ar_view: need " + std::to_string(fit + oos) + " observations, got " +
                              std::to_string(history.size()));
    }
    const std::size_t end = history.size();
    const ArModel current = fit_ar(history.subspan(end - fit, fit), cfg.order);

    std::vector<double> errors;
    if (oos > 0) {
        const std::size_t oos_start = end - oos;
        const ArModel earlier = fit_ar(history.subspan(oos_start - fit, fit), cfg.order);
        errors.reserve(oos);
        for (std::size_t t = oos_start; t < end; ++t) {
            errors.push_back(history[t] - earlier.forecast(history.first(t)));
        }
    }
    return predict_view(current, history, errors);
}

Prior prior_from_history(const Mat& factor_history, int window, int oos_window) {
    if (window < 2) throw ValidationError("prior_from_history: window must be at least 2");
    const Index t_len = factor_history.rows();
    const Index k = factor_history.cols();
    if (t_len < window + oos_window) {
        throw ValidationError("prior_from_history: need " + std::to_string(window + oos_window) +
                              " observations, got " + std::to_string(t_len));
    }
    Prior prior{Vec(k), Mat::Zero(k, k)};
    for (Index j = 0; j < k; ++j) {
        const auto col = factor_history.col(j);
        const auto last = col.tail(window);
        prior.xi(j) = last.mean();
        const double in_window_var = (last.array() - prior.xi(j)).square().sum() / (window - 1);
        std::vector<double> errors;
        for (Index t = t_len - oos_window; t < t_len; ++t) {
            errors.push_back(col(t) - col.segment(t - window, window).mean());
        }
        const double total = oos_error_variance(errors);
        prior.V(j, j) = errors.empty() ? kVarianceFloor : decompose_total(total, in_window_var).epistemic;
    }
    return prior;
}

namespace {

const char* const kViewsHeader = "date,source,factor,mean,aleatoric,epistemic";

}  // namespace

std::vector<ViewRecord> parse_views(std::istream& in, const std::string& origin) {
    const auto table = csv::parse(in, origin);
    std::ostringstream joined;
    for (std::size_t i = 0; i < table.header.size(); ++i) joined << (i ? "," : "") << table.header[i];
    if (joined.str() != kViewsHeader) {
        throw ValidationError(origin + ": header must be '" + std::string(kViewsHeader) + "'");
    }
    static const std::regex iso_date(R"(\d{4}-\d{2}-\d{2})");
    std::vector<ViewRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = origin + " row " + std::to_string(r + 1);
        ViewRecord rec;
        rec.date = row[0];
        if (!std::regex_match(rec.date, iso_date)) throw ValidationError(where + ", field date: not an ISO date");
        rec.source = row[1];
        rec.factor = row[2];
        if (rec.source.empty()) throw ValidationError(where + ", field source: empty");
        if (rec.factor.empty()) throw ValidationError(where + ", field factor: empty");
        rec.triple.mean = csv::parse_double(row[3], where + ", field mean");
        rec.triple.aleatoric = csv::parse_double(row[4], where + ", field aleatoric");
        rec.triple.epistemic = csv::parse_double(row[5], where + ", field epistemic");
        if (!(rec.triple.aleatoric > 0.0)) throw ValidationError(where + ", field aleatoric: must be positive");
        if (!(rec.triple.epistemic >= 0.0)) throw ValidationError(where + ", field epistemic: must be non-negative");
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<ViewRecord> load_views(const std::filesystem::path& path) {
    std::istringstream in(csv::read_file(path));
    return parse_views(in, path.string());
}

std::string format_views(const std::vector<ViewRecord>& records) {
    std::ostringstream out;
    out << kViewsHeader << '\n';
    for (const auto& r : records) {
        out << r.date << ',' << r.source << ',' << r.factor << ',' << csv::format_double(r.triple.mean) << ','
            << csv::format_double(r.triple.aleatoric) << ',' << csv::format_double(r.triple.epistemic) << '\n';
    }
    return out.str();
}

void write_views(const std::filesystem::path& path, const std::vector<ViewRecord>& records) {
    csv::write_atomic(path, format_views(records));
}

std::vector<SourceViews> views_for_date(const std::vector<ViewRecord>& records, const std::string& date,
                                        const std::vector<std::string>& factors) {
    std::vector<std::string> order;
    std::map<std::pair<std::string, std::string>, ViewTriple> lookup;
    for (const auto& r : records) {
        if (r.date != date) continue;
        if (std::find(order.begin(), order.end(), r.source) == order.end()) order.push_back(r.source);
        lookup[{r.source, r.factor}] = r.triple;
    }
    const auto k = static_cast<Index>(factors.size());
    std::vector<SourceViews> out;
    for (const auto& source : order) {
        SourceViews sv{source, ViewSet{Vec(k), Vec(k)}, Mat::Zero(k, k)};
        for (Index j = 0; j < k; ++j) {
            const auto it = lookup.find({source, factors[static_cast<std::size_t>(j)]});
            if (it == lookup.end()) {
                throw ValidationError("views for " + date + ": source '" + source + "' has no view on factor '" +
                                      factors[static_cast<std::size_t>(j)] + "'");
            }
            sv.views.q(j) = it->second.mean;
            sv.views.omega(j) = std::max(it->second.epistemic, kVarianceFloor);
            sv.factor_cov(j, j) = it->second.aleatoric;
        }
        out.push_back(std::move(sv));
    }
    return out;
}

}  // namespace blfuse
