#include "blfuse/metrics.hpp"

#include "blfuse/csv.hpp"
#include "blfuse/linalg.hpp"
#include "blfuse/rng.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace blfuse {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_size(std::span<const double> r, std::size_t n, const char* context) {
    if (r.size() < n) {
        throw ValidationError(std::string(context) + ": need at least " + std::to_string(n) + " returns");
    }
}

double mean_of(std::span<const double> r) {
    return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

double sample_sd(std::span<const double> r) {
    const double m = mean_of(r);
    double acc = 0.0;
    for (double x : r) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(r.size() - 1));
}

double normal_cdf(double z) { return boost::math::cdf(boost::math::normal(), z); }
double normal_sf(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal(), z)); }

double two_sided(double p_greater, double p_less) { return std::min(1.0, 2.0 * std::min(p_greater, p_less)); }

double median_of(std::vector<double> v) {
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    return 0.5 * (*std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)) + upper);
}

}  // namespace

double annualized_mean(std::span<const double> returns, int periods_per_year) {
    require_size(returns, 1, "annualized_mean");
    return mean_of(returns) * periods_per_year;
}

double annualized_vol(std::span<const double> returns, int periods_per_year) {
    require_size(returns, 2, "annualized_vol");
    return sample_sd(returns) * std::sqrt(static_cast<double>(periods_per_year));
}

double sharpe(std::span<const double> returns, int periods_per_year) {
    require_size(returns, 2, "sharpe");
    const double vol = annualized_vol(returns, periods_per_year);
    if (!(vol > 0.0)) throw ValidationError("sharpe: return series has zero volatility");
    return annualized_mean(returns, periods_per_year) / vol;
}

double sortino(std::span<const double> returns, int periods_per_year) {
    require_size(returns, 2, "sortino");
    double acc = 0.0;
    for (double r : returns) acc += r < 0.0 ? r * r : 0.0;
    if (!(acc > 0.0)) throw ValidationError("sortino: no returns below zero");
    const double downside = std::sqrt(acc / static_cast<double>(returns.size()) * periods_per_year);
    return annualized_mean(returns, periods_per_year) / downside;
}

double information_ratio(std::span<const double> strategy, std::span<const double> benchmark,
                         int periods_per_year) {
    if (strategy.size() != benchmark.size()) throw ValidationError("information_ratio: length mismatch");
    std::vector<double> active(strategy.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = strategy[i] - benchmark[i];
    return sharpe(active, periods_per_year);
}

double max_drawdown(std::span<const double> returns) {
    require_size(returns, 1, "max_drawdown");
    double equity = 1.0;
    double peak = 1.0;
    double worst = 0.0;
    for (double r : returns) {
        equity *= 1.0 + r;
        peak = std::max(peak, equity);
        worst = std::min(worst, equity / peak - 1.0);
    }
    return worst;
}

std::vector<double> PairedSample::diffs() const {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

void PairedSample::validate(std::size_t min_size) const {
    if (a.size() != b.size()) throw ValidationError("paired sample " + label_a + "/" + label_b + ": length mismatch");
    if (a.size() < min_size) {
        throw ValidationError("paired sample " + label_a + "/" + label_b + ": need at least " +
                              std::to_string(min_size) + " pairs");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
            throw ValidationError("paired sample " + label_a + "/" + label_b + ": missing or non-finite value");
        }
    }
}

TestResult paired_t(const PairedSample& sample, Alternative alt) {
    sample.validate(3);
    const auto d = sample.diffs();
    const double n = static_cast<double>(d.size());
    const double m = mean_of(d);
    const double sd = sample_sd(d);
    double t = 0.0;
    double p_greater = 0.5;
    double p_less = 0.5;
    // Equal diffs can leave a round-off sd; treat them as exactly degenerate.
    const bool constant = std::all_of(d.begin(), d.end(), [&](double x) { return x == d.front(); });
    if (!constant && sd > 0.0) {
        t = m / (sd / std::sqrt(n));
        const boost::math::students_t dist(n - 1.0);
        p_greater = boost::math::cdf(boost::math::complement(dist, t));
        p_less = boost::math::cdf(dist, t);
    } else if (m != 0.0) {
        t = std::copysign(std::numeric_limits<double>::infinity(), m);
        p_greater = m > 0.0 ? 0.0 : 1.0;
        p_less = 1.0 - p_greater;
    }
    switch (alt) {
        case Alternative::greater: return {t, p_greater};
        case Alternative::less: return {t, p_less};
        case Alternative::two_sided: return {t, two_sided(p_greater, p_less)};
    }
    return {t, kNaN};
}

TestResult wilcoxon_signed_rank(const PairedSample& sample, Alternative alt, WilcoxonMethod method) {
    sample.validate(1);
    std::vector<double> d;
    for (double x : sample.diffs()) {
        if (x != 0.0) d.push_back(x);
    }
    if (d.empty()) throw ValidationError("wilcoxon_signed_rank: all differences are zero");
    const std::size_t n = d.size();

    // Doubled average ranks are integers: a tie block over ranks r..s gets r + s.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
        const auto r2 = static_cast<long>(i + 1 + j + 1);
        for (std::size_t m = i; m <= j; ++m) rank2[idx[m]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    long w2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0.0) w2 += rank2[i];
    }
    const double w = 0.5 * static_cast<double>(w2);

    const bool exact = method == WilcoxonMethod::exact || (method == WilcoxonMethod::automatic && n <= 25);
    double p_greater;
    double p_less;
    if (exact) {
        if (n > 60) throw ValidationError("wilcoxon_signed_rank: exact distribution limited to 60 pairs");
        const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
        std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
        counts[0] = 1.0;
        long reach = 0;
        for (long r : rank2) {
            for (long s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
            reach += r;
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        double ge = 0.0;
        double le = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s >= w2) ge += counts[static_cast<std::size_t>(s)];
            if (s <= w2) le += counts[static_cast<std::size_t>(s)];
        }
        p_greater = ge / all;
        p_less = le / all;
    } else {
        if (n < 6) throw ValidationError("wilcoxon_signed_rank: normal approximation needs at least 6 nonzero pairs");
        const double nn = static_cast<double>(n);
        const double mu = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        const double sd = std::sqrt(var);
        p_greater = normal_sf((w - mu - 0.5) / sd);
        p_less = normal_cdf((w - mu + 0.5) / sd);
    }
    switch (alt) {
        case Alternative::greater: return {w, p_greater};
        case Alternative::less: return {w, p_less};
        case Alternative::two_sided: return {w, two_sided(p_greater, p_less)};
    }
    return {w, kNaN};
}

Interval bca_interval(const PairedSample& sample, BootStatistic statistic, double level, int n_boot,
                      std::uint64_t seed) {
    sample.validate(2);
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("bca_interval: level must be in (0, 1)");
    if (n_boot < 1000) throw ValidationError("bca_interval: n_boot must be at least 1000");
    const std::size_t n = sample.a.size();

    std::vector<double> xa(n), xb(n);
    auto stat = [&](const std::vector<std::size_t>& pick) {
        xa.resize(pick.size());
        xb.resize(pick.size());
        for (std::size_t i = 0; i < pick.size(); ++i) {
            xa[i] = sample.a[pick[i]];
            xb[i] = sample.b[pick[i]];
        }
        if (statistic == BootStatistic::mean) {
            double acc = 0.0;
            for (std::size_t i = 0; i < pick.size(); ++i) acc += xa[i] - xb[i];
            return acc / static_cast<double>(pick.size());
        }
        return median_of(xa) - median_of(xb);
    };

    std::vector<std::size_t> pick(n);
    std::iota(pick.begin(), pick.end(), 0);
    const double theta = stat(pick);

    Rng rng(split_seed(seed, 0xb0075));
    std::vector<double> reps(static_cast<std::size_t>(n_boot));
    for (auto& rep : reps) {
        for (auto& p : pick) p = static_cast<std::size_t>(rng.below(n));
        rep = stat(pick);
    }
    std::sort(reps.begin(), reps.end());
    if (reps.back() - reps.front() <= 1e-12 * std::max(1.0, std::abs(theta))) return {theta, theta, theta};

    const auto below = static_cast<double>(std::lower_bound(reps.begin(), reps.end(), theta) - reps.begin());
    const auto equal = static_cast<double>(std::upper_bound(reps.begin(), reps.end(), theta) - reps.begin()) - below;
    const double b = static_cast<double>(n_boot);
    const double prop = std::clamp((below + 0.5 * equal) / b, 0.5 / b, 1.0 - 0.5 / b);
    const boost::math::normal unit;
    const double z0 = boost::math::quantile(unit, prop);

    std::vector<double> jack(n);
    std::vector<std::size_t> loo;
    for (std::size_t i = 0; i < n; ++i) {
        loo.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) loo.push_back(j);
        }
        jack[i] = stat(loo);
    }
    const double jbar = mean_of(jack);
    double s2 = 0.0;
    double s3 = 0.0;
    for (double v : jack) {
        const double dlt = jbar - v;
        s2 += dlt * dlt;
        s3 += dlt * dlt * dlt;
    }
    const double accel = s2 > 0.0 ? s3 / (6.0 * std::pow(s2, 1.5)) : 0.0;

    auto adjusted = [&](double alpha) {
        const double z = boost::math::quantile(unit, alpha);
        return normal_cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)));
    };
    auto quantile = [&](double p) {
        const double h = std::clamp(p, 0.0, 1.0) * (b - 1.0);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, reps.size() - 1);
        return reps[lo] + (h - static_cast<double>(lo)) * (reps[hi] - reps[lo]);
    };
    const double tail = 0.5 * (1.0 - level);
    return {theta, quantile(adjusted(tail)), quantile(adjusted(1.0 - tail))};
}

SignificanceTable significance_table(const std::vector<std::string>& methods,
                                     const std::map<std::string, std::map<int, double>>& by_method,
                                     const SignificanceOptions& opts) {
    if (methods.size() < 2) throw ValidationError("significance_table: need at least two methods");
    if (!(opts.level > 0.0 && opts.level < 0.5)) throw ValidationError("significance_table: level must be in (0, 0.5)");
    SignificanceTable table;
    std::uint64_t pair_index = 0;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        for (std::size_t j = i + 1; j < methods.size(); ++j, ++pair_index) {
            PairedSample s{methods[i], methods[j], {}, {}};
            const auto ia = by_method.find(methods[i]);
            const auto ib = by_method.find(methods[j]);
            if (ia != by_method.end() && ib != by_method.end()) {
                for (const auto& [year, va] : ia->second) {
                    const auto hit = ib->second.find(year);
                    if (hit == ib->second.end() || !std::isfinite(va) || !std::isfinite(hit->second)) continue;
                    s.a.push_back(va);
                    s.b.push_back(hit->second);
                }
            }
            if (s.a.size() < 3) {
                table.notes.push_back(methods[i] + " vs " + methods[j] + ": skipped, " + std::to_string(s.a.size()) +
                                      " common years (need 3)");
                continue;
            }
            SignificanceRow row;
            row.method_a = methods[i];
            row.method_b = methods[j];
            row.t_p = paired_t(s, Alternative::greater).p_value;
            const double t_less = paired_t(s, Alternative::less).p_value;
            const double coverage = 1.0 - opts.level;
            row.bca_mean = bca_interval(s, BootStatistic::mean, coverage, opts.n_boot,
                                        split_seed(opts.seed, 2 * pair_index));
            row.bca_median = bca_interval(s, BootStatistic::median, coverage, opts.n_boot,
                                          split_seed(opts.seed, 2 * pair_index + 1));
            const auto d = s.diffs();
            const bool all_zero = std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; });
            double w_less = kNaN;
            row.wilcoxon_p = kNaN;
            if (!all_zero) {
                row.wilcoxon_p = wilcoxon_signed_rank(s, Alternative::greater).p_value;
                w_less = wilcoxon_signed_rank(s, Alternative::less).p_value;
            }
            if (row.t_p < opts.level) row.flags.push_back("t+");
            if (t_less < opts.level) row.flags.push_back("t-");
            if (row.wilcoxon_p < opts.level) row.flags.push_back("w+");
            if (w_less < opts.level) row.flags.push_back("w-");
            if (row.bca_mean.lo > 0.0) row.flags.push_back("bca_mean+");
            if (row.bca_mean.hi < 0.0) row.flags.push_back("bca_mean-");
            if (row.bca_median.lo > 0.0) row.flags.push_back("bca_med+");
            if (row.bca_median.hi < 0.0) row.flags.push_back("bca_med-");
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::string format_significance_csv(const SignificanceTable& table) {
    std::ostringstream out;
    out << "method_a,method_b,t_p,bca_mean_lo,bca_mean_hi,bca_med_lo,bca_med_hi,wilcoxon_p,flags\n";
    for (const auto& r : table.rows) {
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : "|") + f;
        out << r.method_a << ',' << r.method_b << ',' << csv::format_double(r.t_p) << ','
            << csv::format_double(r.bca_mean.lo) << ',' << csv::format_double(r.bca_mean.hi) << ','
            << csv::format_double(r.bca_median.lo) << ',' << csv::format_double(r.bca_median.hi) << ','
            << csv::format_double(r.wilcoxon_p) << ',' << flags << '\n';
    }
    return out.str();
}

}  // namespace blfuse
