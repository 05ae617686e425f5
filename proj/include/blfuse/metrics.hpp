#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace blfuse {

double annualized_mean(std::span<const double> returns, int periods_per_year);

/// Sample standard deviation (n - 1) times sqrt(periods_per_year).
double annualized_vol(std::span<const double> returns, int periods_per_year);

/// Annualized mean over annualized vol. Needs at least two returns; zero vol is an error.
double sharpe(std::span<const double> returns, int periods_per_year);

/// Annualized mean over annualized downside deviation sqrt(mean(min(r, 0)^2)).
/// A series without negative returns is an error.
double sortino(std::span<const double> returns, int periods_per_year);

/// Sharpe ratio of the active return strategy - benchmark.
double information_ratio(std::span<const double> strategy, std::span<const double> benchmark,
                         int periods_per_year);

/// min_t equity_t / running_max_t - 1 on the compounded equity curve, starting
/// from 1. Always <= 0.
double max_drawdown(std::span<const double> returns);

/// Two aligned samples, e.g. yearly Sharpe ratios of methods a and b.
struct PairedSample {
    std::string label_a;
    std::string label_b;
    std::vector<double> a;
    std::vector<double> b;

    std::vector<double> diffs() const;
    void validate(std::size_t min_size) const;
};

/// Alternative hypothesis about a - b.
enum class Alternative { greater, less, two_sided };

struct TestResult {
    double statistic;
    double p_value;
};

/// Paired t test on a - b with n - 1 degrees of freedom. Zero variance gives a
/// degenerate p of 0 or 1 by the sign of the mean (0.5 when all diffs are 0).
TestResult paired_t(const PairedSample& sample, Alternative alt);

enum class WilcoxonMethod { automatic, exact, normal };

/// Wilcoxon signed-rank test on a - b; statistic is W+ (sum of positive ranks).
/// Zero diffs are dropped, ties get average ranks. Automatic uses the exact
/// null distribution for n <= 25 and the normal approximation with continuity
/// and tie corrections above. All-zero diffs are an error.
TestResult wilcoxon_signed_rank(const PairedSample& sample, Alternative alt,
                                WilcoxonMethod method = WilcoxonMethod::automatic);

enum class BootStatistic { mean, median };

struct Interval {
    double estimate;
    double lo;
    double hi;
};

/// BCa bootstrap interval for mean(a - b) or median(a) - median(b), resampling
/// pairs. Deterministic per seed. Constant replicates collapse to a point.
Interval bca_interval(const PairedSample& sample, BootStatistic statistic, double level, int n_boot,
                      std::uint64_t seed);

struct SignificanceOptions {
    double level = 0.10;  ///< one-sided test size; BCa intervals use coverage 1 - level
    int n_boot = 2000;
    std::uint64_t seed = 0;
};

struct SignificanceRow {
    std::string method_a;
    std::string method_b;
    double t_p;         ///< one-sided, alternative a > b
    Interval bca_mean;
    Interval bca_median;
    double wilcoxon_p;  ///< one-sided, alternative a > b; NaN when all diffs are zero
    std::vector<std::string> flags;  ///< e.g. "t+", "w-", "bca_mean+"
};

struct SignificanceTable {
    std::vector<SignificanceRow> rows;
    std::vector<std::string> notes;  ///< pairs skipped for lack of common years
};

/// One row per unordered pair (i < j in `methods` order). `by_method` maps a
/// method to its per-year metric values; pairs are aligned on common years and
/// skipped (with a note) when fewer than three remain.
SignificanceTable significance_table(const std::vector<std::string>& methods,
                                     const std::map<std::string, std::map<int, double>>& by_method,
                                     const SignificanceOptions& opts);

std::string format_significance_csv(const SignificanceTable& table);

}  // namespace blfuse
