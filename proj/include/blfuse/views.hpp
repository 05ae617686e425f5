#pragma once

#include "blfuse/blapt.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace blfuse {

/// Lower bound on produced epistemic (and aleatoric) variances.
inline constexpr double kVarianceFloor = 1e-8;

/// A per-factor view: predicted risk premium plus its uncertainty split into
/// aleatoric (data noise) and epistemic (model) variance.
struct ViewTriple {
    double mean = 0.0;
    double aleatoric = 0.0;
    double epistemic = 0.0;

    double total() const { return aleatoric + epistemic; }
};

/// AR(p) with intercept: y_t = c + sum_i phi_i y_{t-i} + e_t.
struct ArModel {
    Vec coefficients;  ///< phi_1 .. phi_p (phi_1 multiplies the most recent value)
    double intercept = 0.0;
    double residual_variance = 0.0;  ///< SSE / (len - p - 1)

    int order() const { return static_cast<int>(coefficients.size()); }

    /// One-step forecast from the tail of `recent` (needs at least p values).
    double forecast(std::span<const double> recent) const;
};

/// Least-squares AR(p) fit. Requires len >= p + 10. A constant series is fitted
/// with the minimum-norm solution (forecast equals the constant, zero residual);
/// any other rank-deficient lag matrix is rejected.
ArModel fit_ar(std::span<const double> history, int order);

/// Mean squared one-step error over an out-of-sample window.
double oos_error_variance(std::span<const double> errors);

struct ViewPrediction {
    ViewTriple triple;
    bool empty_oos_window = false;  ///< epistemic fell back to the floor
};

/// mean = one-step AR forecast, aleatoric = residual variance (floored),
/// epistemic = max(oos_error_variance - aleatoric, floor).
ViewPrediction predict_view(const ArModel& model, std::span<const double> recent,
                            std::span<const double> oos_errors);

struct UncertaintySplit {
    double epistemic;
    double aleatoric;
    bool clipped;  ///< total - aleatoric fell below the floor
};

/// Law-of-total-variance split: epistemic = max(total - aleatoric, floor).
UncertaintySplit decompose_total(double total, double aleatoric);

/// Rolling AR view generation for one factor series.
struct ArViewConfig {
    int order = 1;
    int fit_window = 20;  ///< observations in each refit window
    int oos_window = 20;  ///< trailing out-of-sample error window

    int warmup() const { return fit_window + oos_window; }
};

/// View from `history` (observations strictly before the decision date).
/// The current model is fitted on the last fit_window points; out-of-sample
/// errors come from a model fitted on the fit_window points preceding the last
/// oos_window points, forecasting each of those points one step ahead.
ViewPrediction ar_view(std::span<const double> history, const ArViewConfig& cfg);

/// Prior for the factor premia from a T x k history of estimated factor
/// returns: xi = mean of the last `window` rows; V diagonal, each entry the
/// epistemic part of the rolling-mean forecaster's out-of-sample error
/// (same split as predict_view, with the in-window variance as aleatoric).
Prior prior_from_history(const Mat& factor_history, int window, int oos_window);

/// One row of a views file: date,source,factor,mean,aleatoric,epistemic.
struct ViewRecord {
    std::string date;  ///< ISO yyyy-mm-dd
    std::string source;
    std::string factor;
    ViewTriple triple;
};

std::vector<ViewRecord> parse_views(std::istream& in, const std::string& origin);
std::vector<ViewRecord> load_views(const std::filesystem::path& path);
std::string format_views(const std::vector<ViewRecord>& records);
void write_views(const std::filesystem::path& path, const std::vector<ViewRecord>& records);

/// Groups records for one date into per-source ViewSets over `factors`
/// (q = mean, Omega = epistemic, F = diag(aleatoric)). Sources appear in
/// first-seen order; a missing (source, factor) pair is an error.
std::vector<SourceViews> views_for_date(const std::vector<ViewRecord>& records, const std::string& date,
                                        const std::vector<std::string>& factors);

}  // namespace blfuse
