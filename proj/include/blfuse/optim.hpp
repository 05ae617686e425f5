#pragma once

#include "blfuse/linalg.hpp"

#include <functional>

namespace blfuse::optim {

struct ScalarMinimum {
    double x;
    double fx;
};

/// Global-ish minimization on [lo, hi]: a uniform scan of `grid` points locates
/// the best bracket, golden-section search refines it to `tol`, and the
/// endpoints are always considered. Non-finite objective values count as +inf.
ScalarMinimum minimize_bracketed(const std::function<double(double)>& f, double lo, double hi,
                                 double tol, int grid = 32);

struct NelderMeadOptions {
    int max_iterations = 1000;
    double f_tol = 1e-12;   ///< stop when simplex f-spread <= f_tol * (1 + |f_best|)
    double x_tol = 1e-10;   ///< ... and simplex diameter <= x_tol * (1 + |x_best|)
    double initial_step = 0.1;
};

struct NelderMeadResult {
    Vec x;
    double fx;
    int iterations;
    bool converged;
};

/// Derivative-free simplex minimization (standard reflection/expansion/
/// contraction/shrink coefficients 1, 2, 0.5, 0.5).
NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                             const NelderMeadOptions& opts = {});

}  // namespace blfuse::optim
