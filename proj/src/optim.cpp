#include "blfuse/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace blfuse::optim {

namespace {

double finite_or_inf(double v) {
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

ScalarMinimum minimize_bracketed(const std::function<double(double)>& f, double lo, double hi,
                                 double tol, int grid) {
    grid = std::max(grid, 2);
    const double h = (hi - lo) / grid;
    int best = 0;
    double best_f = finite_or_inf(f(lo));
    for (int i = 1; i <= grid; ++i) {
        const double v = finite_or_inf(f(i == grid ? hi : lo + i * h));
        if (v < best_f) {
            best_f = v;
            best = i;
        }
    }
    ScalarMinimum result{best == grid ? hi : lo + best * h, best_f};

    double a = std::max(lo, lo + (best - 1) * h);
    double b = std::min(hi, lo + (best + 1) * h);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = finite_or_inf(f(c));
    double fd = finite_or_inf(f(d));
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = finite_or_inf(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = finite_or_inf(f(d));
        }
    }
    for (const auto& [x, fx] : {std::pair{c, fc}, std::pair{d, fd}}) {
        if (fx < result.fx) result = {x, fx};
    }
    return result;
}

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0,
                             const NelderMeadOptions& opts) {
    const Index n = x0.size();
    std::vector<Vec> pts(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> fv(static_cast<std::size_t>(n + 1));
    for (Index i = 0; i < n; ++i) {
        const double step = opts.initial_step * std::max(1.0, std::abs(x0(i)));
        pts[static_cast<std::size_t>(i + 1)](i) += step;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) fv[i] = finite_or_inf(f(pts[i]));

    std::vector<std::size_t> order(pts.size());
    int it = 0;
    bool converged = false;
    for (; it < opts.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[order.size() - 2];

        double diameter = 0.0;
        for (const auto& p : pts) diameter = std::max(diameter, (p - pts[best]).cwiseAbs().maxCoeff());
        const double spread = fv[worst] - fv[best];
        if (std::isfinite(fv[best]) && spread <= opts.f_tol * (1.0 + std::abs(fv[best])) &&
            diameter <= opts.x_tol * (1.0 + pts[best].cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }

        Vec centroid = Vec::Zero(n);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i != worst) centroid += pts[i];
        }
        centroid /= static_cast<double>(n);

        const Vec xr = centroid + (centroid - pts[worst]);
        const double fr = finite_or_inf(f(xr));
        if (fr < fv[best]) {
            const Vec xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = finite_or_inf(f(xe));
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            pts[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid))
                               : Vec(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = finite_or_inf(f(xc));
        if (fc < (outside ? fr : fv[worst])) {
            pts[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            fv[i] = finite_or_inf(f(pts[i]));
        }
    }
    const auto best = static_cast<std::size_t>(std::distance(fv.begin(), std::min_element(fv.begin(), fv.end())));
    return {pts[best], fv[best], it, converged};
}

}  // namespace blfuse::optim
