#include "blfuse/linalg.hpp"

#include <cmath>
#include <limits>

namespace blfuse::linalg {

double max_asymmetry(const Mat& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue(const Mat& sym) {
    if (sym.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double spd_condition(const Mat& sym) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(sym), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev(0) <= 0.0) return std::numeric_limits<double>::infinity();
    return ev(ev.size() - 1) / ev(0);
}

namespace {

Eigen::LLT<Mat> factor(const Mat& a, const char* context) {
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericalError(std::string(context) + ": matrix is not positive definite",
                             spd_condition(a));
    }
    return llt;
}

}  // namespace

Mat spd_solve(const Mat& a, const Mat& b, const char* context) {
    return factor(a, context).solve(b);
}

Vec spd_solve(const Mat& a, const Vec& b, const char* context) {
    return factor(a, context).solve(b);
}

Mat spd_inverse(const Mat& a, const char* context) {
    return symmetrize(spd_solve(a, Mat(Mat::Identity(a.rows(), a.cols())), context));
}

std::optional<double> spd_log_det(const Mat& a) {
    Eigen::LLT<Mat> llt(a);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Vec diag = llt.matrixLLT().diagonal();
    double acc = 0.0;
    for (Index i = 0; i < diag.size(); ++i) {
        if (!(diag(i) > 0.0)) return std::nullopt;
        acc += std::log(diag(i));
    }
    return 2.0 * acc;
}

void require_square(const Mat& m, const char* context, const char* name) {
    if (m.rows() != m.cols()) {
        throw ValidationError(std::string(context) + ": " + name + " must be square, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void require_same_size(Index a, Index b, const char* context) {
    if (a != b) {
        throw ValidationError(std::string(context) + ": dimension mismatch (" +
                              std::to_string(a) + " vs " + std::to_string(b) + ")");
    }
}

}  // namespace blfuse::linalg
