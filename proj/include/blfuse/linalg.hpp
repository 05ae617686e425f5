#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace blfuse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Bad input: wrong dimensions, non-symmetric or indefinite covariance,
/// out-of-range parameters. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation that could not be completed on valid-looking input
/// (singular system, optimizer failure). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double condition = 0.0)
        : std::runtime_error(what), condition_(condition) {}

    /// Condition-number estimate of the offending matrix, 0 when not applicable.
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

namespace linalg {

/// Largest |M(i,j) - M(j,i)|.
double max_asymmetry(const Mat& m);

Mat symmetrize(const Mat& m);

double min_eigenvalue(const Mat& sym);

/// Ratio of extreme eigenvalues of a symmetric matrix; +inf when the smallest
/// is not positive.
double spd_condition(const Mat& sym);

/// Solves A X = B for symmetric positive definite A. Throws NumericalError
/// when the Cholesky factorization fails.
Mat spd_solve(const Mat& a, const Mat& b, const char* context);
Vec spd_solve(const Mat& a, const Vec& b, const char* context);

Mat spd_inverse(const Mat& a, const char* context);

/// log det of an SPD matrix, nullopt if it is not positive definite.
std::optional<double> spd_log_det(const Mat& a);

void require_square(const Mat& m, const char* context, const char* name);
void require_same_size(Index a, Index b, const char* context);

}  // namespace linalg
}  // namespace blfuse
