#pragma once

// Damped (Levenberg-Marquardt) nonlinear least squares with analytic
// Jacobians, plus the weighted linear fit used for the zero-power
// extrapolations. Small dense problems only (a handful of parameters);
// everything is plain row-major double storage.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bemag/types.hpp"

namespace bemag::lsq {

struct Options {
    int max_iterations = 200;
    double ftol = 1e-10;          // relative tolerance on the objective
    double initial_lambda = 1e-3;
    double lambda_up = 8.0;
    double lambda_down = 4.0;
    double max_lambda = 1e14;
};

struct Result {
    std::vector<double> params;
    std::vector<double> covariance;  // m x m row-major, empty when rank-deficient
    double chi2 = 0.0;
    double chi2_reduced = 0.0;
    int n_iterations = 0;
    bool converged = false;
    bool rank_deficient = false;
    std::vector<int> deficient_params;  // indices with no leverage on the data
    std::string message;
    std::vector<double> chi2_trace;  // objective after every accepted step
};

// Residual vector r(p) (length fixed at n_residuals) and its Jacobian
// J[i*m + j] = d r_i / d p_j. Residuals are expected pre-weighted (r_i
// divided by sigma_i) when a weighted fit is wanted; the covariance is then
// the plain (J^T J)^-1 at the optimum.
using ResidualFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;
using JacobianFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

Result fit(const ResidualFn& residuals, const JacobianFn& jacobian, std::vector<double> start,
           std::size_t n_residuals, const Options& options = {});

struct LinearFitResult {
    Uncertain intercept;
    Uncertain slope;
    double chi2_reduced = 0.0;
    int n_points = 0;
};

// Weighted straight-line fit y = intercept + slope*x. sigma may be empty:
// the fit is then unweighted and the parameter variances are scaled by the
// residual variance. Throws std::invalid_argument for fewer than 3 points
// or degenerate abscissas (all x equal).
LinearFitResult linear_fit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> sigma = {});

namespace detail {

// Cholesky solve of the SPD system a*x = b (a is m x m row-major, consumed
// by value). Returns false if a is not positive definite.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t m,
                    std::vector<double>& x);

// Cyclic Jacobi eigendecomposition of a symmetric matrix. eigenvectors are
// returned column-wise: vecs[r*m + c] is component r of eigenvector c.
void jacobi_eigen(std::vector<double> a, std::size_t m, std::vector<double>& values,
                  std::vector<double>& vectors);

// Symmetric inverse via the eigendecomposition. Returns false when the
// relative condition exceeds 1/tol.
bool invert_sym(const std::vector<double>& a, std::size_t m, std::vector<double>& inverse,
                double tol = 1e-13);

}  // namespace detail

}  // namespace bemag::lsq
