#include "bemag/lsq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bemag::lsq {

namespace detail {

bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t m,
                    std::vector<double>& x) {
    // In-place lower Cholesky factor.
    for (std::size_t k = 0; k < m; ++k) {
        double d = a[k * m + k];
        for (std::size_t j = 0; j < k; ++j) d -= a[k * m + j] * a[k * m + j];
        if (!(d > 0.0)) return false;
        const double lkk = std::sqrt(d);
        a[k * m + k] = lkk;
        for (std::size_t i = k + 1; i < m; ++i) {
            double s = a[i * m + k];
            for (std::size_t j = 0; j < k; ++j) s -= a[i * m + j] * a[k * m + j];
            a[i * m + k] = s / lkk;
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < m; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= a[i * m + j] * b[j];
        b[i] = s / a[i * m + i];
    }
    for (std::size_t ii = m; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < m; ++j) s -= a[j * m + ii] * b[j];
        b[ii] = s / a[ii * m + ii];
    }
    x = std::move(b);
    return true;
}

void jacobi_eigen(std::vector<double> a, std::size_t m, std::vector<double>& values,
                  std::vector<double>& vectors) {
    vectors.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) vectors[i * m + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < m; ++p)
            for (std::size_t q = p + 1; q < m; ++q) off += a[p * m + q] * a[p * m + q];
        if (off < 1e-30) break;

        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                const double apq = a[p * m + q];
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < m; ++k) {
                    const double akp = a[k * m + p];
                    const double akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < m; ++k) {
                    const double apk = a[p * m + k];
                    const double aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < m; ++k) {
                    const double vkp = vectors[k * m + p];
                    const double vkq = vectors[k * m + q];
                    vectors[k * m + p] = c * vkp - s * vkq;
                    vectors[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    values.resize(m);
    for (std::size_t i = 0; i < m; ++i) values[i] = a[i * m + i];
}

bool invert_sym(const std::vector<double>& a, std::size_t m, std::vector<double>& inverse,
                double tol) {
    std::vector<double> values, vectors;
    jacobi_eigen(a, m, values, vectors);
    const double max_eig = *std::max_element(values.begin(), values.end());
    if (!(max_eig > 0.0)) return false;
    for (double v : values)
        if (v < tol * max_eig) return false;

    inverse.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                s += vectors[i * m + k] * vectors[j * m + k] / values[k];
            inverse[i * m + j] = inverse[j * m + i] = s;
        }
    return true;
}

}  // namespace detail

namespace {

double chi2_of(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

// Parameters whose data leverage vanishes: directions of (J^T J) with
// relative eigenvalue below tol, reported as the dominant components of the
// near-null eigenvectors.
std::vector<int> null_space_params(const std::vector<double>& normal, std::size_t m,
                                   double tol = 1e-12) {
    std::vector<double> values, vectors;
    detail::jacobi_eigen(normal, m, values, vectors);
    const double max_eig = std::max(*std::max_element(values.begin(), values.end()), 0.0);

    std::vector<int> bad;
    for (std::size_t k = 0; k < m; ++k) {
        if (values[k] > tol * std::max(max_eig, 1e-300)) continue;
        double vmax = 0.0;
        for (std::size_t i = 0; i < m; ++i) vmax = std::max(vmax, std::abs(vectors[i * m + k]));
        for (std::size_t i = 0; i < m; ++i)
            if (std::abs(vectors[i * m + k]) > 0.3 * vmax &&
                std::find(bad.begin(), bad.end(), static_cast<int>(i)) == bad.end())
                bad.push_back(static_cast<int>(i));
    }
    std::sort(bad.begin(), bad.end());
    return bad;
}

}  // namespace

Result fit(const ResidualFn& residuals, const JacobianFn& jacobian, std::vector<double> start,
           std::size_t n_residuals, const Options& options) {
    const std::size_t m = start.size();
    const std::size_t n = n_residuals;

    Result result;
    result.params = start;
    if (m == 0) throw std::invalid_argument("lsq::fit: empty parameter vector");
    if (n < m) throw std::invalid_argument("lsq::fit: fewer residuals than parameters");

    std::vector<double> r(n), r_try(n), jac(n * m);
    std::vector<double> normal(m * m), grad(m), step(m), p_try(m);

    residuals(result.params, r);
    double chi2 = chi2_of(r);
    result.chi2_trace.push_back(chi2);

    double lambda = options.initial_lambda;
    auto build_normal = [&]() {
        jacobian(result.params, jac);
        std::fill(normal.begin(), normal.end(), 0.0);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                grad[j] += jac[i * m + j] * r[i];
                for (std::size_t k = j; k < m; ++k)
                    normal[j * m + k] += jac[i * m + j] * jac[i * m + k];
            }
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < j; ++k) normal[j * m + k] = normal[k * m + j];
    };

    auto flag_rank_deficiency = [&]() {
        result.rank_deficient = true;
        result.deficient_params = null_space_params(normal, m);
        result.converged = false;
        result.message = "rank-deficient normal equations";
    };

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        build_normal();

        // Zero diagonal = parameter with no effect on any residual.
        double max_diag = 0.0;
        for (std::size_t j = 0; j < m; ++j) max_diag = std::max(max_diag, normal[j * m + j]);
        if (!(max_diag > 0.0)) {
            flag_rank_deficiency();
            result.message = "all parameters have zero data leverage";
            break;
        }
        bool dead_column = false;
        for (std::size_t j = 0; j < m; ++j)
            if (normal[j * m + j] < 1e-14 * max_diag) dead_column = true;
        if (dead_column) {
            flag_rank_deficiency();
            break;
        }

        bool accepted = false;
        while (lambda <= options.max_lambda) {
            std::vector<double> damped = normal;
            for (std::size_t j = 0; j < m; ++j) damped[j * m + j] *= (1.0 + lambda);

            std::vector<double> neg_grad(m);
            for (std::size_t j = 0; j < m; ++j) neg_grad[j] = -grad[j];

            if (!detail::cholesky_solve(std::move(damped), std::move(neg_grad), m, step)) {
                lambda *= options.lambda_up;
                continue;
            }
            for (std::size_t j = 0; j < m; ++j) p_try[j] = result.params[j] + step[j];

            residuals(p_try, r_try);
            const double chi2_try = chi2_of(r_try);
            if (std::isfinite(chi2_try) && chi2_try <= chi2) {
                const double gain = chi2 - chi2_try;
                result.params = p_try;
                r = r_try;
                chi2 = chi2_try;
                result.chi2_trace.push_back(chi2);
                lambda = std::max(lambda / options.lambda_down, 1e-12);
                accepted = true;
                if (gain <= options.ftol * std::max(chi2, 1e-30)) {
                    result.converged = true;
                    result.message = "converged: objective stationary";
                }
                break;
            }
            lambda *= options.lambda_up;
        }

        if (!accepted) {
            // Damping exhausted. A tiny gradient means we are already at a
            // minimum; anything else is a genuine failure.
            double gnorm = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                gnorm = std::max(gnorm, std::abs(grad[j]) / std::sqrt(max_diag));
            if (gnorm < 1e-8 * std::max(1.0, std::sqrt(chi2))) {
                result.converged = true;
                result.message = "converged: gradient negligible";
            } else {
                result.converged = false;
                result.message = "no further reduction possible (damping exhausted)";
            }
            break;
        }
        if (result.converged) break;
    }

    result.n_iterations = iter + 1;
    if (!result.converged && !result.rank_deficient && result.message.empty())
        result.message = "iteration cap reached";

    result.chi2 = chi2;
    result.chi2_reduced = n > m ? chi2 / static_cast<double>(n - m) : chi2;

    if (!result.rank_deficient) {
        build_normal();
        std::vector<double> cov;
        if (detail::invert_sym(normal, m, cov)) {
            result.covariance = std::move(cov);
        } else {
            flag_rank_deficiency();
        }
    }
    return result;
}

LinearFitResult linear_fit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> sigma) {
    const std::size_t n = x.size();
    if (n != y.size() || (!sigma.empty() && sigma.size() != n))
        throw std::invalid_argument("linear_fit: input length mismatch");
    if (n < 3) throw std::invalid_argument("linear_fit: need at least 3 points");

    const bool weighted = !sigma.empty();
    double sw = 0.0, swx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        if (weighted) {
            if (!(sigma[i] > 0.0)) throw std::invalid_argument("linear_fit: sigma must be > 0");
            w = 1.0 / (sigma[i] * sigma[i]);
        }
        sw += w;
        swx += w * x[i];
    }
    const double xbar = swx / sw;

    // Centered normal equations: intercept' and slope decouple.
    double sxx = 0.0, sxy = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
        const double dx = x[i] - xbar;
        sxx += w * dx * dx;
        sxy += w * dx * y[i];
        sy += w * y[i];
    }
    if (!(sxx > 1e-14 * sw * std::max(xbar * xbar, 1.0)))
        throw std::invalid_argument("linear_fit: degenerate abscissas (all x equal)");

    const double slope = sxy / sxx;
    const double mean = sy / sw;
    const double intercept = mean - slope * xbar;

    double chi2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weighted ? 1.0 / (sigma[i] * sigma[i]) : 1.0;
        const double resid = y[i] - intercept - slope * x[i];
        chi2 += w * resid * resid;
    }
    const double chi2_red = chi2 / static_cast<double>(n - 2);

    double var_mean = 1.0 / sw;
    double var_slope = 1.0 / sxx;
    if (!weighted) {
        // No per-point errors: calibrate from the scatter.
        var_mean *= chi2_red;
        var_slope *= chi2_red;
    }
    const double var_intercept = var_mean + xbar * xbar * var_slope;

    LinearFitResult out;
    out.intercept = {intercept, std::sqrt(var_intercept)};
    out.slope = {slope, std::sqrt(var_slope)};
    out.chi2_reduced = chi2_red;
    out.n_points = static_cast<int>(n);
    return out;
}

}  // namespace bemag::lsq
