#include "bemag/analysis.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "bemag/lsq.hpp"

namespace bemag::analysis {

namespace {
constexpr double rate = levels::zeeman_rate_mhz_per_g;
}

double propagate_delta_b(const CoilCalibration& cal) {
    double sq = 0.0;
    for (const auto& axis : cal.axes) {
        const double term = axis.slope_g_per_a.value * axis.zero_current_a.sigma;
        sq += term * term;
    }
    return std::sqrt(sq);
}

double propagate_delta_b(const fieldfit::AxialFitResult& axial) {
    const double axial_term = axial.k_z_g_per_a.value * axial.i0_z_a.sigma;
    return std::sqrt(axial_term * axial_term + axial.b_perp_g.sigma * axial.b_perp_g.sigma);
}

PowerExtrapolation extrapolate_power(const PowerSeries& series) {
    if (series.size() < 3)
        throw std::invalid_argument("extrapolate_power: need at least 3 entries");
    std::set<double> distinct;
    for (const auto& e : series) {
        if (!(e.power_uw > 0.0))
            throw std::invalid_argument("extrapolate_power: powers must be positive");
        distinct.insert(e.power_uw);
    }
    if (distinct.size() != series.size())
        throw std::invalid_argument("extrapolate_power: powers must be distinct");

    std::vector<double> p, c, cs, w, ws;
    bool have_center_sigma = true, have_width_sigma = true;
    for (const auto& e : series) {
        p.push_back(e.power_uw);
        c.push_back(e.center_mhz.value);
        w.push_back(e.fwhm_khz.value);
        cs.push_back(e.center_mhz.sigma);
        ws.push_back(e.fwhm_khz.sigma);
        if (!(e.center_mhz.sigma > 0.0)) have_center_sigma = false;
        if (!(e.fwhm_khz.sigma > 0.0)) have_width_sigma = false;
    }

    const auto center_fit =
        lsq::linear_fit(p, c, have_center_sigma ? std::span<const double>(cs) : std::span<const double>{});
    const auto width_fit =
        lsq::linear_fit(p, w, have_width_sigma ? std::span<const double>(ws) : std::span<const double>{});

    PowerExtrapolation out;
    out.f_intercept_mhz = center_fit.intercept;
    out.shift_slope_mhz_per_uw = center_fit.slope;
    out.width_intercept_khz = width_fit.intercept;
    out.width_slope_khz_per_uw = width_fit.slope;
    out.chi2_reduced_center = center_fit.chi2_reduced;
    out.chi2_reduced_width = width_fit.chi2_reduced;
    out.n_points = static_cast<int>(series.size());
    return out;
}

double field_upper_limit(Uncertain f_intercept_mhz, double f_reference_mhz) {
    if (f_intercept_mhz.sigma < 0.0)
        throw std::invalid_argument("field_upper_limit: sigma must be >= 0");
    return (std::abs(f_intercept_mhz.value - f_reference_mhz) + f_intercept_mhz.sigma) / rate;
}

GradientLimit gradient_upper_limit(double min_fwhm_khz, double ensemble_length_mm) {
    if (!(min_fwhm_khz > 0.0) || !(ensemble_length_mm > 0.0))
        throw std::invalid_argument("gradient_upper_limit: inputs must be positive");
    GradientLimit out;
    out.field_spread_g = (min_fwhm_khz * 1e-3) / rate;
    out.gradient_g_per_mm = out.field_spread_g / ensemble_length_mm;
    return out;
}

UpperLimits upper_limits(double discrepancy_khz, double discrepancy_sigma_khz, double min_fwhm_khz,
                         double ensemble_length_mm) {
    UpperLimits out;
    out.discrepancy_khz = discrepancy_khz;
    out.discrepancy_sigma_khz = discrepancy_sigma_khz;
    out.min_fwhm_khz = min_fwhm_khz;
    out.ensemble_length_mm = ensemble_length_mm;
    out.field_limit_g =
        field_upper_limit({discrepancy_khz * 1e-3, discrepancy_sigma_khz * 1e-3}, 0.0);
    const auto grad = gradient_upper_limit(min_fwhm_khz, ensemble_length_mm);
    out.gradient_spread_g = grad.field_spread_g;
    out.gradient_g_per_mm = grad.gradient_g_per_mm;
    return out;
}

}  // namespace bemag::analysis
