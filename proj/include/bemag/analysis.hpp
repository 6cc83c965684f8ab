#pragma once

// Post-fit physics numbers: field uncertainty at the minimizing currents,
// zero-power extrapolation of light shift and power broadening, and the
// residual-field / field-gradient upper limits.

#include <vector>

#include "bemag/fieldfit.hpp"
#include "bemag/levels.hpp"
#include "bemag/types.hpp"

namespace bemag::analysis {

struct PowerPoint {
    double power_uw = 0.0;
    Uncertain center_mhz;
    Uncertain fwhm_khz;
};

// Light shift / broadening series: >= 3 entries at strictly positive,
// distinct powers.
using PowerSeries = std::vector<PowerPoint>;

// Field uncertainty with the currents set to the zero crossings:
// sqrt(sum_j (k_j * sigma(I_j0))^2), in Gauss.
double propagate_delta_b(const CoilCalibration& cal);

// Axial variant: sqrt((k_z * sigma(I_z0))^2 + sigma(B_perp)^2).
double propagate_delta_b(const fieldfit::AxialFitResult& axial);

struct PowerExtrapolation {
    Uncertain f_intercept_mhz;
    Uncertain shift_slope_mhz_per_uw;
    Uncertain width_intercept_khz;
    Uncertain width_slope_khz_per_uw;
    double chi2_reduced_center = 0.0;
    double chi2_reduced_width = 0.0;
    int n_points = 0;
};

// Two independent weighted straight-line fits (center and width against
// power), evaluated at zero power. Throws std::invalid_argument for fewer
// than 3 entries, non-positive or duplicate powers.
PowerExtrapolation extrapolate_power(const PowerSeries& series);

// (|f_intercept - f_reference| + sigma) / 1.4 MHz/G, the paper's
// discrepancy-plus-one-sigma construction.
double field_upper_limit(Uncertain f_intercept_mhz,
                         double f_reference_mhz = levels::hyperfine_freq_shiga_mhz);

struct GradientLimit {
    double field_spread_g = 0.0;     // across the ensemble
    double gradient_g_per_mm = 0.0;
};

// Attributes the narrowest observed linewidth entirely to a field spread
// across the ensemble. min_fwhm_khz > 0, ensemble_length_mm > 0.
GradientLimit gradient_upper_limit(double min_fwhm_khz, double ensemble_length_mm);

// Bundle for reporting, inputs echoed next to the derived limits.
struct UpperLimits {
    double discrepancy_khz = 0.0;
    double discrepancy_sigma_khz = 0.0;
    double min_fwhm_khz = 0.0;
    double ensemble_length_mm = 0.0;
    double scale_mhz_per_g = levels::zeeman_rate_mhz_per_g;
    double field_limit_g = 0.0;
    double gradient_spread_g = 0.0;
    double gradient_g_per_mm = 0.0;
};

UpperLimits upper_limits(double discrepancy_khz, double discrepancy_sigma_khz, double min_fwhm_khz,
                         double ensemble_length_mm);

}  // namespace bemag::analysis
