#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bemag/analysis.hpp"
#include "bemag/rng.hpp"
#include "test_helpers.hpp"

using namespace bemag;
using namespace bemag::analysis;

TEST_CASE("propagate_delta_b reproduces the published 0.041 G") {
    const auto cal = testing::published_calibration();
    const double db = propagate_delta_b(cal);
    // sqrt((0.362*0.042)^2 + (0.434*0.065)^2 + (3.586*0.007)^2)
    CHECK(db == doctest::Approx(0.040707199855).epsilon(1e-10));
    CHECK(std::abs(db - 0.041) <= 0.0005);
}

TEST_CASE("propagate_delta_b with exact zero crossings is zero") {
    auto cal = testing::published_calibration();
    for (auto& axis : cal.axes) axis.zero_current_a.sigma = 0.0;
    CHECK(propagate_delta_b(cal) == 0.0);
}

TEST_CASE("axial propagation reproduces the published 0.031 G") {
    fieldfit::AxialFitResult axial;
    axial.k_z_g_per_a = {3.753, 0.020};
    axial.i0_z_a = {-0.166, 0.001};
    axial.b_perp_g = {0.007, 0.031};
    const double db = propagate_delta_b(axial);
    // sqrt((3.753*0.001)^2 + 0.031^2)
    CHECK(db == doctest::Approx(0.031226351196).epsilon(1e-10));
    CHECK(std::abs(db - 0.031) <= 0.0005);
}

TEST_CASE("propagate_delta_b is homogeneous of degree one") {
    auto cal = testing::published_calibration();
    const double base = propagate_delta_b(cal);
    const double c = 3.7;
    for (auto& axis : cal.axes) axis.slope_g_per_a.value *= c;
    CHECK(propagate_delta_b(cal) == doctest::Approx(c * base).epsilon(1e-12));
}

namespace {

PowerSeries exact_series(double f0, double shift_slope, double w0, double width_slope,
                         std::initializer_list<double> powers) {
    PowerSeries s;
    for (double p : powers)
        s.push_back({p, {f0 + shift_slope * p, 0.0}, {w0 + width_slope * p, 0.0}});
    return s;
}

}  // namespace

TEST_CASE("extrapolate_power recovers a linear truth exactly") {
    const auto series = exact_series(1250.065, 0.006, 25.0, 2.5, {2, 5, 10, 20, 40, 70});
    const auto ex = extrapolate_power(series);
    CHECK(ex.f_intercept_mhz.value == doctest::Approx(1250.065).epsilon(1e-12));
    CHECK(ex.shift_slope_mhz_per_uw.value == doctest::Approx(0.006).epsilon(1e-12));
    CHECK(ex.width_intercept_khz.value == doctest::Approx(25.0).epsilon(1e-12));
    CHECK(ex.width_slope_khz_per_uw.value == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("extrapolate_power recovers the published intercept within 3 sigma") {
    rng::SplitMix64 gen(17);
    PowerSeries series;
    for (double p : {2.0, 5.0, 10.0, 20.0, 40.0, 70.0}) {
        // Paper-scale center errors, a few kHz to a few ten kHz.
        const double sc = 0.004 + 0.0002 * p;
        const double sw = 2.0 + 0.05 * p;
        series.push_back({p,
                          {1250.065 + 0.006 * p + sc * gen.gaussian(), sc},
                          {25.0 + 2.5 * p + sw * gen.gaussian(), sw}});
    }
    const auto ex = extrapolate_power(series);
    CHECK(std::abs(ex.f_intercept_mhz.value - 1250.065) < 3.0 * ex.f_intercept_mhz.sigma);
    CHECK(ex.f_intercept_mhz.sigma < 0.03);
    CHECK(std::abs(ex.width_intercept_khz.value - 25.0) < 3.0 * ex.width_intercept_khz.sigma);
}

TEST_CASE("extrapolate_power intercept is invariant under a slope-only change") {
    const auto base = exact_series(1250.065, 0.006, 25.0, 2.5, {2, 5, 10, 20, 40, 70});
    auto tilted = base;
    for (auto& e : tilted) e.center_mhz.value += 0.003 * e.power_uw;  // slope offset only
    const auto ex_base = extrapolate_power(base);
    const auto ex_tilted = extrapolate_power(tilted);
    CHECK(ex_tilted.f_intercept_mhz.value ==
          doctest::Approx(ex_base.f_intercept_mhz.value).epsilon(1e-12));
    CHECK(ex_tilted.shift_slope_mhz_per_uw.value ==
          doctest::Approx(ex_base.shift_slope_mhz_per_uw.value + 0.003).epsilon(1e-9));
}

TEST_CASE("extrapolate_power input validation") {
    PowerSeries two = {{1, {1250, 0.01}, {30, 1}}, {2, {1250.01, 0.01}, {32, 1}}};
    CHECK_THROWS_AS(extrapolate_power(two), std::invalid_argument);

    PowerSeries dup = {{5, {1250, 0.01}, {30, 1}},
                       {5, {1250.01, 0.01}, {32, 1}},
                       {6, {1250.02, 0.01}, {33, 1}}};
    CHECK_THROWS_AS(extrapolate_power(dup), std::invalid_argument);

    PowerSeries nonpos = {{0.0, {1250, 0.01}, {30, 1}},
                          {5, {1250.01, 0.01}, {32, 1}},
                          {6, {1250.02, 0.01}, {33, 1}}};
    CHECK_THROWS_AS(extrapolate_power(nonpos), std::invalid_argument);
}

TEST_CASE("field_upper_limit: the (47+13) kHz construction") {
    // Inputs quoted directly in kHz above the reference.
    CHECK(field_upper_limit({0.047, 0.013}, 0.0) == doctest::Approx(0.042857142857).epsilon(1e-10));
    CHECK(std::abs(field_upper_limit({0.047, 0.013}, 0.0) - 0.043) <= 0.0005);
    CHECK(field_upper_limit({1250.017674088, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(field_upper_limit({1251.417674088, 0.0}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(field_upper_limit({1250.0, -0.1}), std::invalid_argument);
}

TEST_CASE("gradient_upper_limit: the 40 kHz / 2 mm conversion") {
    const auto lim = gradient_upper_limit(40.0, 2.0);
    CHECK(lim.field_spread_g == doctest::Approx(0.028571428571).epsilon(1e-10));
    CHECK(std::abs(lim.field_spread_g - 0.029) <= 0.0005);
    CHECK(lim.gradient_g_per_mm == doctest::Approx(0.014285714286).epsilon(1e-10));

    CHECK(gradient_upper_limit(1400.0, 1.0).field_spread_g == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gradient_upper_limit(0.7, 2.0).field_spread_g == doctest::Approx(0.0005).epsilon(1e-12));
    CHECK_THROWS_AS(gradient_upper_limit(0.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(gradient_upper_limit(40.0, 0.0), std::invalid_argument);
}

TEST_CASE("upper_limits echoes its inputs") {
    const auto lim = upper_limits(47.0, 13.0, 40.0, 2.0);
    CHECK(lim.field_limit_g == doctest::Approx(0.042857142857).epsilon(1e-10));
    CHECK(lim.gradient_spread_g == doctest::Approx(0.028571428571).epsilon(1e-10));
    CHECK(lim.discrepancy_khz == 47.0);
    CHECK(lim.min_fwhm_khz == 40.0);
    CHECK(lim.scale_mhz_per_g == 1.4);
}
