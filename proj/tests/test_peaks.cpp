#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "bemag/peaks.hpp"
#include "bemag/rng.hpp"
#include "bemag/synth.hpp"
#include "test_helpers.hpp"

using namespace bemag;
using namespace bemag::peaks;

namespace {

std::vector<double> make_grid(double start, double stop, double step) {
    std::vector<double> g;
    for (double f = start; f <= stop + 1e-12; f += step) g.push_back(f);
    return g;
}

synth::Scan grid_scan(std::vector<double> f, std::vector<double> y) {
    synth::Scan scan;
    scan.f_mod_mhz = std::move(f);
    scan.signal = std::move(y);
    return scan;
}

PeakFit fake_peak(double center) {
    PeakFit f;
    f.center_mhz = {center, 0.001};
    f.fwhm_khz = {100.0, 5.0};
    f.amplitude = {1.0, 0.05};
    return f;
}

}  // namespace

TEST_CASE("detect_peaks: noiseless single Lorentzian is recovered sharply") {
    auto env = testing::published_environment();
    env.ambient_field_g = {0, 0, 0};
    synth::BeamConfig beam;
    beam.power_uw = 30.0;  // FWHM 100 kHz
    const double center = beam.f_zero_power_mhz + beam.lightshift_mhz_per_uw * 30.0;

    const auto scan = synth::simulate_scan(env, beam, {0.985, 1.681, -0.145},
                                           make_grid(center - 1.2, center + 1.2, 0.01), 1,
                                           synth::noiseless);
    const auto fits = detect_peaks(scan, 0.2, 7);
    REQUIRE(fits.size() == 1);
    CHECK(std::abs(fits[0].center_mhz.value - center) < 0.001);      // within 1 kHz
    CHECK(std::abs(fits[0].fwhm_khz.value - 100.0) < 1.0);           // within 1%
    CHECK(fits[0].amplitude.value == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("detect_peaks: noiseless 7-peak spectrum matches the forward model") {
    auto env = testing::published_environment();
    synth::BeamConfig beam;
    const Currents cur{-5.74, 1.70, 0.14};
    const auto model = synth::spectrum_model(env, beam, cur);

    const auto scan = synth::simulate_scan(
        env, beam, cur, make_grid(model.back().center_mhz - 2.0, model.front().center_mhz + 2.0, 0.01),
        1, synth::noiseless);
    const auto fits = detect_peaks(scan, 0.2, 7);
    REQUIRE(fits.size() == 7);

    // model lines are sorted by descending frequency, fits ascending
    for (int i = 0; i < 7; ++i) {
        CHECK(std::abs(fits[i].center_mhz.value - model[6 - i].center_mhz) < 0.002);
        CHECK(std::abs(fits[i].fwhm_khz.value - model[6 - i].fwhm_khz) <
              0.01 * model[6 - i].fwhm_khz);
    }
}

TEST_CASE("detect_peaks: flat scan yields an empty list") {
    const auto scan = grid_scan(make_grid(1249, 1251, 0.02),
                                std::vector<double>(make_grid(1249, 1251, 0.02).size(), 0.0));
    CHECK(detect_peaks(scan, 0.1, 7).empty());
}

TEST_CASE("detect_peaks input validation") {
    const auto small = grid_scan({1250.0, 1250.1, 1250.2, 1250.3}, {0, 1, 0, 0});
    CHECK_THROWS_AS(detect_peaks(small, 0.1, 7), std::invalid_argument);

    const auto ok = grid_scan({1250.0, 1250.1, 1250.2, 1250.3, 1250.4}, {0, 1, 0, 0, 0});
    CHECK_THROWS_AS(detect_peaks(ok, 0.0, 7), std::invalid_argument);
    CHECK_THROWS_AS(detect_peaks(ok, 0.1, 0), std::invalid_argument);
    CHECK_THROWS_AS(detect_peaks(ok, 0.1, 8), std::invalid_argument);
}

TEST_CASE("detect_peaks: merged candidates collapse onto the stronger one") {
    // Two Lorentzians a third of a linewidth apart form a single resonance.
    const auto grid = make_grid(1249.0, 1251.0, 0.005);
    std::vector<double> y;
    for (double f : grid)
        y.push_back(synth::line_profile(1250.0, 150.0, 1.0, f) +
                    synth::line_profile(1250.05, 150.0, 0.6, f));
    const auto fits = detect_peaks(grid_scan(grid, y), 0.15, 7);
    REQUIRE(fits.size() == 1);
    // The stronger candidate survives.
    CHECK(std::abs(fits[0].center_mhz.value - 1250.0) < 0.05);
}

TEST_CASE("assign_labels: seven equally spaced peaks get the full ladder") {
    std::vector<PeakFit> fits;
    for (int i = 0; i < 7; ++i) fits.push_back(fake_peak(1248.0 + 0.9 * i));
    const auto out = assign_labels(fits, levels::LineSelection::all);
    REQUIRE_FALSE(out.ambiguous);
    const levels::PeakLabel expect[] = {levels::PeakLabel::L3, levels::PeakLabel::L2,
                                        levels::PeakLabel::L1, levels::PeakLabel::C,
                                        levels::PeakLabel::H1, levels::PeakLabel::H2,
                                        levels::PeakLabel::H3};
    for (int i = 0; i < 7; ++i) {
        REQUIRE(out.peaks[i].label.has_value());
        CHECK(*out.peaks[i].label == expect[i]);
    }
}

TEST_CASE("assign_labels: single sigma-mode peak carries the Eq.-(2) component") {
    const auto minus =
        assign_labels({fake_peak(1251.0)}, levels::LineSelection::sigma_minus_only);
    REQUIRE_FALSE(minus.ambiguous);
    REQUIRE(minus.peaks[0].label.has_value());
    CHECK(*minus.peaks[0].label == levels::PeakLabel::H2);  // eta = +1
    CHECK(levels::eta_of(*minus.peaks[0].label) == doctest::Approx(1.0));

    const auto plus = assign_labels({fake_peak(1249.0)}, levels::LineSelection::sigma_plus_only);
    REQUIRE(plus.peaks[0].label.has_value());
    CHECK(levels::eta_of(*plus.peaks[0].label) == doctest::Approx(-1.0));
}

TEST_CASE("assign_labels: four peaks map onto the missing-L-side pattern") {
    std::vector<PeakFit> fits;
    for (int i = 0; i < 4; ++i) fits.push_back(fake_peak(1250.0 + 0.8 * i));
    const auto out = assign_labels(fits, levels::LineSelection::all);
    REQUIRE_FALSE(out.ambiguous);
    CHECK(*out.peaks[0].label == levels::PeakLabel::C);
    CHECK(*out.peaks[1].label == levels::PeakLabel::H1);
    CHECK(*out.peaks[2].label == levels::PeakLabel::H2);
    CHECK(*out.peaks[3].label == levels::PeakLabel::H3);
}

TEST_CASE("assign_labels: shorter odd runs center on C") {
    std::vector<PeakFit> five;
    for (int i = 0; i < 5; ++i) five.push_back(fake_peak(1250.0 + 0.5 * i));
    const auto out5 = assign_labels(five, levels::LineSelection::all);
    REQUIRE_FALSE(out5.ambiguous);
    CHECK(*out5.peaks[0].label == levels::PeakLabel::L2);
    CHECK(*out5.peaks[2].label == levels::PeakLabel::C);
    CHECK(*out5.peaks[4].label == levels::PeakLabel::H2);

    std::vector<PeakFit> three;
    for (int i = 0; i < 3; ++i) three.push_back(fake_peak(1250.0 + 0.5 * i));
    const auto out3 = assign_labels(three, levels::LineSelection::all);
    REQUIRE_FALSE(out3.ambiguous);
    CHECK(*out3.peaks[1].label == levels::PeakLabel::C);
}

TEST_CASE("assign_labels: ambiguity cases set the flag and leave labels empty") {
    // Inconsistent spacing.
    std::vector<PeakFit> uneven = {fake_peak(1250.0), fake_peak(1250.5), fake_peak(1251.6),
                                   fake_peak(1252.0)};
    const auto out = assign_labels(uneven, levels::LineSelection::all);
    CHECK(out.ambiguous);
    for (const auto& p : out.peaks) CHECK_FALSE(p.label.has_value());

    // Even counts other than 4.
    std::vector<PeakFit> six;
    for (int i = 0; i < 6; ++i) six.push_back(fake_peak(1250.0 + 0.5 * i));
    CHECK(assign_labels(six, levels::LineSelection::all).ambiguous);

    // Several peaks in a single-line mode.
    std::vector<PeakFit> two = {fake_peak(1250.0), fake_peak(1251.0)};
    CHECK(assign_labels(two, levels::LineSelection::sigma_minus_only).ambiguous);

    // Unsorted input is a caller bug.
    std::vector<PeakFit> unsorted = {fake_peak(1251.0), fake_peak(1250.0)};
    CHECK_THROWS_AS(assign_labels(unsorted, levels::LineSelection::all), std::invalid_argument);
}

TEST_CASE("assign_labels is stable under input permutation plus re-sort") {
    std::vector<PeakFit> fits;
    for (int i = 0; i < 7; ++i) fits.push_back(fake_peak(1248.0 + 0.9 * i));
    const auto ref = assign_labels(fits, levels::LineSelection::all);

    std::mt19937 shuffler(99);
    for (int trial = 0; trial < 5; ++trial) {
        auto shuffled = fits;
        std::shuffle(shuffled.begin(), shuffled.end(), shuffler);
        std::sort(shuffled.begin(), shuffled.end(), [](const PeakFit& a, const PeakFit& b) {
            return a.center_mhz.value < b.center_mhz.value;
        });
        const auto out = assign_labels(shuffled, levels::LineSelection::all);
        REQUIRE(out.peaks.size() == ref.peaks.size());
        for (std::size_t i = 0; i < out.peaks.size(); ++i)
            CHECK(*out.peaks[i].label == *ref.peaks[i].label);
    }
}

TEST_CASE("round trip: detect+assign recovers generated peaks within 3 sigma") {
    auto env = testing::published_environment();
    rng::SplitMix64 gen(2024);

    const int trials = 40;
    int good_trials = 0;
    for (int trial = 0; trial < trials; ++trial) {
        // Random field in the resolvable band, random beam power.
        const double mag = 0.5 + 2.5 * gen.next_double();
        const double u = 2.0 * gen.next_double() - 1.0;
        const double phi = 6.283185307179586 * gen.next_double();
        const double s = std::sqrt(1.0 - u * u);
        env.ambient_field_g = {mag * s * std::cos(phi), mag * s * std::sin(phi), mag * u};

        synth::BeamConfig beam;
        beam.power_uw = 5.0 + 65.0 * gen.next_double();

        const Currents cur{0.985, 1.681, -0.145};  // coil contribution nulled
        const auto model = synth::spectrum_model(env, beam, cur);
        const double step = std::max(0.004, model.front().fwhm_khz * 1e-3 / 8.0);
        const auto grid = make_grid(model.back().center_mhz - 1.5,
                                    model.front().center_mhz + 1.5, step);
        const auto scan = synth::simulate_scan(env, beam, cur, grid, gen.next_u64(), 2000.0);

        const auto assigned =
            assign_labels(detect_peaks(scan, 0.25, 7), levels::LineSelection::all);
        if (assigned.ambiguous || assigned.peaks.size() != model.size()) continue;

        bool all_within = true;
        for (std::size_t i = 0; i < assigned.peaks.size(); ++i) {
            const auto& fit = assigned.peaks[i];
            const auto& truth = model[model.size() - 1 - i];
            if (!fit.label || *fit.label != truth.label) all_within = false;
            const double tol = 3.0 * std::max(fit.center_mhz.sigma, 1e-4);
            if (std::abs(fit.center_mhz.value - truth.center_mhz) > tol) all_within = false;
        }
        if (all_within) ++good_trials;
    }
    CHECK(good_trials >= static_cast<int>(0.95 * trials));
}
