#pragma once

// Closed-loop emulation of the iterative field minimization: sweep one coil
// current, measure the Zeeman splitting of simulated scans, move that coil
// to the fitted minimum, rotate through the axes, repeat with reduced sweep
// span and beam power. The loop only sees scans; the environment truth is
// used exclusively inside the simulator.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bemag/synth.hpp"
#include "bemag/types.hpp"

namespace bemag::minimize {

enum class SplittingMetric {
    max_peak_spread,     // highest minus lowest detected peak center, MHz
    fitted_b_magnitude,  // spread converted to Gauss via the labeled eta span
};

struct MinimizeConfig {
    std::array<Axis, 3> axis_order{Axis::X, Axis::Y, Axis::Z};
    int sweep_points = 9;
    // Per-axis total sweep width in Ampere, halved every round. A scalar
    // span cannot serve coils whose constants differ by an order of
    // magnitude, so this is a vector (indexed by Axis).
    std::array<double, 3> sweep_span_a{20.0, 18.0, 2.2};
    int rounds = 2;
    std::vector<double> power_schedule{70.0, 6.0};  // one entry per round, uW
    // The eta-normalized metric is robust against outer components leaving
    // the scan window, so it is the default.
    SplittingMetric metric = SplittingMetric::fitted_b_magnitude;

    Currents start_currents_a{};
    synth::BeamConfig beam;  // power is overridden by the schedule per round

    // Scan construction and detection knobs.
    double counts_per_point = 2000.0;
    double grid_step_mhz = 0.03;
    double window_margin_mhz = 1.0;
    double initial_field_bound_g = 3.5;  // assumed |B| bound before the first scan
    // Worst-case coil response assumed until an axis has been fitted once;
    // sets how far scan windows open while sweeping an unknown coil.
    double coil_slope_bound_g_per_a = 4.0;
    double min_prominence = 0.2;
};

struct SweepSample {
    double current_a = 0.0;
    double metric = 0.0;  // MHz for max_peak_spread, G for fitted_b_magnitude
    double sigma = 0.0;
    int n_peaks = 0;
    bool used = false;  // dropped points (no detectable peaks) stay recorded
};

struct MinimizeStep {
    Axis axis = Axis::X;
    int round = 0;
    Currents currents_before{};
    std::vector<SweepSample> samples;
    double chosen_current_a = 0.0;  // clamped into the swept interval
    Uncertain splitting_at_min;     // hyperbola floor, metric units
    Uncertain field_at_min_g;       // floor converted to Gauss
    bool ok = false;
    std::string message;
};

struct MinimizeTrace {
    std::vector<MinimizeStep> steps;
    std::vector<double> round_field_estimate_g;  // after each completed round
    Currents final_currents_a{};
    Uncertain final_field_g;
    bool ok = false;
    std::string message;
};

// Runs the full procedure against a simulated environment. Deterministic in
// (env, cfg, seed). Aborts with ok = false on the first failed step (more
// than half the sweep points without detectable peaks, or an unusable
// minimum fit), carrying the diagnostic in the trace.
MinimizeTrace run_minimization(const synth::Environment& env, const MinimizeConfig& cfg,
                               std::uint64_t seed);

}  // namespace bemag::minimize
