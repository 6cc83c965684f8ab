#include "bemag/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bemag/lsq.hpp"
#include "bemag/peaks.hpp"
#include "bemag/rng.hpp"

namespace bemag::minimize {

namespace {

constexpr double rate = levels::zeeman_rate_mhz_per_g;
// Full eta span of the resolved spectrum (H3 minus L3).
constexpr double eta_span = 3.0;

double& axis_current(Currents& c, Axis a) {
    switch (a) {
    case Axis::X: return c.x;
    case Axis::Y: return c.y;
    default: return c.z;
    }
}

struct Splitting {
    double metric = 0.0;
    double sigma = 0.0;
    int n_peaks = 0;
    bool defined = false;
};

// One measurement: simulate, detect, reduce to a splitting number. Widens
// the frequency window when the spectrum does not fit into it.
struct Measurer {
    const synth::Environment& env;
    const MinimizeConfig& cfg;
    synth::BeamConfig beam;
    rng::SplitMix64& seeds;
    // Expected |B| at this sweep point: residual bound plus the swing the
    // coil itself applies (worst-case prior until the axis has been fitted).
    double expected_field_g;

    Splitting measure(const Currents& currents) {
        const double center = beam.f_zero_power_mhz + beam.lightshift_mhz_per_uw * beam.power_uw;
        double half = rate * eta_span / 2.0 * expected_field_g + cfg.window_margin_mhz;

        // The expected linewidth sets the sampling; anything coarser than a
        // quarter linewidth lets peaks fall between grid points.
        const double fwhm_mhz =
            (beam.base_linewidth_khz + beam.broadening_khz_per_uw * beam.power_uw) * 1e-3;
        const double step = std::min(cfg.grid_step_mhz, fwhm_mhz / 4.0);

        // Counting noise on the normalized signal is ~sqrt(2/N); keep the
        // prominence threshold a safe factor above it.
        const double prominence =
            std::max(cfg.min_prominence, 5.0 * std::sqrt(2.0 / cfg.counts_per_point));

        for (int attempt = 0; attempt < 4; ++attempt) {
            std::vector<double> grid;
            const int n = std::max(5, static_cast<int>(std::ceil(2.0 * half / step)));
            grid.reserve(n + 1);
            for (int i = 0; i <= n; ++i)
                grid.push_back(center - half + 2.0 * half * i / n);

            const auto scan = synth::simulate_scan(env, beam, currents, std::move(grid),
                                                   seeds.next_u64(), cfg.counts_per_point);
            auto fits = peaks::detect_peaks(scan, prominence, 7);

            const bool near_edge =
                !fits.empty() &&
                (fits.front().center_mhz.value - scan.f_mod_mhz.front() <
                     3e-3 * fits.front().fwhm_khz.value ||
                 scan.f_mod_mhz.back() - fits.back().center_mhz.value <
                     3e-3 * fits.back().fwhm_khz.value);
            if ((fits.empty() || near_edge) && attempt < 3) {
                half *= 2.0;
                continue;
            }
            if (fits.empty()) return {};

            return reduce(fits);
        }
        return {};
    }

    Splitting reduce(const std::vector<peaks::PeakFit>& fits) {
        Splitting s;
        s.n_peaks = static_cast<int>(fits.size());
        s.defined = true;

        double spread = 0.0, spread_sigma = 0.0;
        if (fits.size() >= 2) {
            spread = fits.back().center_mhz.value - fits.front().center_mhz.value;
            spread_sigma = std::hypot(fits.back().center_mhz.sigma, fits.front().center_mhz.sigma);
        } else {
            // The window covers the worst-case pattern, so a single peak is
            // a genuinely merged resonance; splitting below about half a
            // linewidth is invisible, which sets the uncertainty of the zero.
            spread = 0.0;
            spread_sigma = 0.5 * fits.front().fwhm_khz.value * 1e-3;
        }
        spread_sigma = std::max(spread_sigma, 0.25 * cfg.grid_step_mhz);

        if (cfg.metric == SplittingMetric::max_peak_spread) {
            // Window truncation can hide outer components, kinking the raw
            // spread; a proportional error floor keeps such points from
            // dominating the minimum fit.
            s.metric = spread;
            s.sigma = std::max(spread_sigma, 0.02 * spread);
            return s;
        }

        // fitted_b_magnitude: convert via the labeled eta span. A pattern
        // that does not identify itself has no usable field scale, so the
        // point counts as undefined and is dropped.
        auto assigned = peaks::assign_labels(fits, beam.polarization_mode);
        if (fits.size() >= 2) {
            if (assigned.ambiguous || !assigned.peaks.back().label ||
                !assigned.peaks.front().label)
                return {};
            const double span = levels::eta_of(*assigned.peaks.back().label) -
                                levels::eta_of(*assigned.peaks.front().label);
            if (span < 0.5) return {};
            s.metric = spread / (rate * span);
            s.sigma = spread_sigma / (rate * span);
            return s;
        }
        s.metric = 0.0;
        s.sigma = spread_sigma / (rate * eta_span);
        return s;
    }
};

// Hyperbola fit m(I) = sqrt(a^2 (I - I0)^2 + q): the splitting observable
// is proportional to |B|, conical through zero, so a parabola would bias the
// minimum. The floor is fitted as q = b^2; the root parametrization loses
// its Jacobian column exactly when the cone closes (b -> 0).
struct VeeFit {
    double slope = 0.0;       // |a|
    double center = 0.0;      // I0
    Uncertain floor;          // sqrt(max(q,0))
    double center_sigma = 0.0;
    bool ok = false;
    std::string message;
};

VeeFit fit_vee(const std::vector<SweepSample>& samples) {
    std::vector<const SweepSample*> used;
    for (const auto& s : samples)
        if (s.used) used.push_back(&s);

    VeeFit out;
    if (used.size() < 4) {
        out.message = "too few usable sweep points for the minimum fit";
        return out;
    }

    const auto* best = *std::min_element(used.begin(), used.end(),
                                         [](auto* a, auto* b) { return a->metric < b->metric; });
    const auto* lo = used.front();
    const auto* hi = used.back();
    double slope0 = 0.0;
    if (hi->current_a > best->current_a)
        slope0 = (hi->metric - best->metric) / (hi->current_a - best->current_a);
    if (lo->current_a < best->current_a)
        slope0 = std::max(slope0, (lo->metric - best->metric) / (best->current_a - lo->current_a));
    slope0 = std::max(slope0, 1e-3);

    const double floor0 = std::max(best->metric, best->sigma);
    std::vector<double> start = {slope0, best->current_a, floor0 * floor0};
    auto model_at = [](const std::vector<double>& p, double d) {
        return std::sqrt(std::max(p[0] * p[0] * d * d + p[2], 0.0));
    };
    auto resid = [&](const std::vector<double>& p, std::vector<double>& r) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            const double d = used[i]->current_a - p[1];
            r[i] = (model_at(p, d) - used[i]->metric) / used[i]->sigma;
        }
    };
    auto jac = [&](const std::vector<double>& p, std::vector<double>& j) {
        for (std::size_t i = 0; i < used.size(); ++i) {
            const double d = used[i]->current_a - p[1];
            // Below the noise scale the metric carries no shape information;
            // flooring the denominator there keeps the cone tip regular.
            const double m = std::max(model_at(p, d), 0.5 * used[i]->sigma);
            j[i * 3 + 0] = p[0] * d * d / m / used[i]->sigma;
            j[i * 3 + 1] = -p[0] * p[0] * d / m / used[i]->sigma;
            j[i * 3 + 2] = 0.5 / m / used[i]->sigma;
        }
    };

    auto res = lsq::fit(resid, jac, start, used.size());
    if (res.rank_deficient) {
        out.message = "degenerate minimum fit: " + res.message;
        return out;
    }
    out.slope = std::abs(res.params[0]);
    out.center = res.params[1];

    const double scale = std::max(res.chi2_reduced, 1.0);  // guard misfit
    double sigma_q = 0.0;
    if (!res.covariance.empty()) {
        out.center_sigma = std::sqrt(std::max(res.covariance[4] * scale, 0.0));
        sigma_q = std::sqrt(std::max(res.covariance[8] * scale, 0.0));
    }
    const double q = res.params[2];
    out.floor.value = std::sqrt(std::max(q, 0.0));
    out.floor.sigma = (q > 0.5 * sigma_q && out.floor.value > 0.0)
                          ? sigma_q / (2.0 * out.floor.value)
                          : std::sqrt(sigma_q);
    out.ok = true;
    return out;
}

}  // namespace

MinimizeTrace run_minimization(const synth::Environment& env, const MinimizeConfig& cfg,
                               std::uint64_t seed) {
    if (cfg.sweep_points < 3)
        throw std::invalid_argument("run_minimization: sweep_points must be >= 3");
    if (cfg.rounds < 1) throw std::invalid_argument("run_minimization: rounds must be >= 1");
    if (cfg.power_schedule.size() != static_cast<std::size_t>(cfg.rounds))
        throw std::invalid_argument("run_minimization: power_schedule length must equal rounds");
    for (double s : cfg.sweep_span_a)
        if (!(s > 0.0)) throw std::invalid_argument("run_minimization: sweep spans must be > 0");
    if (cfg.beam.polarization_mode != levels::LineSelection::all)
        throw std::invalid_argument(
            "run_minimization: the splitting metric needs the full spectrum (mode = all)");

    rng::SplitMix64 seeds(seed);
    MinimizeTrace trace;
    Currents currents = cfg.start_currents_a;

    // What the loop believes about the residual field; shrinks as it learns.
    double field_bound = cfg.initial_field_bound_g;
    // Coil slopes in G/A learned from the per-axis minimum fits.
    std::array<double, 3> learned_slope_g_per_a{0.0, 0.0, 0.0};
    const double metric_to_g =
        cfg.metric == SplittingMetric::max_peak_spread ? 1.0 / (rate * eta_span) : 1.0;

    for (int round = 0; round < cfg.rounds; ++round) {
        synth::BeamConfig beam = cfg.beam;
        beam.power_uw = cfg.power_schedule[round];

        for (Axis axis : cfg.axis_order) {
            MinimizeStep step;
            step.axis = axis;
            step.round = round;
            step.currents_before = currents;

            const double span =
                cfg.sweep_span_a[static_cast<std::size_t>(axis)] / std::pow(2.0, round);
            const double center_current = axis_current(currents, axis);
            const double k_axis = learned_slope_g_per_a[static_cast<std::size_t>(axis)];

            int dropped = 0;
            for (int i = 0; i < cfg.sweep_points; ++i) {
                SweepSample sample;
                sample.current_a =
                    center_current - span / 2.0 + span * i / (cfg.sweep_points - 1);
                Currents at = currents;
                axis_current(at, axis) = sample.current_a;

                const double slope_bound =
                    k_axis > 0.0 ? k_axis : cfg.coil_slope_bound_g_per_a;
                const double swing_g =
                    slope_bound * std::abs(sample.current_a - center_current);
                Measurer meas{env, cfg, beam, seeds, field_bound + swing_g};
                const Splitting s = meas.measure(at);
                sample.used = s.defined;
                if (s.defined) {
                    sample.metric = s.metric;
                    sample.sigma = s.sigma;
                    sample.n_peaks = s.n_peaks;
                } else {
                    ++dropped;
                }
                step.samples.push_back(sample);
            }

            if (dropped * 2 > cfg.sweep_points) {
                step.message = "no detectable peaks at " + std::to_string(dropped) + " of " +
                               std::to_string(cfg.sweep_points) + " sweep points on axis " +
                               axis_name(axis);
                trace.steps.push_back(std::move(step));
                trace.ok = false;
                trace.message = trace.steps.back().message;
                trace.final_currents_a = currents;
                return trace;
            }

            const VeeFit vee = fit_vee(step.samples);
            if (!vee.ok) {
                step.message = "minimum fit failed on axis " + std::string(axis_name(axis)) +
                               ": " + vee.message;
                trace.steps.push_back(std::move(step));
                trace.ok = false;
                trace.message = trace.steps.back().message;
                trace.final_currents_a = currents;
                return trace;
            }

            step.chosen_current_a =
                std::clamp(vee.center, center_current - span / 2.0, center_current + span / 2.0);
            step.splitting_at_min = vee.floor;
            step.field_at_min_g = {vee.floor.value * metric_to_g, vee.floor.sigma * metric_to_g};
            step.ok = true;
            axis_current(currents, axis) = step.chosen_current_a;

            const double k_fit = vee.slope * metric_to_g;
            if (k_fit > 1e-4 && k_fit < 100.0)
                learned_slope_g_per_a[static_cast<std::size_t>(axis)] = k_fit;

            // Tighten the believed field bound from the observed floor.
            const double est = step.field_at_min_g.value + 3.0 * step.field_at_min_g.sigma;
            field_bound = std::clamp(est * 1.5 + 0.05, 0.05, field_bound);

            trace.steps.push_back(std::move(step));
        }
        trace.round_field_estimate_g.push_back(trace.steps.back().field_at_min_g.value);
    }

    const MinimizeStep& last = trace.steps.back();
    trace.final_currents_a = currents;
    trace.final_field_g = last.field_at_min_g;
    // The merged-peak resolution floors the uncertainty of the estimate.
    const double fwhm_khz = cfg.beam.base_linewidth_khz +
                            cfg.beam.broadening_khz_per_uw * cfg.power_schedule.back();
    trace.final_field_g.sigma =
        std::max(trace.final_field_g.sigma, 0.5 * fwhm_khz * 1e-3 / (rate * eta_span));
    trace.ok = true;
    trace.message = "converged";
    return trace;
}

}  // namespace bemag::minimize
