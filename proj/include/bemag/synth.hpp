#pragma once

// Forward simulator: peak positions from the level structure, Lorentzian
// line shapes, light shift and power broadening linear in beam power,
// gradient broadening across the ion ensemble, and seeded Poisson counting
// noise normalized exactly like the measurement sequence
// (signal = (N_f - N_b)/N_b, sideband on/off per cycle).

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "bemag/levels.hpp"
#include "bemag/types.hpp"

namespace bemag::synth {

struct BeamConfig {
    double power_uw = 70.0;
    levels::LineSelection polarization_mode = levels::LineSelection::all;
    double lightshift_mhz_per_uw = 0.006;
    double broadening_khz_per_uw = 2.5;
    double base_linewidth_khz = 25.0;
    // Zero-power resonance frequency; the a.c. Stark shift is applied on top
    // of this, common-mode for all components.
    double f_zero_power_mhz = 1250.065;
    // Relative line amplitudes indexed like PeakLabel (L3..H3). Equal by
    // default; the real spectra show unequal heights the model does not fix.
    std::array<double, 7> amplitudes{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
};

struct Environment {
    // Field with every coil at zero current.
    FieldVector ambient_field_g;
    // Simulated ground truth of the coil map. Its zero-crossing currents are
    // the currents nulling the *coil* contribution; the ambient field shifts
    // the effective zero crossings (it is folded into them, see
    // effective_zero_currents).
    CoilCalibration calibration_truth;
    double gradient_g_per_mm = 0.0;   // along z, across the ensemble
    double ensemble_length_mm = 2.0;  // ensemble extent in z
};

struct Scan {
    std::vector<double> f_mod_mhz;  // strictly increasing
    std::vector<double> signal;     // relative fluorescence (N_f - N_b)/N_b
    Currents currents_a;
    double power_uw = 0.0;
    struct CountPair {
        long long n_f = 0;
        long long n_b = 0;
    };
    std::optional<std::vector<CountPair>> raw_counts;
};

// Pass as counts_per_point to disable counting noise entirely (the infinite
// count limit; the scan then carries no raw counts).
inline constexpr double noiseless = std::numeric_limits<double>::infinity();

// B_j = k_j (I_j - I_j0) + ambient_j, component-wise.
FieldVector field_at(const Environment& env, const Currents& currents);

// Currents at which field_at vanishes component-wise.
Currents effective_zero_currents(const Environment& env);

// Peak-normalized Lorentzian: amplitude at center, amplitude/2 at
// center +- fwhm/2.
double line_profile(double center_mhz, double fwhm_khz, double amplitude, double f_mhz);

// The noiseless spectrum at the given settings: one entry per distinct
// resolved component of the selected mode.
struct SpectrumLine {
    levels::PeakLabel label;
    double eta;
    double center_mhz;
    double fwhm_khz;
    double amplitude;
};
std::vector<SpectrumLine> spectrum_model(const Environment& env, const BeamConfig& beam,
                                         const Currents& currents);
double model_signal(const std::vector<SpectrumLine>& lines, double f_mhz);

// Simulate one frequency sweep. grid must be nonempty and strictly
// increasing, counts_per_point > 0 (or `noiseless`). Identical inputs and
// seed reproduce the scan bit for bit.
Scan simulate_scan(const Environment& env, const BeamConfig& beam, const Currents& currents,
                   std::vector<double> grid_mhz, std::uint64_t seed, double counts_per_point);

}  // namespace bemag::synth
