#pragma once

// Global calibration fits: labeled peak frequencies from scans at many coil
// settings are fitted with
//     f = eta * 1.4 MHz/G * |B(I)| + f_offset,   B_j = k_j (I_j - I_j0),
// yielding the three coil slopes, three zero-crossing currents and the
// common frequency offset with full covariance; and the single-axis variant
//     |B| = sqrt(k_z^2 (I_z - I_z0)^2 + B_perp^2)
// fitted in B_perp^2 space.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bemag/lsq.hpp"
#include "bemag/types.hpp"

namespace bemag::fieldfit {

struct LabeledPoint {
    Currents currents_a;
    double eta = 0.0;       // in {0, +-1/2, +-1, +-3/2}
    double freq_mhz = 0.0;
    double sigma_mhz = 0.0;  // 1 sigma; <= 0 means unknown (median imputed)
};

// Global fit parameter order (covariance rows/cols):
//   0 k_x, 1 i0_x, 2 k_y, 3 i0_y, 4 k_z, 5 i0_z, 6 f_offset
inline constexpr std::array<const char*, 7> global_param_names = {
    "k_x", "i0_x", "k_y", "i0_y", "k_z", "i0_z", "f_offset"};

struct GlobalFitResult {
    CoilCalibration calibration;
    bool converged = false;
    bool rank_deficient = false;
    std::vector<std::string> unidentifiable;  // named parameters without leverage
    std::string message;
    int n_iterations = 0;
    std::vector<double> chi2_trace;

    bool ok() const { return converged && !rank_deficient; }
};

// Axial fit parameter order: 0 k_z, 1 i0_z, 2 b_perp_sq, 3 f_offset.
struct AxialFitResult {
    Uncertain k_z_g_per_a;
    Uncertain i0_z_a;
    Uncertain b_perp_sq_g2;  // the actual fit parameter
    Uncertain b_perp_g;      // sqrt(max(q,0)); sigma degenerates near zero, see .cpp
    Uncertain f_offset_mhz;
    std::array<double, 16> covariance{};
    double chi2_reduced = 0.0;
    int n_points = 0;
    bool converged = false;
    bool rank_deficient = false;
    std::vector<std::string> unidentifiable;
    std::string message;

    bool ok() const { return converged && !rank_deficient; }
};

// Data-derived starting point: per-setting field estimates from the labeled
// line pattern, then a quadratic fit of |B|^2 against each swept current.
CoilCalibration default_initial_guess(const std::vector<LabeledPoint>& points);

// Damped least squares over all seven parameters. Needs >= 8 points spanning
// variation on every current axis; degenerate geometries come back with
// rank_deficient set and the unidentifiable parameters named. The sign of
// each fitted k_j is matched to the initial guess (only |B| is observable).
GlobalFitResult fit_global(const std::vector<LabeledPoint>& points,
                           std::optional<CoilCalibration> init = std::nullopt,
                           const lsq::Options& options = {});

// Single-axis fit of points sharing (I_x, I_y); requires sigma lines
// (|eta| = 1) to be present.
AxialFitResult fit_axial(const std::vector<LabeledPoint>& points,
                         std::optional<std::array<double, 4>> init = std::nullopt,
                         const lsq::Options& options = {});

struct ZeroCurrents {
    Uncertain x, y, z;
};

// The currents that minimize the field components, read off the calibration.
ZeroCurrents currents_for_zero(const CoilCalibration& cal);

}  // namespace bemag::fieldfit
