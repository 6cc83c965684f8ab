#pragma once

// Static level structure of the 9Be+ 2S1/2 ground state: g-factors, linear
// Zeeman shifts, and the table of allowed stimulated-Raman components between
// the F'=1 and F=2 hyperfine levels.
//
// Conventions (fixed throughout the project):
//  - Frequencies in MHz, magnetic fields in Gauss, currents in Ampere.
//  - The linear Zeeman scale is exactly 1.4 MHz/G per unit g_F*m_F.
//  - The Raman resonance is scanned in f_mod = f(F'=1, m_F') - f(F=2, m_F)
//    space; its shift coefficient is eta = g_{F=1}*m_F' - g_{F=2}*m_F, so a
//    sigma-minus-pumped line (m_F' = -1 -> m_F = -1) shifts as +1.4 MHz/G.

#include <vector>

#include "bemag/types.hpp"

namespace bemag::levels {

// mu_B/h scale used for every number in this project.
inline constexpr double zeeman_rate_mhz_per_g = 1.4;

// 2S1/2 hyperfine interval, literature values.
inline constexpr double hyperfine_freq_shiga_mhz = 1250.017674088;
inline constexpr double hyperfine_freq_nominal_mhz = 1250.0;

// Quantum numbers of 9Be+: nuclear spin 3/2, ground electronic state S1/2.
inline constexpr double nuclear_spin = 1.5;
inline constexpr double electron_j = 0.5;
inline constexpr double electron_s = 0.5;
inline constexpr double electron_l = 0.0;

// One Zeeman sublevel of a ground hyperfine level. F is 1 or 2, |m_f| <= F.
struct HyperfineState {
    int f = 2;
    int m_f = 0;
};

// Which initial m_F' sublevel of F'=1 the component starts from, named after
// the light polarization that leaves that sublevel populated (sigma_minus
// pumping confines the population to m_F' = -1, etc.).
enum class Polarization { sigma_minus, pi, sigma_plus };

// Peak names in frequency order, L3 lowest to H3 highest. The map
// eta <-> label is a fixed convention of this project:
// H3=+3/2, H2=+1, H1=+1/2, C=0, L1=-1/2, L2=-1, L3=-3/2.
enum class PeakLabel { L3, L2, L1, C, H1, H2, H3 };

const char* to_string(PeakLabel label);
const char* to_string(Polarization pol);
double eta_of(PeakLabel label);

// Maps eta in {-3/2,-1,...,+3/2} to its label; throws std::invalid_argument
// for any other value.
PeakLabel label_for_eta(double eta);

// One allowed Raman component F'=1 (lower F) -> F=2 (higher F).
struct ZeemanLine {
    double eta = 0.0;          // shift coefficient, f = eta*1.4 MHz/G * |B| + f_offset
    HyperfineState lower;      // F'=1 state (lower F quantum number)
    HyperfineState upper;      // F=2 state
    Polarization polarization = Polarization::pi;
    PeakLabel label = PeakLabel::C;
};

enum class LineSelection { all, sigma_plus_only, sigma_minus_only };

// Lande g_F in the two-factor approximation (g_J reduces to exactly 2 for
// S=1/2, L=0, J=1/2, which is what keeps the 1.4 MHz/G scale).
// Throws std::domain_error for F = 0 and for quantum numbers that violate
// the angular-momentum coupling rules.
double g_factor(double f, double i, double j, double s, double l);

// Linear Zeeman shift of one sublevel in MHz at field magnitude field_g >= 0.
double zeeman_shift_mhz(const HyperfineState& state, double field_g);

// The full component table (mode = all): 13 (m_F' -> m_F) pairs collapsing
// to the 7 distinct eta values {0, +-1/2, +-1, +-3/2}. The sigma-only modes
// return the single surviving component (eta = -1 for sigma_plus_only,
// eta = +1 for sigma_minus_only).
std::vector<ZeemanLine> enumerate_lines(LineSelection mode);

struct PredictedPeak {
    PeakLabel label = PeakLabel::C;
    double eta = 0.0;
    double freq_mhz = 0.0;
};

// One entry per distinct eta of the selected mode, sorted by descending eta
// (i.e. descending frequency). A zero-magnitude field collapses everything
// onto a single entry at f_offset. Requires f_offset_mhz > 0.
std::vector<PredictedPeak> predict_peaks(const FieldVector& field, double f_offset_mhz,
                                         LineSelection mode);

}  // namespace bemag::levels
