#include "bemag/levels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace bemag::levels {

namespace {

bool close(double a, double b) { return std::abs(a - b) < 1e-9; }

// Half-integer grid check: 2q must be a non-negative integer.
bool valid_momentum(double q) {
    if (q < 0.0) return false;
    const double two_q = 2.0 * q;
    return close(two_q, std::round(two_q));
}

}  // namespace

const char* to_string(PeakLabel label) {
    switch (label) {
    case PeakLabel::L3: return "L3";
    case PeakLabel::L2: return "L2";
    case PeakLabel::L1: return "L1";
    case PeakLabel::C: return "C";
    case PeakLabel::H1: return "H1";
    case PeakLabel::H2: return "H2";
    case PeakLabel::H3: return "H3";
    }
    return "?";
}

const char* to_string(Polarization pol) {
    switch (pol) {
    case Polarization::sigma_minus: return "sigma-";
    case Polarization::pi: return "pi";
    case Polarization::sigma_plus: return "sigma+";
    }
    return "?";
}

double eta_of(PeakLabel label) {
    switch (label) {
    case PeakLabel::L3: return -1.5;
    case PeakLabel::L2: return -1.0;
    case PeakLabel::L1: return -0.5;
    case PeakLabel::C: return 0.0;
    case PeakLabel::H1: return 0.5;
    case PeakLabel::H2: return 1.0;
    case PeakLabel::H3: return 1.5;
    }
    return 0.0;
}

PeakLabel label_for_eta(double eta) {
    static const PeakLabel order[] = {PeakLabel::L3, PeakLabel::L2, PeakLabel::L1, PeakLabel::C,
                                      PeakLabel::H1, PeakLabel::H2, PeakLabel::H3};
    for (PeakLabel label : order)
        if (close(eta, eta_of(label))) return label;
    throw std::invalid_argument("label_for_eta: no peak label for eta = " + std::to_string(eta));
}

double g_factor(double f, double i, double j, double s, double l) {
    if (!valid_momentum(f) || !valid_momentum(i) || !valid_momentum(j) || !valid_momentum(s) ||
        !valid_momentum(l))
        throw std::domain_error("g_factor: quantum numbers must be non-negative (half-)integers");
    if (close(f, 0.0))
        throw std::domain_error("g_factor: F = 0 has no magnetic substructure (formula singular)");
    if (close(j, 0.0))
        throw std::domain_error("g_factor: J = 0 makes the electronic factor singular");
    // Triangle rules: J in |L-S|..L+S, F in |I-J|..I+J.
    if (j < std::abs(l - s) - 1e-9 || j > l + s + 1e-9)
        throw std::domain_error("g_factor: (L,S,J) violate the triangle rule");
    if (f < std::abs(i - j) - 1e-9 || f > i + j + 1e-9)
        throw std::domain_error("g_factor: (I,J,F) violate the triangle rule");

    const double electronic = 1.5 + (s * (s + 1.0) - l * (l + 1.0)) / (2.0 * j * (j + 1.0));
    const double hyperfine = (f * (f + 1.0) - i * (i + 1.0) + j * (j + 1.0)) / (2.0 * f * (f + 1.0));
    return electronic * hyperfine;
}

double zeeman_shift_mhz(const HyperfineState& state, double field_g) {
    if (std::abs(state.m_f) > state.f)
        throw std::domain_error("zeeman_shift_mhz: |m_F| must not exceed F");
    const double g = g_factor(state.f, nuclear_spin, electron_j, electron_s, electron_l);
    return zeeman_rate_mhz_per_g * g * state.m_f * field_g;
}

std::vector<ZeemanLine> enumerate_lines(LineSelection mode) {
    const double g_upper = g_factor(2, nuclear_spin, electron_j, electron_s, electron_l);
    const double g_lower = g_factor(1, nuclear_spin, electron_j, electron_s, electron_l);

    std::vector<ZeemanLine> lines;
    for (int m_lower = -1; m_lower <= 1; ++m_lower) {
        const Polarization pol = m_lower < 0   ? Polarization::sigma_minus
                                 : m_lower > 0 ? Polarization::sigma_plus
                                               : Polarization::pi;
        for (int m_upper = -2; m_upper <= 2; ++m_upper) {
            if (std::abs(m_upper - m_lower) > 2) continue;  // two-photon selection rule
            const double eta = g_lower * m_lower - g_upper * m_upper;
            lines.push_back({eta,
                             HyperfineState{1, m_lower},
                             HyperfineState{2, m_upper},
                             pol,
                             label_for_eta(eta)});
        }
    }

    switch (mode) {
    case LineSelection::all:
        return lines;
    case LineSelection::sigma_plus_only:
        // Only m_F' = +1 stays populated; the co-polarized pair drives m_F = +1.
        std::erase_if(lines, [](const ZeemanLine& ln) {
            return !(ln.polarization == Polarization::sigma_plus && ln.upper.m_f == 1);
        });
        return lines;
    case LineSelection::sigma_minus_only:
        std::erase_if(lines, [](const ZeemanLine& ln) {
            return !(ln.polarization == Polarization::sigma_minus && ln.upper.m_f == -1);
        });
        return lines;
    }
    return lines;
}

std::vector<PredictedPeak> predict_peaks(const FieldVector& field, double f_offset_mhz,
                                         LineSelection mode) {
    if (!(f_offset_mhz > 0.0))
        throw std::invalid_argument("predict_peaks: f_offset must be positive");

    const double mag = field.magnitude();

    // Collapse the component table to its distinct eta values.
    std::map<double, PeakLabel, std::greater<double>> distinct;
    for (const ZeemanLine& ln : enumerate_lines(mode)) distinct.emplace(ln.eta, ln.label);

    std::vector<PredictedPeak> peaks;
    if (mag == 0.0) {
        // Degenerate field: every component sits at f_offset.
        const PeakLabel label = mode == LineSelection::all ? PeakLabel::C : distinct.begin()->second;
        const double eta = mode == LineSelection::all ? 0.0 : distinct.begin()->first;
        peaks.push_back({label, eta, f_offset_mhz});
        return peaks;
    }
    for (const auto& [eta, label] : distinct)
        peaks.push_back({label, eta, eta * zeeman_rate_mhz_per_g * mag + f_offset_mhz});
    return peaks;
}

}  // namespace bemag::levels
