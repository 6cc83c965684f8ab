#pragma once

// Inverse problem on a single scan: locate candidate resonances by
// local-maximum + prominence screening, refine every candidate with a
// damped least-squares Lorentzian fit (individually, then jointly to remove
// neighbor-tail bias), and assign Zeeman component labels by rank order.

#include <optional>
#include <vector>

#include "bemag/levels.hpp"
#include "bemag/synth.hpp"
#include "bemag/types.hpp"

namespace bemag::peaks {

struct PeakFit {
    Uncertain center_mhz;
    Uncertain fwhm_khz;
    Uncertain amplitude;
    std::optional<levels::PeakLabel> label;
    double chi2_reduced = 0.0;  // of the joint profile fit
    double prominence = 0.0;
};

// Candidates are screened at min_prominence (> 0), refined, and returned
// sorted by center frequency; at most max_peaks (1..7) survive, the most
// prominent first when trimming. Two candidates within one linewidth merge
// into the stronger one. A scan with no candidate above threshold yields an
// empty list; a scan with fewer than 5 points is an error.
std::vector<PeakFit> detect_peaks(const synth::Scan& scan, double min_prominence, int max_peaks);

struct LabelAssignment {
    std::vector<PeakFit> peaks;
    // Set when the pattern does not identify the components (even counts
    // other than the known missing-L-side case, inconsistent spacings,
    // several peaks in a single-line mode). Labels are left empty then.
    bool ambiguous = false;
};

// Rank-order label assignment around the inferred central component.
// fits must arrive sorted by center frequency.
LabelAssignment assign_labels(std::vector<PeakFit> fits, levels::LineSelection mode);

}  // namespace bemag::peaks
