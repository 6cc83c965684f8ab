#include "bemag/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bemag/lsq.hpp"

namespace bemag::peaks {

namespace {

struct Candidate {
    std::size_t index = 0;       // grid index of the local maximum
    double prominence = 0.0;
    double fwhm_est_mhz = 0.0;   // width at half prominence
};

// Topographic prominence of a local maximum: height above the higher of the
// two valley floors reached before meeting taller terrain (or the edge).
double prominence_at(const std::vector<double>& y, std::size_t i) {
    const double h = y[i];
    double left_min = h;
    for (std::size_t k = i; k-- > 0;) {
        if (y[k] > h) break;
        left_min = std::min(left_min, y[k]);
    }
    double right_min = h;
    for (std::size_t k = i + 1; k < y.size(); ++k) {
        if (y[k] > h) break;
        right_min = std::min(right_min, y[k]);
    }
    return h - std::max(left_min, right_min);
}

double half_prominence_width(const std::vector<double>& x, const std::vector<double>& y,
                             std::size_t i, double prominence) {
    const double half = y[i] - 0.5 * prominence;
    double left = x.front();
    for (std::size_t k = i; k-- > 0;) {
        if (y[k] <= half) {
            // Linear interpolation to the crossing.
            const double t = (y[k + 1] - half) / (y[k + 1] - y[k]);
            left = x[k + 1] + t * (x[k] - x[k + 1]);
            break;
        }
    }
    double right = x.back();
    for (std::size_t k = i + 1; k < y.size(); ++k) {
        if (y[k] <= half) {
            const double t = (y[k - 1] - half) / (y[k - 1] - y[k]);
            right = x[k - 1] + t * (x[k] - x[k - 1]);
            break;
        }
    }
    return std::max(right - left, x[1] - x[0]);
}

// Per-point standard deviation of the normalized signal from the recorded
// counts: Var[(N_f - N_b)/N_b] ~ N_f/N_b^2 (1 + N_f/N_b) by linear error
// propagation with Poisson variances. Empty when no counts were recorded.
std::vector<double> signal_sigmas(const synth::Scan& scan) {
    if (!scan.raw_counts) return {};
    std::vector<double> sigma(scan.signal.size());
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        const double n_f = std::max<double>(static_cast<double>((*scan.raw_counts)[i].n_f), 1.0);
        const double n_b = static_cast<double>((*scan.raw_counts)[i].n_b);
        sigma[i] = std::sqrt(n_f / (n_b * n_b) * (1.0 + n_f / n_b));
    }
    return sigma;
}

// Sum-of-Lorentzians residuals/Jacobian over an index window. Parameters are
// (amplitude, center_mhz, fwhm_mhz) triplets; residuals are weighted by the
// counting-noise sigmas when available.
struct MultiLorentz {
    const std::vector<double>& x;
    const std::vector<double>& y;
    const std::vector<double>& sigma;  // may be empty (unweighted)
    std::vector<std::size_t> idx;

    double weight(std::size_t out) const { return sigma.empty() ? 1.0 : 1.0 / sigma[idx[out]]; }

    void residuals(const std::vector<double>& p, std::vector<double>& r) const {
        const std::size_t n_peaks = p.size() / 3;
        for (std::size_t out = 0; out < idx.size(); ++out) {
            const double f = x[idx[out]];
            double model = 0.0;
            for (std::size_t k = 0; k < n_peaks; ++k) {
                const double a = p[3 * k], c = p[3 * k + 1], w = p[3 * k + 2];
                const double d = f - c;
                model += a / (1.0 + 4.0 * d * d / (w * w));
            }
            r[out] = (model - y[idx[out]]) * weight(out);
        }
    }

    void jacobian(const std::vector<double>& p, std::vector<double>& jac) const {
        const std::size_t n_peaks = p.size() / 3;
        const std::size_t m = p.size();
        for (std::size_t out = 0; out < idx.size(); ++out) {
            const double f = x[idx[out]];
            const double wgt = weight(out);
            for (std::size_t k = 0; k < n_peaks; ++k) {
                const double a = p[3 * k], c = p[3 * k + 1], w = p[3 * k + 2];
                const double d = f - c;
                const double u = 1.0 + 4.0 * d * d / (w * w);
                const double lor = 1.0 / u;
                jac[out * m + 3 * k] = lor * wgt;
                jac[out * m + 3 * k + 1] = a * lor * lor * 8.0 * d / (w * w) * wgt;
                jac[out * m + 3 * k + 2] = a * lor * lor * 8.0 * d * d / (w * w * w) * wgt;
            }
        }
    }
};

lsq::Result fit_lorentzians(const std::vector<double>& x, const std::vector<double>& y,
                            const std::vector<double>& sigma, std::vector<std::size_t> idx,
                            std::vector<double> start) {
    MultiLorentz model{x, y, sigma, std::move(idx)};
    const std::size_t n = model.idx.size();
    return lsq::fit([&model](const std::vector<double>& p, std::vector<double>& r) { model.residuals(p, r); },
                    [&model](const std::vector<double>& p, std::vector<double>& j) { model.jacobian(p, j); },
                    std::move(start), n);
}

}  // namespace

std::vector<PeakFit> detect_peaks(const synth::Scan& scan, double min_prominence, int max_peaks) {
    if (!(min_prominence > 0.0))
        throw std::invalid_argument("detect_peaks: min_prominence must be positive");
    if (max_peaks < 1 || max_peaks > 7)
        throw std::invalid_argument("detect_peaks: max_peaks must lie in [1, 7]");
    const auto& x = scan.f_mod_mhz;
    const auto& y = scan.signal;
    if (x.size() < 5) throw std::invalid_argument("detect_peaks: scan has fewer than 5 points");
    if (x.size() != y.size()) throw std::invalid_argument("detect_peaks: malformed scan");

    std::vector<Candidate> candidates;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
        const double prom = prominence_at(y, i);
        if (prom < min_prominence) continue;
        candidates.push_back({i, prom, half_prominence_width(x, y, i, prom)});
    }
    if (candidates.empty()) return {};

    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.prominence > b.prominence; });

    // Merged components: anything within one estimated linewidth of a
    // stronger candidate is the same resonance.
    std::vector<Candidate> kept;
    for (const Candidate& c : candidates) {
        const bool shadowed = std::any_of(kept.begin(), kept.end(), [&](const Candidate& k) {
            return std::abs(x[c.index] - x[k.index]) < std::max(k.fwhm_est_mhz, c.fwhm_est_mhz);
        });
        if (!shadowed) kept.push_back(c);
        if (static_cast<int>(kept.size()) == max_peaks) break;
    }
    std::sort(kept.begin(), kept.end(),
              [](const Candidate& a, const Candidate& b) { return a.index < b.index; });

    const std::vector<double> sigma = signal_sigmas(scan);

    // Individual refinement on a +-2 linewidth window around each candidate.
    std::vector<double> joint_start;
    for (const Candidate& c : kept) {
        const double window = 2.0 * c.fwhm_est_mhz;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (std::abs(x[i] - x[c.index]) <= window) idx.push_back(i);
        if (idx.size() < 5) {
            // Too thin to fit locally; seed the joint fit from the estimates.
            joint_start.insert(joint_start.end(), {y[c.index], x[c.index], c.fwhm_est_mhz});
            continue;
        }
        auto local = fit_lorentzians(x, y, sigma, idx, {y[c.index], x[c.index], c.fwhm_est_mhz});
        if (local.converged) {
            joint_start.insert(joint_start.end(),
                               {local.params[0], local.params[1], std::abs(local.params[2])});
        } else {
            joint_start.insert(joint_start.end(), {y[c.index], x[c.index], c.fwhm_est_mhz});
        }
    }

    // Joint fit over the whole scan removes the neighbor-tail bias of the
    // windowed fits and yields the covariance the uncertainties come from.
    std::vector<std::size_t> all_idx(x.size());
    std::iota(all_idx.begin(), all_idx.end(), std::size_t{0});
    auto joint = fit_lorentzians(x, y, sigma, all_idx, joint_start);
    const auto& p = joint.params;

    // With counting-noise weights the covariance is already calibrated; an
    // unweighted fit calibrates against the residual scatter instead.
    const double scale = sigma.empty() ? joint.chi2_reduced : 1.0;
    const std::size_t m = p.size();

    std::vector<PeakFit> fits;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        PeakFit f;
        const double amp = p[3 * k], center = p[3 * k + 1], width = std::abs(p[3 * k + 2]);
        auto sigma = [&](std::size_t j) {
            if (joint.covariance.empty()) return 0.0;
            return std::sqrt(std::max(joint.covariance[j * m + j] * scale, 0.0));
        };
        f.amplitude = {amp, sigma(3 * k)};
        f.center_mhz = {center, sigma(3 * k + 1)};
        f.fwhm_khz = {width * 1e3, sigma(3 * k + 2) * 1e3};
        f.chi2_reduced = joint.chi2_reduced;
        f.prominence = kept[k].prominence;
        fits.push_back(f);
    }
    std::sort(fits.begin(), fits.end(), [](const PeakFit& a, const PeakFit& b) {
        return a.center_mhz.value < b.center_mhz.value;
    });
    return fits;
}

namespace {

using levels::PeakLabel;

// Spacing consistency: all adjacent gaps compatible with one common value.
bool equally_spaced(const std::vector<PeakFit>& fits) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < fits.size(); ++i)
        gaps.push_back(fits[i].center_mhz.value - fits[i - 1].center_mhz.value);
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[sorted.size() / 2];
    for (std::size_t i = 1; i < fits.size(); ++i) {
        // Overlapping neighbors pull fitted centers by a few percent of the
        // gap; genuinely foreign patterns land far outside this band.
        const double tol = std::max(
            0.2 * med, 3.0 * std::hypot(fits[i].center_mhz.sigma, fits[i - 1].center_mhz.sigma));
        if (std::abs(gaps[i - 1] - med) > tol) return false;
    }
    return true;
}

void label_run(std::vector<PeakFit>& fits, int center_rank) {
    // Ranks count up in frequency; eta = (rank - center_rank)/2.
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const double eta = 0.5 * (static_cast<int>(i) - center_rank);
        fits[i].label = levels::label_for_eta(eta);
    }
}

}  // namespace

LabelAssignment assign_labels(std::vector<PeakFit> fits, levels::LineSelection mode) {
    for (std::size_t i = 1; i < fits.size(); ++i)
        if (fits[i].center_mhz.value < fits[i - 1].center_mhz.value)
            throw std::invalid_argument("assign_labels: fits must be sorted by center");

    LabelAssignment out;
    out.peaks = std::move(fits);
    const std::size_t n = out.peaks.size();
    if (n == 0) return out;

    if (mode == levels::LineSelection::sigma_minus_only ||
        mode == levels::LineSelection::sigma_plus_only) {
        if (n == 1) {
            out.peaks[0].label = mode == levels::LineSelection::sigma_minus_only
                                     ? PeakLabel::H2   // eta = +1
                                     : PeakLabel::L2;  // eta = -1
        } else {
            out.ambiguous = true;  // a single-line mode should not show several peaks
        }
        return out;
    }

    if (n == 1) {
        out.peaks[0].label = PeakLabel::C;  // collapsed resonance near zero field
        return out;
    }
    if (n == 7) {
        if (equally_spaced(out.peaks)) label_run(out.peaks, 3);
        else out.ambiguous = true;
        return out;
    }
    if ((n == 3 || n == 5) && equally_spaced(out.peaks)) {
        label_run(out.peaks, static_cast<int>(n) / 2);
        return out;
    }
    if (n == 4 && equally_spaced(out.peaks)) {
        // The observed asymmetric pattern: the L side vanishes when the
        // sigma-minus initial states are depleted, leaving C..H3.
        label_run(out.peaks, 0);
        return out;
    }
    out.ambiguous = true;
    return out;
}

}  // namespace bemag::peaks
