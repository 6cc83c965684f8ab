#include "bemag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bemag/rng.hpp"

namespace bemag::synth {

FieldVector field_at(const Environment& env, const Currents& currents) {
    const FieldVector coil = env.calibration_truth.field_at(currents);
    return {coil.x + env.ambient_field_g.x, coil.y + env.ambient_field_g.y,
            coil.z + env.ambient_field_g.z};
}

Currents effective_zero_currents(const Environment& env) {
    auto zero = [&](Axis a, double ambient) {
        const CoilAxis& c = env.calibration_truth.axis(a);
        if (c.slope_g_per_a.value == 0.0)
            throw std::invalid_argument("effective_zero_currents: zero coil slope");
        return c.zero_current_a.value - ambient / c.slope_g_per_a.value;
    };
    return {zero(Axis::X, env.ambient_field_g.x), zero(Axis::Y, env.ambient_field_g.y),
            zero(Axis::Z, env.ambient_field_g.z)};
}

double line_profile(double center_mhz, double fwhm_khz, double amplitude, double f_mhz) {
    if (!(fwhm_khz > 0.0)) throw std::invalid_argument("line_profile: fwhm must be positive");
    if (amplitude < 0.0) throw std::invalid_argument("line_profile: amplitude must be >= 0");
    const double w_mhz = fwhm_khz * 1e-3;
    const double d = f_mhz - center_mhz;
    return amplitude / (1.0 + 4.0 * d * d / (w_mhz * w_mhz));
}

std::vector<SpectrumLine> spectrum_model(const Environment& env, const BeamConfig& beam,
                                         const Currents& currents) {
    const FieldVector field = field_at(env, currents);
    const double f_offset = beam.f_zero_power_mhz + beam.lightshift_mhz_per_uw * beam.power_uw;
    const auto peaks = levels::predict_peaks(field, f_offset, beam.polarization_mode);

    // Field spread over the ensemble maps to an additive width per unit |eta|.
    const double gradient_khz =
        levels::zeeman_rate_mhz_per_g * 1e3 * env.gradient_g_per_mm * env.ensemble_length_mm;
    const double power_khz = beam.base_linewidth_khz + beam.broadening_khz_per_uw * beam.power_uw;

    std::vector<SpectrumLine> lines;
    lines.reserve(peaks.size());
    for (const auto& p : peaks) {
        SpectrumLine ln;
        ln.label = p.label;
        ln.eta = p.eta;
        ln.center_mhz = p.freq_mhz;
        ln.fwhm_khz = power_khz + gradient_khz * std::abs(p.eta);
        ln.amplitude = beam.amplitudes[static_cast<std::size_t>(p.label)];
        lines.push_back(ln);
    }
    return lines;
}

double model_signal(const std::vector<SpectrumLine>& lines, double f_mhz) {
    double s = 0.0;
    for (const auto& ln : lines) s += line_profile(ln.center_mhz, ln.fwhm_khz, ln.amplitude, f_mhz);
    return s;
}

Scan simulate_scan(const Environment& env, const BeamConfig& beam, const Currents& currents,
                   std::vector<double> grid_mhz, std::uint64_t seed, double counts_per_point) {
    if (grid_mhz.empty()) throw std::invalid_argument("simulate_scan: empty frequency grid");
    for (std::size_t i = 1; i < grid_mhz.size(); ++i)
        if (!(grid_mhz[i] > grid_mhz[i - 1]))
            throw std::invalid_argument("simulate_scan: grid must be strictly increasing");
    if (!(counts_per_point > 0.0))
        throw std::invalid_argument("simulate_scan: counts_per_point must be positive");
    if (!(beam.power_uw >= 0.0) || !(beam.base_linewidth_khz > 0.0))
        throw std::invalid_argument("simulate_scan: invalid beam configuration");

    const auto lines = spectrum_model(env, beam, currents);

    Scan scan;
    scan.f_mod_mhz = std::move(grid_mhz);
    scan.signal.resize(scan.f_mod_mhz.size());
    scan.currents_a = currents;
    scan.power_uw = beam.power_uw;

    if (std::isinf(counts_per_point)) {
        for (std::size_t i = 0; i < scan.f_mod_mhz.size(); ++i)
            scan.signal[i] = model_signal(lines, scan.f_mod_mhz[i]);
        return scan;
    }

    rng::SplitMix64 gen(seed);
    std::vector<Scan::CountPair> counts(scan.f_mod_mhz.size());
    for (std::size_t i = 0; i < scan.f_mod_mhz.size(); ++i) {
        const double s = model_signal(lines, scan.f_mod_mhz[i]);
        const long long n_f = gen.poisson(counts_per_point * (1.0 + s));
        // A zero background bin leaves the normalization undefined; the
        // floor at one count keeps the emitted identity intact.
        const long long n_b = std::max<long long>(gen.poisson(counts_per_point), 1);
        counts[i] = {n_f, n_b};
        scan.signal[i] =
            static_cast<double>(n_f - n_b) / static_cast<double>(n_b);
    }
    scan.raw_counts = std::move(counts);
    return scan;
}

}  // namespace bemag::synth
