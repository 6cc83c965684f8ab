#pragma once

// File formats: scan CSV (metadata comments + f_mod/signal/count columns),
// calibration and axial-fit JSON, labeled-point and power-series CSV,
// peak-fit JSON lines, minimization trace JSON, and flat key=value config
// files for the simulator and the minimization loop.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bemag/analysis.hpp"
#include "bemag/fieldfit.hpp"
#include "bemag/minimize.hpp"
#include "bemag/peaks.hpp"
#include "bemag/synth.hpp"

namespace bemag::io {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Scan CSV, schema v1: leading `# key=value` metadata lines with required
// keys ix_a, iy_a, iz_a, power_uw; header `f_mod_mhz,signal,n_f,n_b`; count
// columns either filled on every row or empty on every row. The stored
// signal must equal (n_f - n_b)/n_b to 1e-9 relative when counts are
// present, and f_mod_mhz must be strictly increasing.
synth::Scan read_scan(const std::filesystem::path& path);
void write_scan(const synth::Scan& scan, const std::filesystem::path& path);

// Calibration JSON, schema "calibration/v1"; covariance is the 7x7
// row-major matrix over (k_x, i0_x, k_y, i0_y, k_z, i0_z, f_offset).
CoilCalibration read_calibration(const std::filesystem::path& path);
void write_calibration(const CoilCalibration& cal, const std::filesystem::path& path);

// Axial fit JSON, schema "axial-fit/v1".
fieldfit::AxialFitResult read_axial(const std::filesystem::path& path);
void write_axial(const fieldfit::AxialFitResult& fit, const std::filesystem::path& path);

// Labeled points CSV: header `ix_a,iy_a,iz_a,eta,f_mhz,sigma_mhz`; an empty
// sigma field means unknown.
std::vector<fieldfit::LabeledPoint> read_labeled_points(const std::filesystem::path& path);
void write_labeled_points(const std::vector<fieldfit::LabeledPoint>& points,
                          const std::filesystem::path& path);

// Power series CSV: header
// `power_uw,center_mhz,center_sigma_mhz,fwhm_khz,fwhm_sigma_khz`.
analysis::PowerSeries read_power_series(const std::filesystem::path& path);
void write_power_series(const analysis::PowerSeries& series, const std::filesystem::path& path);

// Peak fits as JSON lines (one object per peak).
std::string peaks_to_json_lines(const std::vector<peaks::PeakFit>& fits, bool ambiguous);
std::vector<peaks::PeakFit> peaks_from_json_lines(const std::string& text);

std::string trace_to_json(const minimize::MinimizeTrace& trace);

// Flat key=value config files (unknown keys are rejected).
synth::Environment read_environment_config(const std::filesystem::path& path);
synth::BeamConfig read_beam_config(const std::filesystem::path& path);
minimize::MinimizeConfig read_minimize_config(const std::filesystem::path& path);

}  // namespace bemag::io
