#include "bemag/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bemag/analysis.hpp"
#include "bemag/fieldfit.hpp"
#include "bemag/io.hpp"
#include "bemag/levels.hpp"
#include "bemag/minimize.hpp"
#include "bemag/peaks.hpp"
#include "bemag/synth.hpp"

namespace bemag::cli {

namespace {

using nlohmann::json;

// Thrown by subcommand bodies to signal exit code 2.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit_error(std::ostream& err, const char* kind, const std::string& message) {
    json j;
    j["error"] = {{"kind", kind}, {"message", message}};
    err << j.dump() << "\n";
}

Currents parse_currents(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end != item.c_str() + item.size())
            throw CLI::ValidationError("--currents", "cannot parse '" + item + "'");
        vals.push_back(v);
    }
    if (vals.size() != 3)
        throw CLI::ValidationError("--currents", "expected ix,iy,iz (three values)");
    return {vals[0], vals[1], vals[2]};
}

std::vector<double> parse_grid(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = text.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
        throw CLI::ValidationError("--grid", "expected start:stop:step");
    const double start = std::stod(text.substr(0, c1));
    const double stop = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (!(step > 0.0) || !(stop > start))
        throw CLI::ValidationError("--grid", "need stop > start and step > 0");
    const int n = static_cast<int>(std::floor((stop - start) / step + 1e-9));
    std::vector<double> grid;
    grid.reserve(n + 1);
    for (int i = 0; i <= n; ++i) grid.push_back(start + i * step);
    return grid;
}

levels::LineSelection parse_mode_flag(const std::string& text) {
    if (text == "all") return levels::LineSelection::all;
    if (text == "sigma_plus") return levels::LineSelection::sigma_plus_only;
    if (text == "sigma_minus") return levels::LineSelection::sigma_minus_only;
    throw CLI::ValidationError("--mode", "must be all, sigma_plus or sigma_minus");
}

json calibration_to_json_summary(const CoilCalibration& cal) {
    auto axis = [&](Axis a) {
        const CoilAxis& c = cal.axis(a);
        return json{{"k_g_per_a", c.slope_g_per_a.value},
                    {"k_sigma", c.slope_g_per_a.sigma},
                    {"i0_a", c.zero_current_a.value},
                    {"i0_sigma", c.zero_current_a.sigma}};
    };
    return json{{"x", axis(Axis::X)},
                {"y", axis(Axis::Y)},
                {"z", axis(Axis::Z)},
                {"f_offset_mhz", cal.f_offset_mhz.value},
                {"f_offset_sigma", cal.f_offset_mhz.sigma},
                {"chi2_reduced", cal.chi2_reduced},
                {"n_points", cal.n_points}};
}

// ---- subcommand bodies -------------------------------------------------

struct SimulateArgs {
    std::string env_path, beam_path, currents, grid, output;
    std::uint64_t seed = 0;
    double counts = 2000.0;
    bool noiseless = false;
};

void run_simulate(const SimulateArgs& a, std::ostream& out) {
    const auto env = io::read_environment_config(a.env_path);
    const auto beam = io::read_beam_config(a.beam_path);
    const auto scan = synth::simulate_scan(env, beam, parse_currents(a.currents),
                                           parse_grid(a.grid), a.seed,
                                           a.noiseless ? synth::noiseless : a.counts);
    io::write_scan(scan, a.output);
    out << "wrote " << scan.f_mod_mhz.size() << " points to " << a.output << "\n";
}

struct DetectArgs {
    std::string scan_path, output;
    double prominence = 0.1;
    int max_peaks = 7;
    bool assign = false;
    std::string mode = "all";
};

void run_detect(const DetectArgs& a, std::ostream& out) {
    const auto scan = io::read_scan(a.scan_path);
    auto fits = peaks::detect_peaks(scan, a.prominence, a.max_peaks);
    bool ambiguous = false;
    if (a.assign) {
        auto assigned = peaks::assign_labels(std::move(fits), parse_mode_flag(a.mode));
        fits = std::move(assigned.peaks);
        ambiguous = assigned.ambiguous;
    }
    const std::string text = io::peaks_to_json_lines(fits, ambiguous);
    if (a.output.empty()) {
        out << text;
    } else {
        std::ofstream f(a.output);
        f << text;
        if (!f) throw std::runtime_error("cannot write " + a.output);
    }
}

struct FitFieldArgs {
    std::string points_path, output, init_path;
};

void run_fit_field(const FitFieldArgs& a, std::ostream& out) {
    const auto points = io::read_labeled_points(a.points_path);
    std::optional<CoilCalibration> init;
    if (!a.init_path.empty()) init = io::read_calibration(a.init_path);

    const auto fit = fieldfit::fit_global(points, init);
    if (fit.rank_deficient) {
        std::string names;
        for (const auto& n : fit.unidentifiable) names += (names.empty() ? "" : ", ") + n;
        throw NumericalError("fit-field: unidentifiable parameters: " + names);
    }
    if (!fit.converged) throw NumericalError("fit-field: " + fit.message);

    io::write_calibration(fit.calibration, a.output);
    out << calibration_to_json_summary(fit.calibration).dump(2) << "\n";
}

void run_fit_axial(const FitFieldArgs& a, std::ostream& out) {
    const auto points = io::read_labeled_points(a.points_path);
    const auto fit = fieldfit::fit_axial(points);
    if (fit.rank_deficient) {
        std::string names;
        for (const auto& n : fit.unidentifiable) names += (names.empty() ? "" : ", ") + n;
        throw NumericalError("fit-axial: unidentifiable parameters: " + names);
    }
    if (!fit.converged) throw NumericalError("fit-axial: " + fit.message);

    io::write_axial(fit, a.output);
    json j{{"k_z_g_per_a", fit.k_z_g_per_a.value},
           {"k_z_sigma", fit.k_z_g_per_a.sigma},
           {"i0_z_a", fit.i0_z_a.value},
           {"i0_z_sigma", fit.i0_z_a.sigma},
           {"b_perp_g", fit.b_perp_g.value},
           {"b_perp_sigma", fit.b_perp_g.sigma},
           {"f_offset_mhz", fit.f_offset_mhz.value},
           {"chi2_reduced", fit.chi2_reduced}};
    out << j.dump(2) << "\n";
}

struct MinimizeArgs {
    std::string env_path, config_path, output;
    std::uint64_t seed = 0;
};

void run_minimize_cmd(const MinimizeArgs& a, std::ostream& out) {
    const auto env = io::read_environment_config(a.env_path);
    const auto cfg = io::read_minimize_config(a.config_path);
    const auto trace = minimize::run_minimization(env, cfg, a.seed);
    const std::string text = io::trace_to_json(trace);
    if (a.output.empty()) {
        out << text;
    } else {
        std::ofstream f(a.output);
        f << text;
        if (!f) throw std::runtime_error("cannot write " + a.output);
        out << "wrote trace to " << a.output << "\n";
    }
    if (!trace.ok) throw NumericalError("minimize: " + trace.message);
}

struct PowerArgs {
    std::string series_path;
    bool as_json = false;
};

void run_power(const PowerArgs& a, std::ostream& out) {
    const auto series = io::read_power_series(a.series_path);
    const auto ex = analysis::extrapolate_power(series);
    if (a.as_json) {
        json j{{"f_intercept_mhz", ex.f_intercept_mhz.value},
               {"f_intercept_sigma_mhz", ex.f_intercept_mhz.sigma},
               {"shift_slope_mhz_per_uw", ex.shift_slope_mhz_per_uw.value},
               {"shift_slope_sigma", ex.shift_slope_mhz_per_uw.sigma},
               {"width_intercept_khz", ex.width_intercept_khz.value},
               {"width_intercept_sigma_khz", ex.width_intercept_khz.sigma},
               {"width_slope_khz_per_uw", ex.width_slope_khz_per_uw.value},
               {"width_slope_sigma", ex.width_slope_khz_per_uw.sigma},
               {"n_points", ex.n_points}};
        out << j.dump(2) << "\n";
        return;
    }
    out << "f_intercept_mhz=" << ex.f_intercept_mhz.value << "\n";
    out << "f_intercept_sigma_mhz=" << ex.f_intercept_mhz.sigma << "\n";
    out << "shift_slope_mhz_per_uw=" << ex.shift_slope_mhz_per_uw.value << "\n";
    out << "shift_slope_sigma=" << ex.shift_slope_mhz_per_uw.sigma << "\n";
    out << "width_intercept_khz=" << ex.width_intercept_khz.value << "\n";
    out << "width_intercept_sigma_khz=" << ex.width_intercept_khz.sigma << "\n";
    out << "width_slope_khz_per_uw=" << ex.width_slope_khz_per_uw.value << "\n";
    out << "width_slope_sigma=" << ex.width_slope_khz_per_uw.sigma << "\n";
}

struct PropagateArgs {
    std::string calibration_path, axial_path;
    bool as_json = false;
};

void run_propagate(const PropagateArgs& a, std::ostream& out) {
    double delta_b = 0.0;
    json echo;
    if (!a.calibration_path.empty()) {
        const auto cal = io::read_calibration(a.calibration_path);
        delta_b = analysis::propagate_delta_b(cal);
        echo = calibration_to_json_summary(cal);
    } else {
        const auto axial = io::read_axial(a.axial_path);
        delta_b = analysis::propagate_delta_b(axial);
        echo = {{"k_z_g_per_a", axial.k_z_g_per_a.value},
                {"i0_z_sigma", axial.i0_z_a.sigma},
                {"b_perp_sigma", axial.b_perp_g.sigma}};
    }
    if (a.as_json)
        out << json{{"delta_b_g", delta_b}, {"inputs", echo}}.dump(2) << "\n";
    else
        out << "delta_b_g=" << delta_b << "\n";
}

struct LimitsArgs {
    double discrepancy_khz = 0.0, sigma_khz = 0.0, min_fwhm_khz = 0.0, length_mm = 0.0;
    bool as_json = false;
};

void run_limits(const LimitsArgs& a, std::ostream& out) {
    const auto lim = analysis::upper_limits(a.discrepancy_khz, a.sigma_khz, a.min_fwhm_khz,
                                            a.length_mm);
    if (a.as_json) {
        json j{{"field_limit_g", lim.field_limit_g},
               {"gradient_spread_g", lim.gradient_spread_g},
               {"gradient_g_per_mm", lim.gradient_g_per_mm},
               {"inputs",
                {{"discrepancy_khz", lim.discrepancy_khz},
                 {"discrepancy_sigma_khz", lim.discrepancy_sigma_khz},
                 {"min_fwhm_khz", lim.min_fwhm_khz},
                 {"ensemble_length_mm", lim.ensemble_length_mm},
                 {"scale_mhz_per_g", lim.scale_mhz_per_g}}}};
        out << j.dump(2) << "\n";
        return;
    }
    out << "field_limit_g=" << lim.field_limit_g << "\n";
    out << "gradient_spread_g=" << lim.gradient_spread_g << "\n";
    out << "gradient_g_per_mm=" << lim.gradient_g_per_mm << "\n";
}

struct PredictArgs {
    std::string calibration_path, currents, mode = "all";
    double f_offset = 0.0;  // 0 = take the calibration's
    bool as_json = false;
};

void run_predict(const PredictArgs& a, std::ostream& out) {
    const auto cal = io::read_calibration(a.calibration_path);
    const Currents currents = parse_currents(a.currents);
    const FieldVector field = cal.field_at(currents);
    const double f_offset = a.f_offset > 0.0 ? a.f_offset : cal.f_offset_mhz.value;
    const auto peaks = levels::predict_peaks(field, f_offset, parse_mode_flag(a.mode));

    if (a.as_json) {
        json j;
        j["field_g"] = {{"x", field.x}, {"y", field.y}, {"z", field.z},
                        {"magnitude", field.magnitude()}};
        j["f_offset_mhz"] = f_offset;
        j["peaks"] = json::array();
        for (const auto& p : peaks)
            j["peaks"].push_back(
                {{"label", levels::to_string(p.label)}, {"eta", p.eta}, {"freq_mhz", p.freq_mhz}});
        out << j.dump(2) << "\n";
        return;
    }
    out << "component,field_g\n";
    out << "bx," << field.x << "\n";
    out << "by," << field.y << "\n";
    out << "bz," << field.z << "\n";
    out << "magnitude," << field.magnitude() << "\n";
    out << "label,eta,freq_mhz\n";
    for (const auto& p : peaks)
        out << levels::to_string(p.label) << "," << p.eta << "," << p.freq_mhz << "\n";
}

}  // namespace

int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Zeeman-spectroscopy magnetometry toolkit for trapped 9Be+ ions"};
    app.name("bemag");
    app.require_subcommand(1);

    out.precision(12);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic scan (ScanFile v1 CSV)");
    c_sim->add_option("--env", sim.env_path, "Environment config (key=value)")->required();
    c_sim->add_option("--beam", sim.beam_path, "Beam config (key=value)")->required();
    c_sim->add_option("--currents", sim.currents, "Coil currents ix,iy,iz in A")->required();
    c_sim->add_option("--grid", sim.grid, "Frequency grid start:stop:step in MHz")->required();
    c_sim->add_option("--seed", sim.seed, "RNG seed (stochastic runs must be seeded)")->required();
    c_sim->add_option("--counts", sim.counts, "Expected background counts per point");
    c_sim->add_flag("--noiseless", sim.noiseless, "Disable counting noise (infinite-count limit)");
    c_sim->add_option("-o,--output", sim.output, "Output scan CSV")->required();

    DetectArgs det;
    auto* c_det = app.add_subcommand("detect-peaks", "Locate and fit peaks in a scan");
    c_det->add_option("--scan", det.scan_path, "Input scan CSV")->required();
    c_det->add_option("--prominence", det.prominence, "Minimum peak prominence");
    c_det->add_option("--max-peaks", det.max_peaks, "Maximum peaks to keep (1..7)");
    c_det->add_flag("--assign", det.assign, "Assign Zeeman component labels");
    c_det->add_option("--mode", det.mode, "all, sigma_plus or sigma_minus");
    c_det->add_option("-o,--output", det.output, "Output JSON lines (default stdout)");

    FitFieldArgs ff;
    auto* c_ff = app.add_subcommand("fit-field", "Global seven-parameter calibration fit");
    c_ff->add_option("--points", ff.points_path, "Labeled points CSV")->required();
    c_ff->add_option("--init", ff.init_path, "Initial calibration JSON (optional)");
    c_ff->add_option("-o,--output", ff.output, "Output calibration JSON")->required();

    FitFieldArgs fa;
    auto* c_fa = app.add_subcommand("fit-axial", "Single-axis fit (I_z scan, sigma lines)");
    c_fa->add_option("--points", fa.points_path, "Labeled points CSV")->required();
    c_fa->add_option("-o,--output", fa.output, "Output axial-fit JSON")->required();

    MinimizeArgs mi;
    auto* c_mi = app.add_subcommand("minimize", "Closed-loop field minimization (simulated)");
    c_mi->add_option("--env", mi.env_path, "Environment config (key=value)")->required();
    c_mi->add_option("--config", mi.config_path, "Minimization config (key=value)")->required();
    c_mi->add_option("--seed", mi.seed, "RNG seed")->required();
    c_mi->add_option("-o,--output", mi.output, "Output trace JSON (default stdout)");

    PowerArgs pw;
    auto* c_pw = app.add_subcommand("power-extrapolate", "Zero-power extrapolation of a series");
    c_pw->add_option("--series", pw.series_path, "Power series CSV")->required();
    c_pw->add_flag("--json", pw.as_json, "JSON output");

    PropagateArgs pr;
    auto* c_pr = app.add_subcommand("propagate", "Field uncertainty at the zero crossings");
    c_pr->add_option("--calibration", pr.calibration_path, "Calibration JSON");
    c_pr->add_option("--axial", pr.axial_path, "Axial-fit JSON");
    c_pr->add_flag("--json", pr.as_json, "JSON output");

    LimitsArgs li;
    auto* c_li = app.add_subcommand("limits", "Residual field and gradient upper limits");
    c_li->add_option("--discrepancy-khz", li.discrepancy_khz, "|f0 - reference| in kHz")->required();
    c_li->add_option("--sigma-khz", li.sigma_khz, "1-sigma of the discrepancy in kHz")->required();
    c_li->add_option("--min-fwhm-khz", li.min_fwhm_khz, "Narrowest observed FWHM in kHz")->required();
    c_li->add_option("--length-mm", li.length_mm, "Ensemble extent in mm")->required();
    c_li->add_flag("--json", li.as_json, "JSON output");

    PredictArgs pd;
    auto* c_pd = app.add_subcommand("predict", "Field and peak table from calibration + currents");
    c_pd->add_option("--calibration", pd.calibration_path, "Calibration JSON")->required();
    c_pd->add_option("--currents", pd.currents, "Coil currents ix,iy,iz in A")->required();
    c_pd->add_option("--f-offset", pd.f_offset, "Override f_offset in MHz");
    c_pd->add_option("--mode", pd.mode, "all, sigma_plus or sigma_minus");
    c_pd->add_flag("--json", pd.as_json, "JSON output");

    try {
        std::reverse(args.begin(), args.end());  // CLI11 vector parse order
        app.parse(std::move(args));

        if (*c_sim) run_simulate(sim, out);
        else if (*c_det) run_detect(det, out);
        else if (*c_ff) run_fit_field(ff, out);
        else if (*c_fa) run_fit_axial(fa, out);
        else if (*c_mi) run_minimize_cmd(mi, out);
        else if (*c_pw) run_power(pw, out);
        else if (*c_pr) {
            if (pr.calibration_path.empty() == pr.axial_path.empty())
                throw CLI::ValidationError("propagate",
                                           "exactly one of --calibration/--axial is required");
            run_propagate(pr, out);
        } else if (*c_li) run_limits(li, out);
        else if (*c_pd) run_predict(pd, out);
        return 0;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "input", e.what());
        err << app.help();
        return 1;
    } catch (const NumericalError& e) {
        emit_error(err, "numerical", e.what());
        return 2;
    } catch (const io::ParseError& e) {
        emit_error(err, "input", e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error(err, "input", e.what());
        return 1;
    }
}

}  // namespace bemag::cli
