#include "bemag/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

namespace bemag::io {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& file, int line, const std::string& text,
                    const std::string& what) {
    const std::string t = trim(text);
    if (t.empty()) throw ParseError(file, line, "empty " + what + " field");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v))
        throw ParseError(file, line, "cannot parse " + what + " from '" + t + "'");
    return v;
}

long long parse_count(const std::string& file, int line, const std::string& text,
                      const std::string& what) {
    const std::string t = trim(text);
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw ParseError(file, line, "cannot parse " + what + " from '" + t + "'");
    return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return j;
}

double need_num(const json& j, const std::string& key, const std::string& file) {
    if (!j.contains(key) || !j[key].is_number())
        throw ParseError(file, 0, "missing or non-numeric key '" + key + "'");
    return j[key].get<double>();
}

}  // namespace

synth::Scan read_scan(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    const std::string file = path.string();

    std::map<std::string, double> meta;
    std::size_t row = 0;
    while (row < lines.size() && !lines[row].empty() && lines[row][0] == '#') {
        const std::string body = trim(lines[row].substr(1));
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ParseError(file, static_cast<int>(row + 1), "metadata line without key=value");
        const std::string key = trim(body.substr(0, eq));
        meta[key] = parse_double(file, static_cast<int>(row + 1), body.substr(eq + 1), key);
        ++row;
    }
    for (const char* key : {"ix_a", "iy_a", "iz_a", "power_uw"})
        if (!meta.count(key))
            throw ParseError(file, static_cast<int>(row), std::string("missing metadata key ") + key);

    if (row >= lines.size() || trim(lines[row]) != "f_mod_mhz,signal,n_f,n_b")
        throw ParseError(file, static_cast<int>(row + 1),
                         "expected header 'f_mod_mhz,signal,n_f,n_b'");
    ++row;

    synth::Scan scan;
    scan.currents_a = {meta["ix_a"], meta["iy_a"], meta["iz_a"]};
    scan.power_uw = meta["power_uw"];

    std::vector<synth::Scan::CountPair> counts;
    std::optional<bool> with_counts;
    for (; row < lines.size(); ++row) {
        if (trim(lines[row]).empty()) continue;
        const int ln = static_cast<int>(row + 1);
        const auto fields = split(lines[row], ',');
        if (fields.size() != 4) throw ParseError(file, ln, "expected 4 comma-separated fields");

        const double f = parse_double(file, ln, fields[0], "f_mod_mhz");
        const double s = parse_double(file, ln, fields[1], "signal");
        if (!scan.f_mod_mhz.empty() && !(f > scan.f_mod_mhz.back()))
            throw ParseError(file, ln, "f_mod_mhz must be strictly increasing");

        const bool has_counts = !trim(fields[2]).empty() || !trim(fields[3]).empty();
        if (with_counts.has_value() && has_counts != *with_counts)
            throw ParseError(file, ln, "count columns must be filled on all rows or none");
        with_counts = has_counts;

        if (has_counts) {
            const long long n_f = parse_count(file, ln, fields[2], "n_f");
            const long long n_b = parse_count(file, ln, fields[3], "n_b");
            if (n_b <= 0) throw ParseError(file, ln, "n_b must be positive");
            const double expected = static_cast<double>(n_f - n_b) / static_cast<double>(n_b);
            if (std::abs(s - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
                throw ParseError(file, ln, "signal inconsistent with (n_f-n_b)/n_b");
            counts.push_back({n_f, n_b});
        }
        scan.f_mod_mhz.push_back(f);
        scan.signal.push_back(s);
    }
    if (scan.f_mod_mhz.empty()) throw ParseError(file, static_cast<int>(row), "scan has no data rows");
    if (with_counts.value_or(false)) scan.raw_counts = std::move(counts);
    return scan;
}

void write_scan(const synth::Scan& scan, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# ix_a=" << fmt(scan.currents_a.x) << "\n";
    out << "# iy_a=" << fmt(scan.currents_a.y) << "\n";
    out << "# iz_a=" << fmt(scan.currents_a.z) << "\n";
    out << "# power_uw=" << fmt(scan.power_uw) << "\n";
    out << "f_mod_mhz,signal,n_f,n_b\n";
    for (std::size_t i = 0; i < scan.f_mod_mhz.size(); ++i) {
        out << fmt(scan.f_mod_mhz[i]) << "," << fmt(scan.signal[i]) << ",";
        if (scan.raw_counts)
            out << (*scan.raw_counts)[i].n_f << "," << (*scan.raw_counts)[i].n_b;
        else
            out << ",";
        out << "\n";
    }
    write_text(path, out.str());
}

namespace {

json axis_to_json(const CoilAxis& axis) {
    return {{"k_g_per_a", axis.slope_g_per_a.value},
            {"k_sigma", axis.slope_g_per_a.sigma},
            {"i0_a", axis.zero_current_a.value},
            {"i0_sigma", axis.zero_current_a.sigma}};
}

CoilAxis axis_from_json(const json& j, const std::string& file) {
    return {{need_num(j, "k_g_per_a", file), need_num(j, "k_sigma", file)},
            {need_num(j, "i0_a", file), need_num(j, "i0_sigma", file)}};
}

}  // namespace

CoilCalibration read_calibration(const std::filesystem::path& path) {
    const json j = load_json(path);
    const std::string file = path.string();
    if (!j.contains("schema") || j["schema"] != "calibration/v1")
        throw ParseError(file, 0, "schema must be 'calibration/v1'");

    CoilCalibration cal;
    const char* names[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        if (!j.contains(names[a])) throw ParseError(file, 0, std::string("missing axis ") + names[a]);
        cal.axes[a] = axis_from_json(j[names[a]], file);
    }
    cal.f_offset_mhz = {need_num(j, "f_offset_mhz", file), need_num(j, "f_offset_sigma", file)};
    if (!j.contains("covariance") || !j["covariance"].is_array() || j["covariance"].size() != 49)
        throw ParseError(file, 0, "covariance must be an array of 49 numbers");
    for (std::size_t i = 0; i < 49; ++i) cal.covariance[i] = j["covariance"][i].get<double>();
    if (j.contains("fit_stats")) {
        cal.chi2_reduced = need_num(j["fit_stats"], "chi2_reduced", file);
        cal.n_points = static_cast<int>(need_num(j["fit_stats"], "n_points", file));
    }
    return cal;
}

void write_calibration(const CoilCalibration& cal, const std::filesystem::path& path) {
    json j;
    j["schema"] = "calibration/v1";
    j["x"] = axis_to_json(cal.axes[0]);
    j["y"] = axis_to_json(cal.axes[1]);
    j["z"] = axis_to_json(cal.axes[2]);
    j["f_offset_mhz"] = cal.f_offset_mhz.value;
    j["f_offset_sigma"] = cal.f_offset_mhz.sigma;
    j["covariance"] = cal.covariance;
    j["fit_stats"] = {{"chi2_reduced", cal.chi2_reduced}, {"n_points", cal.n_points}};
    write_text(path, j.dump(2) + "\n");
}

fieldfit::AxialFitResult read_axial(const std::filesystem::path& path) {
    const json j = load_json(path);
    const std::string file = path.string();
    if (!j.contains("schema") || j["schema"] != "axial-fit/v1")
        throw ParseError(file, 0, "schema must be 'axial-fit/v1'");

    fieldfit::AxialFitResult fit;
    fit.k_z_g_per_a = {need_num(j, "k_z_g_per_a", file), need_num(j, "k_z_sigma", file)};
    fit.i0_z_a = {need_num(j, "i0_z_a", file), need_num(j, "i0_z_sigma", file)};
    fit.b_perp_sq_g2 = {need_num(j, "b_perp_sq_g2", file), need_num(j, "b_perp_sq_sigma", file)};
    fit.b_perp_g = {need_num(j, "b_perp_g", file), need_num(j, "b_perp_sigma", file)};
    fit.f_offset_mhz = {need_num(j, "f_offset_mhz", file), need_num(j, "f_offset_sigma", file)};
    if (j.contains("covariance")) {
        if (!j["covariance"].is_array() || j["covariance"].size() != 16)
            throw ParseError(file, 0, "covariance must be an array of 16 numbers");
        for (std::size_t i = 0; i < 16; ++i) fit.covariance[i] = j["covariance"][i].get<double>();
    }
    if (j.contains("fit_stats")) {
        fit.chi2_reduced = need_num(j["fit_stats"], "chi2_reduced", file);
        fit.n_points = static_cast<int>(need_num(j["fit_stats"], "n_points", file));
    }
    fit.converged = j.value("converged", true);
    return fit;
}

void write_axial(const fieldfit::AxialFitResult& fit, const std::filesystem::path& path) {
    json j;
    j["schema"] = "axial-fit/v1";
    j["k_z_g_per_a"] = fit.k_z_g_per_a.value;
    j["k_z_sigma"] = fit.k_z_g_per_a.sigma;
    j["i0_z_a"] = fit.i0_z_a.value;
    j["i0_z_sigma"] = fit.i0_z_a.sigma;
    j["b_perp_sq_g2"] = fit.b_perp_sq_g2.value;
    j["b_perp_sq_sigma"] = fit.b_perp_sq_g2.sigma;
    j["b_perp_g"] = fit.b_perp_g.value;
    j["b_perp_sigma"] = fit.b_perp_g.sigma;
    j["f_offset_mhz"] = fit.f_offset_mhz.value;
    j["f_offset_sigma"] = fit.f_offset_mhz.sigma;
    j["covariance"] = fit.covariance;
    j["fit_stats"] = {{"chi2_reduced", fit.chi2_reduced}, {"n_points", fit.n_points}};
    j["converged"] = fit.converged;
    write_text(path, j.dump(2) + "\n");
}

std::vector<fieldfit::LabeledPoint> read_labeled_points(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    const std::string file = path.string();
    if (lines.empty() || trim(lines[0]) != "ix_a,iy_a,iz_a,eta,f_mhz,sigma_mhz")
        throw ParseError(file, 1, "expected header 'ix_a,iy_a,iz_a,eta,f_mhz,sigma_mhz'");

    std::vector<fieldfit::LabeledPoint> points;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        if (trim(lines[row]).empty()) continue;
        const int ln = static_cast<int>(row + 1);
        const auto fields = split(lines[row], ',');
        if (fields.size() != 6) throw ParseError(file, ln, "expected 6 comma-separated fields");
        fieldfit::LabeledPoint p;
        p.currents_a.x = parse_double(file, ln, fields[0], "ix_a");
        p.currents_a.y = parse_double(file, ln, fields[1], "iy_a");
        p.currents_a.z = parse_double(file, ln, fields[2], "iz_a");
        p.eta = parse_double(file, ln, fields[3], "eta");
        p.freq_mhz = parse_double(file, ln, fields[4], "f_mhz");
        p.sigma_mhz = trim(fields[5]).empty() ? 0.0 : parse_double(file, ln, fields[5], "sigma_mhz");
        points.push_back(p);
    }
    if (points.empty()) throw ParseError(file, 1, "no data rows");
    return points;
}

void write_labeled_points(const std::vector<fieldfit::LabeledPoint>& points,
                          const std::filesystem::path& path) {
    std::ostringstream out;
    out << "ix_a,iy_a,iz_a,eta,f_mhz,sigma_mhz\n";
    for (const auto& p : points) {
        out << fmt(p.currents_a.x) << "," << fmt(p.currents_a.y) << "," << fmt(p.currents_a.z)
            << "," << fmt(p.eta) << "," << fmt(p.freq_mhz) << ",";
        if (p.sigma_mhz > 0.0) out << fmt(p.sigma_mhz);
        out << "\n";
    }
    write_text(path, out.str());
}

analysis::PowerSeries read_power_series(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    const std::string file = path.string();
    if (lines.empty() ||
        trim(lines[0]) != "power_uw,center_mhz,center_sigma_mhz,fwhm_khz,fwhm_sigma_khz")
        throw ParseError(file, 1,
                         "expected header 'power_uw,center_mhz,center_sigma_mhz,fwhm_khz,fwhm_sigma_khz'");
    analysis::PowerSeries series;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        if (trim(lines[row]).empty()) continue;
        const int ln = static_cast<int>(row + 1);
        const auto fields = split(lines[row], ',');
        if (fields.size() != 5) throw ParseError(file, ln, "expected 5 comma-separated fields");
        analysis::PowerPoint p;
        p.power_uw = parse_double(file, ln, fields[0], "power_uw");
        p.center_mhz.value = parse_double(file, ln, fields[1], "center_mhz");
        p.center_mhz.sigma =
            trim(fields[2]).empty() ? 0.0 : parse_double(file, ln, fields[2], "center_sigma_mhz");
        p.fwhm_khz.value = parse_double(file, ln, fields[3], "fwhm_khz");
        p.fwhm_khz.sigma =
            trim(fields[4]).empty() ? 0.0 : parse_double(file, ln, fields[4], "fwhm_sigma_khz");
        series.push_back(p);
    }
    if (series.empty()) throw ParseError(file, 1, "no data rows");
    return series;
}

void write_power_series(const analysis::PowerSeries& series, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "power_uw,center_mhz,center_sigma_mhz,fwhm_khz,fwhm_sigma_khz\n";
    for (const auto& p : series)
        out << fmt(p.power_uw) << "," << fmt(p.center_mhz.value) << "," << fmt(p.center_mhz.sigma)
            << "," << fmt(p.fwhm_khz.value) << "," << fmt(p.fwhm_khz.sigma) << "\n";
    write_text(path, out.str());
}

std::string peaks_to_json_lines(const std::vector<peaks::PeakFit>& fits, bool ambiguous) {
    std::ostringstream out;
    for (const auto& f : fits) {
        json j;
        j["center_mhz"] = f.center_mhz.value;
        j["center_sigma_mhz"] = f.center_mhz.sigma;
        j["fwhm_khz"] = f.fwhm_khz.value;
        j["fwhm_sigma_khz"] = f.fwhm_khz.sigma;
        j["amplitude"] = f.amplitude.value;
        j["amplitude_sigma"] = f.amplitude.sigma;
        if (f.label)
            j["label"] = levels::to_string(*f.label);
        else
            j["label"] = nullptr;
        j["chi2_reduced"] = f.chi2_reduced;
        j["prominence"] = f.prominence;
        j["ambiguous"] = ambiguous;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<peaks::PeakFit> peaks_from_json_lines(const std::string& text) {
    std::vector<peaks::PeakFit> fits;
    std::istringstream in(text);
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("<peaks>", ln, e.what());
        }
        peaks::PeakFit f;
        f.center_mhz = {j.at("center_mhz").get<double>(), j.value("center_sigma_mhz", 0.0)};
        f.fwhm_khz = {j.at("fwhm_khz").get<double>(), j.value("fwhm_sigma_khz", 0.0)};
        f.amplitude = {j.value("amplitude", 0.0), j.value("amplitude_sigma", 0.0)};
        f.chi2_reduced = j.value("chi2_reduced", 0.0);
        f.prominence = j.value("prominence", 0.0);
        if (j.contains("label") && j["label"].is_string()) {
            const std::string name = j["label"].get<std::string>();
            for (auto label : {levels::PeakLabel::L3, levels::PeakLabel::L2, levels::PeakLabel::L1,
                               levels::PeakLabel::C, levels::PeakLabel::H1, levels::PeakLabel::H2,
                               levels::PeakLabel::H3})
                if (name == levels::to_string(label)) f.label = label;
        }
        fits.push_back(f);
    }
    return fits;
}

std::string trace_to_json(const minimize::MinimizeTrace& trace) {
    json j;
    j["schema"] = "minimize-trace/v1";
    j["ok"] = trace.ok;
    j["message"] = trace.message;
    j["steps"] = json::array();
    for (const auto& s : trace.steps) {
        json step;
        step["round"] = s.round;
        step["axis"] = axis_name(s.axis);
        step["currents_before_a"] = {{"x", s.currents_before.x},
                                     {"y", s.currents_before.y},
                                     {"z", s.currents_before.z}};
        step["samples"] = json::array();
        for (const auto& sm : s.samples)
            step["samples"].push_back({{"current_a", sm.current_a},
                                       {"metric", sm.metric},
                                       {"sigma", sm.sigma},
                                       {"n_peaks", sm.n_peaks},
                                       {"used", sm.used}});
        step["chosen_current_a"] = s.chosen_current_a;
        step["splitting_at_min"] = {{"value", s.splitting_at_min.value},
                                    {"sigma", s.splitting_at_min.sigma}};
        step["field_at_min_g"] = {{"value", s.field_at_min_g.value},
                                  {"sigma", s.field_at_min_g.sigma}};
        step["ok"] = s.ok;
        step["message"] = s.message;
        j["steps"].push_back(step);
    }
    j["round_field_estimate_g"] = trace.round_field_estimate_g;
    j["final_currents_a"] = {{"x", trace.final_currents_a.x},
                             {"y", trace.final_currents_a.y},
                             {"z", trace.final_currents_a.z}};
    j["final_field_g"] = {{"value", trace.final_field_g.value},
                          {"sigma", trace.final_field_g.sigma}};
    return j.dump(2) + "\n";
}

namespace {

std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
    const auto lines = read_lines(path);
    std::map<std::string, std::string> kv;
    for (std::size_t row = 0; row < lines.size(); ++row) {
        const std::string line = trim(lines[row]);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string(), static_cast<int>(row + 1), "expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

class ConfigReader {
public:
    ConfigReader(const std::filesystem::path& path)
        : file_(path.string()), kv_(read_config(path)) {}

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        auto it = kv_.find(key);
        if (it == kv_.end()) {
            if (fallback) return *fallback;
            throw ParseError(file_, 0, "missing key '" + key + "'");
        }
        seen_.push_back(key);
        return parse_double(file_, 0, it->second, key);
    }

    std::string text(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        seen_.push_back(key);
        return it->second;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : kv_)
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                throw ParseError(file_, 0, "unknown key '" + key + "'");
    }

private:
    std::string file_;
    std::map<std::string, std::string> kv_;
    mutable std::vector<std::string> seen_;
};

levels::LineSelection parse_mode(const std::string& file, const std::string& text) {
    if (text == "all") return levels::LineSelection::all;
    if (text == "sigma_plus") return levels::LineSelection::sigma_plus_only;
    if (text == "sigma_minus") return levels::LineSelection::sigma_minus_only;
    throw ParseError(file, 0, "mode must be all, sigma_plus or sigma_minus (got '" + text + "')");
}

}  // namespace

synth::Environment read_environment_config(const std::filesystem::path& path) {
    ConfigReader cfg(path);
    synth::Environment env;
    env.ambient_field_g = {cfg.number("ambient_bx_g", 0.0), cfg.number("ambient_by_g", 0.0),
                           cfg.number("ambient_bz_g", 0.0)};
    const char* axes[3] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        env.calibration_truth.axes[a].slope_g_per_a.value =
            cfg.number(std::string("k_") + axes[a] + "_g_per_a");
        env.calibration_truth.axes[a].zero_current_a.value =
            cfg.number(std::string("i0_") + axes[a] + "_a", 0.0);
    }
    env.gradient_g_per_mm = cfg.number("gradient_g_per_mm", 0.0);
    env.ensemble_length_mm = cfg.number("ensemble_length_mm", 2.0);
    cfg.reject_unknown();
    return env;
}

synth::BeamConfig read_beam_config(const std::filesystem::path& path) {
    ConfigReader cfg(path);
    synth::BeamConfig beam;
    beam.power_uw = cfg.number("power_uw", beam.power_uw);
    beam.polarization_mode = parse_mode(path.string(), cfg.text("mode", "all"));
    beam.lightshift_mhz_per_uw = cfg.number("lightshift_mhz_per_uw", beam.lightshift_mhz_per_uw);
    beam.broadening_khz_per_uw = cfg.number("broadening_khz_per_uw", beam.broadening_khz_per_uw);
    beam.base_linewidth_khz = cfg.number("base_linewidth_khz", beam.base_linewidth_khz);
    beam.f_zero_power_mhz = cfg.number("f_zero_power_mhz", beam.f_zero_power_mhz);
    cfg.reject_unknown();
    return beam;
}

minimize::MinimizeConfig read_minimize_config(const std::filesystem::path& path) {
    ConfigReader cfg(path);
    minimize::MinimizeConfig mc;

    const std::string order = cfg.text("axis_order", "xyz");
    if (order.size() != 3) throw ParseError(path.string(), 0, "axis_order must be 3 letters");
    for (int i = 0; i < 3; ++i) {
        switch (order[i]) {
        case 'x': mc.axis_order[i] = Axis::X; break;
        case 'y': mc.axis_order[i] = Axis::Y; break;
        case 'z': mc.axis_order[i] = Axis::Z; break;
        default: throw ParseError(path.string(), 0, "axis_order letters must be x, y or z");
        }
    }
    mc.sweep_points = static_cast<int>(cfg.number("sweep_points", mc.sweep_points));
    mc.sweep_span_a[0] = cfg.number("sweep_span_x_a", mc.sweep_span_a[0]);
    mc.sweep_span_a[1] = cfg.number("sweep_span_y_a", mc.sweep_span_a[1]);
    mc.sweep_span_a[2] = cfg.number("sweep_span_z_a", mc.sweep_span_a[2]);
    mc.rounds = static_cast<int>(cfg.number("rounds", mc.rounds));

    const std::string powers = cfg.text("power_schedule_uw", "70,6");
    mc.power_schedule.clear();
    for (const auto& item : split(powers, ','))
        mc.power_schedule.push_back(parse_double(path.string(), 0, item, "power_schedule_uw"));

    const std::string metric = cfg.text("metric", "fitted_b_magnitude");
    if (metric == "max_peak_spread")
        mc.metric = minimize::SplittingMetric::max_peak_spread;
    else if (metric == "fitted_b_magnitude")
        mc.metric = minimize::SplittingMetric::fitted_b_magnitude;
    else
        throw ParseError(path.string(), 0, "unknown metric '" + metric + "'");

    mc.start_currents_a = {cfg.number("start_ix_a", 0.0), cfg.number("start_iy_a", 0.0),
                           cfg.number("start_iz_a", 0.0)};
    mc.counts_per_point = cfg.number("counts_per_point", mc.counts_per_point);
    mc.grid_step_mhz = cfg.number("grid_step_mhz", mc.grid_step_mhz);
    mc.window_margin_mhz = cfg.number("window_margin_mhz", mc.window_margin_mhz);
    mc.initial_field_bound_g = cfg.number("initial_field_bound_g", mc.initial_field_bound_g);
    mc.coil_slope_bound_g_per_a =
        cfg.number("coil_slope_bound_g_per_a", mc.coil_slope_bound_g_per_a);
    mc.min_prominence = cfg.number("min_prominence", mc.min_prominence);

    mc.beam.lightshift_mhz_per_uw = cfg.number("lightshift_mhz_per_uw", mc.beam.lightshift_mhz_per_uw);
    mc.beam.broadening_khz_per_uw = cfg.number("broadening_khz_per_uw", mc.beam.broadening_khz_per_uw);
    mc.beam.base_linewidth_khz = cfg.number("base_linewidth_khz", mc.beam.base_linewidth_khz);
    mc.beam.f_zero_power_mhz = cfg.number("f_zero_power_mhz", mc.beam.f_zero_power_mhz);
    cfg.reject_unknown();
    return mc;
}

}  // namespace bemag::io
