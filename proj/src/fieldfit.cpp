#include "bemag/fieldfit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "bemag/levels.hpp"

namespace bemag::fieldfit {

namespace {

constexpr double rate = levels::zeeman_rate_mhz_per_g;
constexpr double mag_floor_g = 1e-9;  // Jacobian floor at the |B| = 0 cone tip

void validate_etas(const std::vector<LabeledPoint>& points, const char* who) {
    for (const auto& p : points) {
        const double doubled = 2.0 * p.eta;
        if (std::abs(doubled - std::round(doubled)) > 1e-9 || std::abs(p.eta) > 1.5 + 1e-9)
            throw std::invalid_argument(std::string(who) +
                                        ": eta must be one of 0, +-1/2, +-1, +-3/2");
    }
}

// Per-point effective sigmas: unknown ones get the median of the known ones.
// Returns true when no point carried a sigma (covariance then needs the
// chi^2 rescaling of an unweighted fit).
bool effective_sigmas(const std::vector<LabeledPoint>& points, std::vector<double>& sigma) {
    std::vector<double> known;
    for (const auto& p : points)
        if (p.sigma_mhz > 0.0) known.push_back(p.sigma_mhz);
    if (known.empty()) {
        sigma.assign(points.size(), 1.0);
        return true;
    }
    std::nth_element(known.begin(), known.begin() + known.size() / 2, known.end());
    const double median = known[known.size() / 2];
    sigma.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        sigma[i] = points[i].sigma_mhz > 0.0 ? points[i].sigma_mhz : median;
    return false;
}

struct SettingGroup {
    Currents currents;
    std::vector<std::size_t> idx;
    double field_est = 0.0;   // |B| estimated from the line pattern
    double f0_est = 0.0;
    bool usable = false;
};

std::vector<SettingGroup> group_by_setting(const std::vector<LabeledPoint>& points) {
    auto key = [](const Currents& c) { return std::array<double, 3>{c.x, c.y, c.z}; };
    std::map<std::array<double, 3>, SettingGroup> groups;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& g = groups[key(points[i].currents_a)];
        g.currents = points[i].currents_a;
        g.idx.push_back(i);
    }
    std::vector<SettingGroup> out;
    for (auto& [k, g] : groups) out.push_back(std::move(g));
    return out;
}

// Straight-line fit f = eta*(1.4*|B|) + f0 within one setting: needs at
// least two distinct eta values.
void estimate_group_field(const std::vector<LabeledPoint>& points, SettingGroup& g) {
    std::vector<double> etas, freqs;
    for (std::size_t i : g.idx) {
        etas.push_back(points[i].eta);
        freqs.push_back(points[i].freq_mhz);
    }
    const auto [mn, mx] = std::minmax_element(etas.begin(), etas.end());
    if (etas.size() < 2 || *mx - *mn < 0.25) return;

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(etas.size());
    for (std::size_t i = 0; i < etas.size(); ++i) {
        sx += etas[i];
        sy += freqs[i];
        sxx += etas[i] * etas[i];
        sxy += etas[i] * freqs[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-12) return;
    const double slope = (n * sxy - sx * sy) / det;
    g.f0_est = (sxx * sy - sx * sxy) / det;
    g.field_est = std::abs(slope) / rate;
    g.usable = true;
}

// Quadratic least squares y = a x^2 + b x + c through plain normal equations.
bool quad_fit(const std::vector<double>& x, const std::vector<double>& y, double& a, double& b,
              double& c) {
    if (x.size() < 3) return false;
    std::vector<double> normal(9, 0.0), rhs(3, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double basis[3] = {x[i] * x[i], x[i], 1.0};
        for (int r = 0; r < 3; ++r) {
            rhs[r] += basis[r] * y[i];
            for (int s = 0; s < 3; ++s) normal[r * 3 + s] += basis[r] * basis[s];
        }
    }
    std::vector<double> sol;
    if (!lsq::detail::cholesky_solve(normal, rhs, 3, sol)) return false;
    a = sol[0];
    b = sol[1];
    c = sol[2];
    return true;
}

}  // namespace

CoilCalibration default_initial_guess(const std::vector<LabeledPoint>& points) {
    auto groups = group_by_setting(points);
    for (auto& g : groups) estimate_group_field(points, g);

    CoilCalibration guess;
    for (auto& ax : guess.axes) ax = {{1.0, 0.0}, {0.0, 0.0}};

    // f_offset: prefer eta = 0 lines, else the per-setting intercepts.
    std::vector<double> f0s;
    for (const auto& p : points)
        if (std::abs(p.eta) < 0.25) f0s.push_back(p.freq_mhz);
    if (f0s.empty())
        for (const auto& g : groups)
            if (g.usable) f0s.push_back(g.f0_est);
    if (!f0s.empty()) {
        std::nth_element(f0s.begin(), f0s.begin() + f0s.size() / 2, f0s.end());
        guess.f_offset_mhz.value = f0s[f0s.size() / 2];
    } else {
        guess.f_offset_mhz.value = levels::hyperfine_freq_nominal_mhz;
    }

    // Per axis: find the scan set (other two currents fixed) with the most
    // settings and fit |B|^2 as a parabola in the swept current.
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
        auto get = [&](const Currents& c) {
            switch (axis) {
            case Axis::X: return std::array<double, 3>{c.x, c.y, c.z};
            case Axis::Y: return std::array<double, 3>{c.y, c.x, c.z};
            default: return std::array<double, 3>{c.z, c.x, c.y};
            }
        };
        std::map<std::array<double, 2>, std::vector<const SettingGroup*>> sets;
        for (const auto& g : groups) {
            if (!g.usable) continue;
            const auto v = get(g.currents);
            sets[{v[1], v[2]}].push_back(&g);
        }
        const std::vector<const SettingGroup*>* best = nullptr;
        for (const auto& [k, v] : sets)
            if (!best || v.size() > best->size()) best = &v;
        if (!best || best->size() < 3) continue;

        std::vector<double> xs, ys;
        for (const auto* g : *best) {
            xs.push_back(get(g->currents)[0]);
            ys.push_back(g->field_est * g->field_est);
        }
        double a, b, c;
        if (quad_fit(xs, ys, a, b, c) && a > 1e-12) {
            guess.axis(axis).slope_g_per_a.value = std::sqrt(a);
            guess.axis(axis).zero_current_a.value = -b / (2.0 * a);
        }
    }
    return guess;
}

namespace {

// Shared residual/Jacobian machinery for both fit flavors. The model is
// f = eta*rate*|B(p)| + f_offset with parametrization-specific |B|.
struct GlobalModel {
    const std::vector<LabeledPoint>& pts;
    const std::vector<double>& sigma;

    double field_mag(const std::vector<double>& p, std::size_t i, double b[3]) const {
        const double cur[3] = {pts[i].currents_a.x, pts[i].currents_a.y, pts[i].currents_a.z};
        double sq = 0.0;
        for (int j = 0; j < 3; ++j) {
            b[j] = p[2 * j] * (cur[j] - p[2 * j + 1]);
            sq += b[j] * b[j];
        }
        return std::sqrt(sq);
    }

    void residuals(const std::vector<double>& p, std::vector<double>& r) const {
        double b[3];
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double model = pts[i].eta * rate * field_mag(p, i, b) + p[6];
            r[i] = (model - pts[i].freq_mhz) / sigma[i];
        }
    }

    void jacobian(const std::vector<double>& p, std::vector<double>& jac) const {
        double b[3];
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double mag = std::max(field_mag(p, i, b), mag_floor_g);
            const double cur[3] = {pts[i].currents_a.x, pts[i].currents_a.y, pts[i].currents_a.z};
            const double pref = pts[i].eta * rate / sigma[i];
            for (int j = 0; j < 3; ++j) {
                jac[i * 7 + 2 * j] = pref * b[j] * (cur[j] - p[2 * j + 1]) / mag;
                jac[i * 7 + 2 * j + 1] = pref * b[j] * (-p[2 * j]) / mag;
            }
            jac[i * 7 + 6] = 1.0 / sigma[i];
        }
    }
};

struct AxialModel {
    const std::vector<LabeledPoint>& pts;
    const std::vector<double>& sigma;
    // When set, the magnitude in the Jacobian is floored at each point's
    // noise resolution sigma_i/1.4: below it the sqrt vertex linearization
    // overstates the information and the quoted covariance undercovers.
    bool resolution_floor = false;

    // p = (k_z, i0_z, q, f0) with |B| = sqrt(k^2 (I-i0)^2 + q).
    void residuals(const std::vector<double>& p, std::vector<double>& r) const {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double bz = p[0] * (pts[i].currents_a.z - p[1]);
            const double mag = std::sqrt(std::max(bz * bz + p[2], 0.0));
            const double model = pts[i].eta * rate * mag + p[3];
            r[i] = (model - pts[i].freq_mhz) / sigma[i];
        }
    }

    void jacobian(const std::vector<double>& p, std::vector<double>& jac) const {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double di = pts[i].currents_a.z - p[1];
            const double bz = p[0] * di;
            const double floor =
                resolution_floor ? std::max(sigma[i] / rate, mag_floor_g) : mag_floor_g;
            const double mag = std::max(std::sqrt(std::max(bz * bz + p[2], 0.0)), floor);
            const double pref = pts[i].eta * rate / sigma[i];
            jac[i * 4 + 0] = pref * bz * di / mag;
            jac[i * 4 + 1] = pref * bz * (-p[0]) / mag;
            jac[i * 4 + 2] = pref * 0.5 / mag;
            jac[i * 4 + 3] = 1.0 / sigma[i];
        }
    }
};

// Reflect parameter j in the covariance (sign flip of one parameter).
void flip_covariance_row_col(std::vector<double>& cov, std::size_t m, std::size_t j) {
    for (std::size_t k = 0; k < m; ++k) {
        cov[j * m + k] = -cov[j * m + k];
        cov[k * m + j] = -cov[k * m + j];
    }
}

}  // namespace

GlobalFitResult fit_global(const std::vector<LabeledPoint>& points,
                           std::optional<CoilCalibration> init, const lsq::Options& options) {
    if (points.size() < 8)
        throw std::invalid_argument("fit_global: need at least 8 labeled points");
    validate_etas(points, "fit_global");

    std::vector<double> sigma;
    const bool unweighted = effective_sigmas(points, sigma);

    const CoilCalibration start_cal = init ? *init : default_initial_guess(points);
    std::vector<double> start = {start_cal.axis(Axis::X).slope_g_per_a.value,
                                 start_cal.axis(Axis::X).zero_current_a.value,
                                 start_cal.axis(Axis::Y).slope_g_per_a.value,
                                 start_cal.axis(Axis::Y).zero_current_a.value,
                                 start_cal.axis(Axis::Z).slope_g_per_a.value,
                                 start_cal.axis(Axis::Z).zero_current_a.value,
                                 start_cal.f_offset_mhz.value};

    GlobalModel model{points, sigma};
    auto res = lsq::fit(
        [&model](const std::vector<double>& p, std::vector<double>& r) { model.residuals(p, r); },
        [&model](const std::vector<double>& p, std::vector<double>& j) { model.jacobian(p, j); },
        start, points.size(), options);

    GlobalFitResult out;
    out.converged = res.converged;
    out.rank_deficient = res.rank_deficient;
    out.message = res.message;
    out.n_iterations = res.n_iterations;
    out.chi2_trace = std::move(res.chi2_trace);
    for (int idx : res.deficient_params) out.unidentifiable.push_back(global_param_names[idx]);

    // Only |B| is observable: report each slope on the branch of the guess.
    if (!res.covariance.empty())
        for (int j = 0; j < 3; ++j) {
            const std::size_t kj = 2 * j;
            if (start[kj] != 0.0 && res.params[kj] != 0.0 &&
                std::signbit(res.params[kj]) != std::signbit(start[kj])) {
                res.params[kj] = -res.params[kj];
                flip_covariance_row_col(res.covariance, 7, kj);
            }
        }

    const double cov_scale = unweighted ? res.chi2_reduced : 1.0;
    auto param = [&](std::size_t j) -> Uncertain {
        double s = 0.0;
        if (!res.covariance.empty()) s = std::sqrt(std::max(res.covariance[j * 7 + j] * cov_scale, 0.0));
        return {res.params[j], s};
    };

    CoilCalibration& cal = out.calibration;
    for (int j = 0; j < 3; ++j) {
        cal.axes[j].slope_g_per_a = param(2 * j);
        cal.axes[j].zero_current_a = param(2 * j + 1);
    }
    cal.f_offset_mhz = param(6);
    if (!res.covariance.empty())
        for (std::size_t i = 0; i < 49; ++i) cal.covariance[i] = res.covariance[i] * cov_scale;
    cal.chi2_reduced = res.chi2_reduced;
    cal.n_points = static_cast<int>(points.size());
    return out;
}

AxialFitResult fit_axial(const std::vector<LabeledPoint>& points,
                         std::optional<std::array<double, 4>> init, const lsq::Options& options) {
    if (points.size() < 5)
        throw std::invalid_argument("fit_axial: need at least 5 labeled points");
    validate_etas(points, "fit_axial");
    for (const auto& p : points)
        if (std::abs(p.currents_a.x - points.front().currents_a.x) > 1e-9 ||
            std::abs(p.currents_a.y - points.front().currents_a.y) > 1e-9)
            throw std::invalid_argument("fit_axial: points must share (I_x, I_y)");
    if (std::none_of(points.begin(), points.end(),
                     [](const LabeledPoint& p) { return std::abs(std::abs(p.eta) - 1.0) < 1e-9; }))
        throw std::invalid_argument("fit_axial: needs sigma lines (|eta| = 1)");

    std::vector<double> sigma;
    const bool unweighted = effective_sigmas(points, sigma);

    std::vector<double> start;
    if (init) {
        start.assign(init->begin(), init->end());
    } else {
        const CoilCalibration guess = default_initial_guess(points);
        auto groups = group_by_setting(points);
        double min_field = 0.0;
        for (auto& g : groups) {
            estimate_group_field(points, g);
            if (g.usable) min_field = std::min(min_field == 0.0 ? g.field_est : min_field, g.field_est);
        }
        start = {guess.axis(Axis::Z).slope_g_per_a.value, guess.axis(Axis::Z).zero_current_a.value,
                 min_field * min_field, guess.f_offset_mhz.value};
    }

    AxialModel model{points, sigma};
    auto res = lsq::fit(
        [&model](const std::vector<double>& p, std::vector<double>& r) { model.residuals(p, r); },
        [&model](const std::vector<double>& p, std::vector<double>& j) { model.jacobian(p, j); },
        start, points.size(), options);

    if (!res.rank_deficient && !res.covariance.empty()) {
        // Reporting covariance from the resolution-floored Jacobian.
        AxialModel floored{points, sigma, true};
        std::vector<double> jac(points.size() * 4);
        floored.jacobian(res.params, jac);
        std::vector<double> normal(16, 0.0);
        for (std::size_t i = 0; i < points.size(); ++i)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) normal[a * 4 + b] += jac[i * 4 + a] * jac[i * 4 + b];
        std::vector<double> cov;
        if (lsq::detail::invert_sym(normal, 4, cov)) res.covariance = std::move(cov);
    }

    AxialFitResult out;
    out.converged = res.converged;
    out.rank_deficient = res.rank_deficient;
    out.message = res.message;
    static constexpr std::array<const char*, 4> names = {"k_z", "i0_z", "b_perp_sq", "f_offset"};
    for (int idx : res.deficient_params) out.unidentifiable.push_back(names[idx]);

    if (!res.covariance.empty() && start[0] != 0.0 && res.params[0] != 0.0 &&
        std::signbit(res.params[0]) != std::signbit(start[0])) {
        res.params[0] = -res.params[0];
        flip_covariance_row_col(res.covariance, 4, 0);
    }

    const double cov_scale = unweighted ? res.chi2_reduced : 1.0;
    auto param = [&](std::size_t j) -> Uncertain {
        double s = 0.0;
        if (!res.covariance.empty()) s = std::sqrt(std::max(res.covariance[j * 4 + j] * cov_scale, 0.0));
        return {res.params[j], s};
    };
    out.k_z_g_per_a = param(0);
    out.i0_z_a = param(1);
    out.b_perp_sq_g2 = param(2);
    out.f_offset_mhz = param(3);
    if (!res.covariance.empty())
        for (std::size_t i = 0; i < 16; ++i) out.covariance[i] = res.covariance[i] * cov_scale;

    // Root-space report. The map q -> sqrt(q) degenerates at zero: once q is
    // consistent with zero the quoted scale is sqrt(sigma_q) instead of the
    // divergent delta-method value.
    const double q = out.b_perp_sq_g2.value;
    const double sq = out.b_perp_sq_g2.sigma;
    const double b = std::sqrt(std::max(q, 0.0));
    out.b_perp_g.value = b;
    out.b_perp_g.sigma = (q > 0.5 * sq && b > 0.0) ? sq / (2.0 * b) : std::sqrt(sq);

    out.chi2_reduced = res.chi2_reduced;
    out.n_points = static_cast<int>(points.size());
    return out;
}

ZeroCurrents currents_for_zero(const CoilCalibration& cal) {
    return {cal.axis(Axis::X).zero_current_a, cal.axis(Axis::Y).zero_current_a,
            cal.axis(Axis::Z).zero_current_a};
}

}  // namespace bemag::fieldfit
