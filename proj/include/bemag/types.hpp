#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace bemag {

// Value with 1-sigma uncertainty. sigma = 0 means "exact / not estimated".
struct Uncertain {
    double value = 0.0;
    double sigma = 0.0;
};

// Magnetic field vector in Gauss, lab frame (x horizontal, y vertical,
// z along the trap axis / beam propagation).
struct FieldVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double magnitude() const { return std::sqrt(x * x + y * y + z * z); }
};

// Coil currents in Ampere, one per coil pair.
struct Currents {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

enum class Axis { X = 0, Y = 1, Z = 2 };

inline const char* axis_name(Axis a) {
    switch (a) {
    case Axis::X: return "x";
    case Axis::Y: return "y";
    case Axis::Z: return "z";
    }
    return "?";
}

// One coil pair: B_j = slope * (I_j - zero_current).
struct CoilAxis {
    Uncertain slope_g_per_a;   // k_j
    Uncertain zero_current_a;  // I_j0, current that nulls this component
};

// Full affine currents -> field map with the common frequency offset of the
// global fit. Covariance is 7x7 row-major over the parameter order
//   (k_x, i0_x, k_y, i0_y, k_z, i0_z, f_offset).
struct CoilCalibration {
    std::array<CoilAxis, 3> axes;  // indexed by Axis
    Uncertain f_offset_mhz;
    std::array<double, 49> covariance{};
    double chi2_reduced = 0.0;
    int n_points = 0;

    const CoilAxis& axis(Axis a) const { return axes[static_cast<std::size_t>(a)]; }
    CoilAxis& axis(Axis a) { return axes[static_cast<std::size_t>(a)]; }

    FieldVector field_at(const Currents& i) const {
        auto comp = [&](Axis a, double cur) {
            const CoilAxis& c = axis(a);
            return c.slope_g_per_a.value * (cur - c.zero_current_a.value);
        };
        return {comp(Axis::X, i.x), comp(Axis::Y, i.y), comp(Axis::Z, i.z)};
    }
};

}  // namespace bemag
