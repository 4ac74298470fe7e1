#pragma once

#include <span>
#include <utility>
#include <vector>

#include "prosper/geom.hpp"

namespace prosper {

struct Seed {
    Vec3 position = Vec3::Zero();
    double strength = 0.5;  ///< air-kerma strength, U
};

/// Point-source dosimetry parameters. Defaults are conventional I-125 values.
struct DoseParams {
    double dose_rate_constant = 0.965;  ///< cGy h^-1 U^-1
    /// (r mm, g) knots, strictly increasing r, g(10 mm) == 1.
    std::vector<std::pair<double, double>> radial_dose = {
        {1.0, 1.055}, {5.0, 1.078}, {10.0, 1.000}, {20.0, 0.842},
        {30.0, 0.681}, {50.0, 0.418}, {100.0, 0.090},
    };
    double prescription_gy = 145.0;
    /// Hours that convert initial dose rate into total dose (mean life of I-125).
    double integration_factor_h = 1.44 * 59.4 * 24.0;

    /// Violated invariants; empty when valid.
    std::vector<std::string> violations() const;
};

inline constexpr double kReferenceDistanceMm = 10.0;
inline constexpr double kDoseCapRadiusMm = 0.5;

/// Radial dose function, linear between knots and clamped outside the table.
double radial_dose(double r_mm, const DoseParams& params);

/// Dose in Gy at r from a single source of the given strength.
double point_source_dose(double r_mm, double strength, const DoseParams& params);

/// Superposed total dose (Gy). Within 0.5 mm of a source the 0.5 mm value is used.
double dose_at(const Vec3& p, std::span<const Seed> seeds, const DoseParams& params);

}  // namespace prosper
