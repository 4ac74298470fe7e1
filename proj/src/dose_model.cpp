#include "prosper/dose_model.hpp"

#include <algorithm>
#include <cmath>

namespace prosper {

std::vector<std::string> DoseParams::violations() const
{
    std::vector<std::string> out;
    if (!(dose_rate_constant > 0.0)) out.emplace_back("dose_rate_constant must be > 0");
    if (!(prescription_gy > 0.0)) out.emplace_back("prescription must be > 0");
    if (!(integration_factor_h > 0.0)) out.emplace_back("integration_factor must be > 0");
    if (radial_dose.size() < 2) {
        out.emplace_back("radial dose table needs at least two knots");
        return out;
    }
    for (std::size_t i = 1; i < radial_dose.size(); ++i) {
        if (!(radial_dose[i].first > radial_dose[i - 1].first)) {
            out.emplace_back("radial dose knots must be strictly increasing in r");
        }
    }
    if (radial_dose.front().first > 1.0 || radial_dose.back().first < 100.0) {
        out.emplace_back("radial dose table must cover [1, 100] mm");
    }
    if (std::abs(prosper::radial_dose(kReferenceDistanceMm, *this) - 1.0) > 1e-12) {
        out.emplace_back("radial dose must be normalized to g(10 mm) = 1");
    }
    return out;
}

double radial_dose(double r_mm, const DoseParams& params)
{
    const auto& t = params.radial_dose;
    if (r_mm <= t.front().first) return t.front().second;
    if (r_mm >= t.back().first) return t.back().second;
    const auto hi = std::upper_bound(t.begin(), t.end(), r_mm,
                                     [](double r, const auto& knot) { return r < knot.first; });
    const auto lo = hi - 1;
    const double w = (r_mm - lo->first) / (hi->first - lo->first);
    return lo->second + w * (hi->second - lo->second);
}

double point_source_dose(double r_mm, double strength, const DoseParams& params)
{
    const double r = std::max(r_mm, kDoseCapRadiusMm);
    const double geometry = (kReferenceDistanceMm / r) * (kReferenceDistanceMm / r);
    // cGy -> Gy
    return strength * params.dose_rate_constant * geometry * radial_dose(r, params) *
           params.integration_factor_h / 100.0;
}

double dose_at(const Vec3& p, std::span<const Seed> seeds, const DoseParams& params)
{
    double d = 0.0;
    for (const Seed& s : seeds) d += point_source_dose((p - s.position).norm(), s.strength, params);
    return d;
}

}  // namespace prosper
