#pragma once

// Shared fixtures for the unit tests.

#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include "prosper/error.hpp"
#include "prosper/geom.hpp"

namespace prosper::testing {

inline Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

inline Vec3 random_point(std::mt19937_64& rng, double half_extent)
{
    std::uniform_real_distribution<double> u(-half_extent, half_extent);
    return {u(rng), u(rng), u(rng)};
}

inline RigidTransform random_rigid(std::mt19937_64& rng, double max_translation = 100.0)
{
    std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
    return RigidTransform::from_axis_angle(random_unit(rng), angle(rng),
                                           random_point(rng, max_translation));
}

/// Error code thrown by `fn`, or nothing if it returned normally.
std::optional<Errc> code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline double rotation_angle_between(const RigidTransform& a, const RigidTransform& b)
{
    return a.rotation.angularDistance(b.rotation);
}

}  // namespace prosper::testing
