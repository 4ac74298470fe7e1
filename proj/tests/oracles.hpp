#pragma once

// Independent oracles and synthetic inputs shared by the unit tests and the
// acceptance run. None of these call the code they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "prosper/geom.hpp"
#include "prosper/robot.hpp"

namespace prosper::testing {

// Ray parity along +y from (x, -inf, z): sorted crossing heights of one column.
inline std::vector<double> column_crossings(const TriMesh& m, double x, double z)
{
    std::vector<double> ys;
    for (const Face& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        // 2-D barycentric in the x-z projection.
        const double det = (b.x() - a.x()) * (c.z() - a.z()) - (c.x() - a.x()) * (b.z() - a.z());
        if (std::abs(det) < 1e-15) continue;
        const double u = ((x - a.x()) * (c.z() - a.z()) - (c.x() - a.x()) * (z - a.z())) / det;
        const double v = ((b.x() - a.x()) * (z - a.z()) - (x - a.x()) * (b.z() - a.z())) / det;
        if (u < 0 || v < 0 || u + v > 1) continue;
        ys.push_back(a.y() + u * (b.y() - a.y()) + v * (c.y() - a.y()));
    }
    std::sort(ys.begin(), ys.end());
    return ys;
}

inline double monte_carlo_volume(const TriMesh& m, int columns, int per_column, std::uint64_t seed)
{
    const auto box = m.bounds();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(box.min().x(), box.max().x());
    std::uniform_real_distribution<double> uy(box.min().y(), box.max().y());
    std::uniform_real_distribution<double> uz(box.min().z(), box.max().z());
    long inside = 0;
    for (int c = 0; c < columns; ++c) {
        const double x = ux(rng), z = uz(rng);
        const auto ys = column_crossings(m, x, z);
        for (int s = 0; s < per_column; ++s) {
            const double y = uy(rng);
            const auto below = std::lower_bound(ys.begin(), ys.end(), y) - ys.begin();
            if (below % 2 == 1) ++inside;
        }
    }
    const double total = static_cast<double>(columns) * per_column;
    return box.volume() * static_cast<double>(inside) / total;
}

inline double point_segment_dist(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (a + t * ab - p).norm();
}

inline double point_triangle_dist(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 n = (b - a).cross(c - a).normalized();
    const double h = (p - a).dot(n);
    const Vec3 q = p - h * n;
    // inside test by same-side signs
    const double s0 = n.dot((b - a).cross(q - a));
    const double s1 = n.dot((c - b).cross(q - b));
    const double s2 = n.dot((a - c).cross(q - c));
    if (s0 >= 0 && s1 >= 0 && s2 >= 0) return std::abs(h);
    return std::min({point_segment_dist(p, a, b), point_segment_dist(p, b, c), point_segment_dist(p, c, a)});
}

// Distance along the segment is convex; golden-section search per triangle.
inline double brute_force_clearance(const Vec3& a, const Vec3& b, const TriMesh& m)
{
    double best = std::numeric_limits<double>::infinity();
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (const Face& f : m.faces) {
        const Vec3& v0 = m.vertices[f[0]];
        const Vec3& v1 = m.vertices[f[1]];
        const Vec3& v2 = m.vertices[f[2]];
        auto g = [&](double t) { return point_triangle_dist(a + t * (b - a), v0, v1, v2); };
        double lo = 0.0, hi = 1.0;
        double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
        double f1 = g(x1), f2 = g(x2);
        for (int it = 0; it < 90; ++it) {
            if (f1 < f2) {
                hi = x2; x2 = x1; f2 = f1; x1 = hi - phi * (hi - lo); f1 = g(x1);
            } else {
                lo = x1; x1 = x2; f1 = f2; x2 = lo + phi * (hi - lo); f2 = g(x2);
            }
        }
        best = std::min({best, f1, f2, g(0.0), g(1.0)});
    }
    return best;
}

inline JointConfig random_config(std::mt19937_64& rng, const JointLimits& lim)
{
    auto u = [&](const JointRange& r) { return std::uniform_real_distribution<double>(r.min, r.max)(rng); };
    JointConfig q;
    q.x = u(lim.x);
    q.y = u(lim.y);
    q.z = u(lim.z);
    q.pan = u(lim.pan);
    q.tilt = u(lim.tilt);
    q.depth = u(lim.depth);
    q.spin_rate = std::uniform_real_distribution<double>(0.0, 100.0)(rng);
    return q;
}

// Smooth bounded-gradient warp followed by a rigid motion.
inline Vec3 warp(const Vec3& v)
{
    static const RigidTransform g = RigidTransform::from_axis_angle(Vec3(1, 0.3, 0.2), 0.3, Vec3(5, -3, 8));
    const Vec3 u(1.2 * std::sin(v.y() / 15.0), 1.0 * std::sin(v.z() / 12.0), 0.8 * std::sin(v.x() / 14.0));
    return g.apply(v + u);
}

inline TriMesh warped(const TriMesh& m)
{
    TriMesh out = m;
    for (auto& v : out.vertices) v = warp(v);
    return out;
}

inline std::vector<int> spread_vertices(const TriMesh& m, std::size_t count)
{
    // farthest-point selection over vertices, deterministic from vertex 0
    std::vector<int> picked{0};
    std::vector<double> d(m.vertices.size(), std::numeric_limits<double>::infinity());
    while (picked.size() < count) {
        int best = 0;
        for (std::size_t i = 0; i < m.vertices.size(); ++i) {
            d[i] = std::min(d[i], (m.vertices[i] - m.vertices[picked.back()]).norm());
            if (d[i] > d[best]) best = static_cast<int>(i);
        }
        picked.push_back(best);
    }
    return picked;
}

}  // namespace prosper::testing
