#include "prosper/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "prosper/error.hpp"
#include "prosper/kernels.hpp"

namespace prosper {

namespace {

constexpr double kMinFaceArea = 1e-9;

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c)
{
    return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

// --- transforms -------------------------------------------------------------

RigidTransform RigidTransform::from_matrix(const Mat3& r, const Vec3& t)
{
    RigidTransform out;
    out.rotation = Eigen::Quaterniond(r).normalized();
    out.translation = t;
    return out;
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad, const Vec3& t)
{
    RigidTransform out;
    out.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized()));
    out.translation = t;
    return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const
{
    RigidTransform out;
    out.rotation = (rotation * other.rotation).normalized();
    out.translation = rotation * other.translation + translation;
    return out;
}

RigidTransform RigidTransform::inverse() const
{
    RigidTransform out;
    out.rotation = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    return out;
}

Eigen::Matrix4d RigidTransform::matrix() const
{
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
}

bool RigidTransform::valid() const
{
    return std::abs(rotation.norm() - 1.0) <= 1e-9 && translation.allFinite();
}

SimilarityTransform SimilarityTransform::operator*(const SimilarityTransform& other) const
{
    // s1 R1 (s2 R2 p + t2) + t1
    SimilarityTransform out;
    out.scale = scale * other.scale;
    out.rigid.rotation = (rigid.rotation * other.rigid.rotation).normalized();
    out.rigid.translation = rigid.rotation * (scale * other.rigid.translation) + rigid.translation;
    return out;
}

SimilarityTransform SimilarityTransform::inverse() const
{
    SimilarityTransform out;
    out.scale = 1.0 / scale;
    out.rigid.rotation = rigid.rotation.conjugate();
    out.rigid.translation = -(out.rigid.rotation * rigid.translation) * out.scale;
    return out;
}

// --- mesh basics ------------------------------------------------------------

Vec3 TriMesh::vertex_centroid() const
{
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices) c += v;
    return vertices.empty() ? c : Vec3(c / static_cast<double>(vertices.size()));
}

Eigen::AlignedBox3d TriMesh::bounds() const
{
    Eigen::AlignedBox3d box;
    for (const auto& v : vertices) box.extend(v);
    return box;
}

std::vector<std::string> mesh_violations(const TriMesh& m)
{
    std::vector<std::string> out;
    const int nv = static_cast<int>(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        if (!m.vertices[i].allFinite()) out.push_back("non-finite vertex " + std::to_string(i));
    }
    if (m.faces.empty()) {
        out.emplace_back("OpenMesh: mesh has no faces");
        return out;
    }
    // Directed edge counts: a closed, consistently oriented 2-manifold uses each
    // directed edge exactly once and its reverse exactly once.
    std::map<std::pair<int, int>, int> directed;
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const Face& face = m.faces[f];
        bool bad_index = false;
        for (int k = 0; k < 3; ++k) {
            if (face[k] < 0 || face[k] >= nv) bad_index = true;
        }
        if (bad_index) {
            out.push_back("face " + std::to_string(f) + " has out-of-range vertex index");
            continue;
        }
        const double area = triangle_area(m.vertices[face[0]], m.vertices[face[1]], m.vertices[face[2]]);
        if (!(area > kMinFaceArea)) out.push_back("DegenerateFace at face " + std::to_string(f));
        for (int k = 0; k < 3; ++k) ++directed[{face[k], face[(k + 1) % 3]}];
    }
    if (!out.empty()) return out;
    for (const auto& [edge, count] : directed) {
        const auto rev = directed.find({edge.second, edge.first});
        const int rev_count = rev == directed.end() ? 0 : rev->second;
        if (rev_count == 0) {
            out.push_back("OpenMesh: boundary edge (" + std::to_string(edge.first) + "," +
                          std::to_string(edge.second) + ")");
        } else if (count != 1 || rev_count != 1) {
            out.push_back("OpenMesh: non-manifold or inconsistently oriented edge (" +
                          std::to_string(edge.first) + "," + std::to_string(edge.second) + ")");
        }
        if (out.size() > 16) break;
    }
    if (out.empty() && signed_volume(m) <= 0.0) {
        out.emplace_back("InvertedOrientation: signed volume is not positive");
    }
    return out;
}

void require_closed(const TriMesh& m)
{
    const auto problems = mesh_violations(m);
    if (problems.empty()) return;
    const std::string& first = problems.front();
    if (first.rfind("InvertedOrientation", 0) == 0) throw Error(Errc::InvertedOrientation, first);
    if (first.rfind("DegenerateFace", 0) == 0) throw Error(Errc::DegenerateFace, first);
    throw Error(Errc::OpenMesh, first);
}

double signed_volume(const TriMesh& m)
{
    double v = 0.0;
    for (const Face& f : m.faces) {
        v += m.vertices[f[0]].dot(m.vertices[f[1]].cross(m.vertices[f[2]]));
    }
    return v / 6.0;
}

double mesh_volume(const TriMesh& m)
{
    require_closed(m);
    return signed_volume(m);
}

Vec3 volume_centroid(const TriMesh& m)
{
    Vec3 acc = Vec3::Zero();
    double vol = 0.0;
    for (const Face& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        const double tet = a.dot(b.cross(c)) / 6.0;
        vol += tet;
        acc += tet * (a + b + c) / 4.0;
    }
    return std::abs(vol) > 0.0 ? Vec3(acc / vol) : m.vertex_centroid();
}

std::vector<Vec3> volume_gradient(const TriMesh& m)
{
    std::vector<Vec3> g(m.vertices.size(), Vec3::Zero());
    for (const Face& f : m.faces) {
        const Vec3& a = m.vertices[f[0]];
        const Vec3& b = m.vertices[f[1]];
        const Vec3& c = m.vertices[f[2]];
        g[f[0]] += b.cross(c) / 6.0;
        g[f[1]] += c.cross(a) / 6.0;
        g[f[2]] += a.cross(b) / 6.0;
    }
    return g;
}

TriMesh scale_to_volume_factor(const TriMesh& m, double factor)
{
    if (!(factor > 0.5 && factor <= 2.0)) {
        std::ostringstream msg;
        msg << "volume factor " << factor << " outside (0.5, 2.0]";
        throw Error(Errc::FactorOutOfRange, msg.str());
    }
    require_closed(m);
    if (factor == 1.0) return m;
    const double s = std::cbrt(factor);
    const Vec3 c = m.vertex_centroid();
    TriMesh out = m;
    for (auto& v : out.vertices) v = c + s * (v - c);
    return out;
}

TriMesh transformed(const TriMesh& m, const RigidTransform& t)
{
    TriMesh out = m;
    for (auto& v : out.vertices) v = t.apply(v);
    return out;
}

TriMesh transformed(const TriMesh& m, const SimilarityTransform& t)
{
    TriMesh out = m;
    for (auto& v : out.vertices) v = t.apply(v);
    if (t.scale <= 0.0) throw Error(Errc::InvalidArgument, "similarity scale must be positive");
    return out;
}

// --- triangle primitives ----------------------------------------------------

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* barycentric)
{
    // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
    auto finish = [&](double u, double v, double w) {
        if (barycentric) *barycentric = Vec3(u, v, w);
        return Vec3(u * a + v * b + w * c);
    };
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return finish(1, 0, 0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return finish(0, 1, 0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return finish(1 - v, v, 0);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return finish(0, 0, 1);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return finish(1 - w, 0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(0, 1 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return finish(1 - v - w, v, w);
}

double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1)
{
    const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    double s = 0.0, t = 0.0;
    constexpr double eps = 1e-300;
    if (a <= eps && e <= eps) return r.norm();
    if (a <= eps) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= eps) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

std::optional<double> segment_triangle_intersection(const Vec3& a, const Vec3& b, const Vec3& v0,
                                                    const Vec3& v1, const Vec3& v2)
{
    const Vec3 dir = b - a;
    const Vec3 e1 = v1 - v0, e2 = v2 - v0;
    const Vec3 h = dir.cross(e2);
    const double det = e1.dot(h);
    const double scale = e1.norm() * e2.norm() * dir.norm();
    if (std::abs(det) <= 1e-14 * scale) return std::nullopt;  // parallel
    const double inv = 1.0 / det;
    const Vec3 s = a - v0;
    const double u = inv * s.dot(h);
    if (u < 0.0 || u > 1.0) return std::nullopt;
    const Vec3 q = s.cross(e1);
    const double v = inv * dir.dot(q);
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    const double t = inv * e2.dot(q);
    if (t < 0.0 || t > 1.0) return std::nullopt;
    return t;
}

double segment_triangle_distance(const Vec3& a, const Vec3& b, const Vec3& v0, const Vec3& v1,
                                 const Vec3& v2)
{
    if (segment_triangle_intersection(a, b, v0, v1, v2)) return 0.0;
    // Without a crossing, the minimum is attained at a segment endpoint or on a
    // triangle edge.
    double d = (closest_point_on_triangle(a, v0, v1, v2) - a).norm();
    d = std::min(d, (closest_point_on_triangle(b, v0, v1, v2) - b).norm());
    d = std::min(d, segment_segment_distance(a, b, v0, v1));
    d = std::min(d, segment_segment_distance(a, b, v1, v2));
    d = std::min(d, segment_segment_distance(a, b, v2, v0));
    return d;
}

// --- mesh queries -----------------------------------------------------------

Clearance segment_mesh_clearance(const Vec3& a, const Vec3& b, const TriMesh& m)
{
    if ((b - a).norm() <= 1e-12) throw Error(Errc::DegenerateSegment, "segment endpoints coincide");
    return kernels::parallel::segment_clearance(a, b, m);
}

SurfacePoint closest_point_on_mesh(const Vec3& p, const TriMesh& m)
{
    SurfacePoint best;
    best.distance = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        const Face& face = m.faces[f];
        Vec3 bary;
        const Vec3 q = closest_point_on_triangle(p, m.vertices[face[0]], m.vertices[face[1]],
                                                 m.vertices[face[2]], &bary);
        const double d = (q - p).norm();
        if (d < best.distance) {
            best = {q, static_cast<int>(f), bary, d};
        }
    }
    return best;
}

bool point_in_mesh(const Vec3& p, const TriMesh& m)
{
    // Sum of signed solid angles (Van Oosterom & Strackee).
    double total = 0.0;
    for (const Face& f : m.faces) {
        const Vec3 a = m.vertices[f[0]] - p;
        const Vec3 b = m.vertices[f[1]] - p;
        const Vec3 c = m.vertices[f[2]] - p;
        const double la = a.norm(), lb = b.norm(), lc = c.norm();
        const double num = a.dot(b.cross(c));
        const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
        total += 2.0 * std::atan2(num, den);
    }
    return total / (4.0 * std::numbers::pi) > 0.5;
}

std::vector<double> line_mesh_crossings(const Vec3& origin, const Vec3& dir, const TriMesh& m)
{
    std::vector<double> ts;
    for (const Face& f : m.faces) {
        const Vec3& v0 = m.vertices[f[0]];
        const Vec3 e1 = m.vertices[f[1]] - v0, e2 = m.vertices[f[2]] - v0;
        const Vec3 h = dir.cross(e2);
        const double det = e1.dot(h);
        if (std::abs(det) <= 1e-14 * e1.norm() * e2.norm() * dir.norm()) continue;
        const double inv = 1.0 / det;
        const Vec3 s = origin - v0;
        const double u = inv * s.dot(h);
        if (u < 0.0 || u > 1.0) continue;
        const Vec3 q = s.cross(e1);
        const double v = inv * dir.dot(q);
        if (v < 0.0 || u + v > 1.0) continue;
        ts.push_back(inv * e2.dot(q));
    }
    std::sort(ts.begin(), ts.end());
    return ts;
}

double segment_inside_length(const Vec3& a, const Vec3& b, const TriMesh& m)
{
    const Vec3 dir = b - a;
    const double len = dir.norm();
    if (len <= 0.0) return 0.0;
    std::vector<double> ts = line_mesh_crossings(a, dir, m);
    // Collapse duplicate hits on shared edges.
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-12; }),
             ts.end());
    double inside = 0.0;
    if (ts.size() % 2 == 0) {
        for (std::size_t i = 0; i + 1 < ts.size(); i += 2) {
            const double lo = std::max(ts[i], 0.0);
            const double hi = std::min(ts[i + 1], 1.0);
            if (hi > lo) inside += hi - lo;
        }
        return inside * len;
    }
    // Odd parity (grazing hit): classify sub-intervals by winding number.
    std::vector<double> cuts{0.0};
    for (double t : ts) {
        if (t > 0.0 && t < 1.0) cuts.push_back(t);
    }
    cuts.push_back(1.0);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        if (point_in_mesh(a + mid * dir, m)) inside += cuts[i + 1] - cuts[i];
    }
    return inside * len;
}

// --- generators -------------------------------------------------------------

TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) v.normalize();
    std::vector<Face> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int i, int j) {
            const auto key = std::minmax(i, j);
            const auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back((verts[i] + verts[j]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(faces.size() * 4);
        for (const Face& f : faces) {
            const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        faces = std::move(next);
    }
    TriMesh m;
    m.vertices.reserve(verts.size());
    for (const auto& v : verts) m.vertices.push_back(center + radius * v);
    m.faces = std::move(faces);
    return m;
}

TriMesh make_box(const Vec3& lo, const Vec3& hi)
{
    TriMesh m;
    for (int i = 0; i < 8; ++i) {
        m.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                                (i & 4) ? hi.z() : lo.z());
    }
    m.faces = {
        {0, 2, 1}, {1, 2, 3},  // z = lo
        {4, 5, 6}, {5, 7, 6},  // z = hi
        {0, 1, 4}, {1, 5, 4},  // y = lo
        {2, 6, 3}, {3, 6, 7},  // y = hi
        {0, 4, 2}, {2, 4, 6},  // x = lo
        {1, 3, 5}, {3, 7, 5},  // x = hi
    };
    return m;
}

}  // namespace prosper
