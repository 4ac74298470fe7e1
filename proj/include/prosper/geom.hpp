#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace prosper {

/// Positions and displacements, always in millimeters.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Proper rigid motion: p -> R p + t. The quaternion is kept unit-norm.
struct RigidTransform {
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }
    static RigidTransform from_matrix(const Mat3& r, const Vec3& t);
    static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad,
                                          const Vec3& t = Vec3::Zero());

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 apply_vector(const Vec3& v) const { return rotation * v; }
    /// (a * b).apply(p) == a.apply(b.apply(p))
    RigidTransform operator*(const RigidTransform& other) const;
    RigidTransform inverse() const;
    Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
    Eigen::Matrix4d matrix() const;
    bool valid() const;
};

/// p -> s R p + t
struct SimilarityTransform {
    double scale = 1.0;
    RigidTransform rigid;

    static SimilarityTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rigid.rotation * (scale * p) + rigid.translation; }
    SimilarityTransform operator*(const SimilarityTransform& other) const;
    SimilarityTransform inverse() const;
    bool valid() const { return scale > 0.0 && rigid.valid(); }
};

inline Vec3 apply_transform(const RigidTransform& t, const Vec3& p) { return t.apply(p); }
inline Vec3 apply_transform(const SimilarityTransform& t, const Vec3& p) { return t.apply(p); }

using Face = std::array<int, 3>;

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
    Vec3 vertex_centroid() const;
    Eigen::AlignedBox3d bounds() const;
};

/// Every violated mesh invariant, one message per problem. Empty for a valid
/// closed, outward-oriented, non-degenerate mesh.
std::vector<std::string> mesh_violations(const TriMesh& m);

/// Throws OpenMesh, DegenerateFace or InvertedOrientation.
void require_closed(const TriMesh& m);

/// Divergence-theorem volume without validity checks (may be negative).
double signed_volume(const TriMesh& m);

/// Volume of a closed, outward-oriented mesh in mm^3.
double mesh_volume(const TriMesh& m);

/// Centroid of the enclosed solid.
Vec3 volume_centroid(const TriMesh& m);

/// Gradient of signed_volume with respect to every vertex position.
std::vector<Vec3> volume_gradient(const TriMesh& m);

/// Uniform scaling about the vertex centroid so that the volume changes by
/// `factor`, which must lie in (0.5, 2.0].
TriMesh scale_to_volume_factor(const TriMesh& m, double factor);

TriMesh transformed(const TriMesh& m, const RigidTransform& t);
TriMesh transformed(const TriMesh& m, const SimilarityTransform& t);

struct Clearance {
    double min_distance = 0.0;
    bool intersects = false;
};

/// Exact minimum distance between segment [a, b] and the mesh triangles.
Clearance segment_mesh_clearance(const Vec3& a, const Vec3& b, const TriMesh& m);

struct SurfacePoint {
    Vec3 point = Vec3::Zero();
    int face = -1;
    Vec3 barycentric = Vec3::Zero();
    double distance = 0.0;
};

// Triangle primitives.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                               Vec3* barycentric = nullptr);
double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);
/// Parameter s in [0,1] where the segment crosses the triangle, if it does.
std::optional<double> segment_triangle_intersection(const Vec3& a, const Vec3& b, const Vec3& v0,
                                                    const Vec3& v1, const Vec3& v2);
double segment_triangle_distance(const Vec3& a, const Vec3& b, const Vec3& v0, const Vec3& v1,
                                 const Vec3& v2);

SurfacePoint closest_point_on_mesh(const Vec3& p, const TriMesh& m);

/// Generalized winding number test; robust for closed meshes.
bool point_in_mesh(const Vec3& p, const TriMesh& m);

/// Sorted ray parameters t where origin + t*dir crosses a face (t unrestricted).
std::vector<double> line_mesh_crossings(const Vec3& origin, const Vec3& dir, const TriMesh& m);

/// Length of segment [a, b] lying inside the closed mesh.
double segment_inside_length(const Vec3& a, const Vec3& b, const TriMesh& m);

// Primitive generators used by fixtures and scenarios.
TriMesh make_icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());
TriMesh make_box(const Vec3& lo, const Vec3& hi);

}  // namespace prosper
