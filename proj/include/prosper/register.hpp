#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prosper/geom.hpp"

namespace prosper {

/// Thin-plate spline map with kernel U(r) = r:
///   phi(p) = A * [p; 1] + sum_j w_j * |p - c_j|
struct DeformationField {
    Eigen::MatrixX3d control_points;                       ///< m x 3, mm
    Eigen::MatrixX3d tps_weights;                          ///< m x 3
    Eigen::Matrix<double, 3, 4> affine_part = identity_affine();

    static Eigen::Matrix<double, 3, 4> identity_affine();
    static DeformationField identity() { return {}; }

    std::size_t control_count() const { return static_cast<std::size_t>(control_points.rows()); }
    std::vector<std::string> violations() const;
};

Vec3 apply_field(const DeformationField& field, const Vec3& p);
std::vector<Vec3> map_points(const DeformationField& field, std::span<const Vec3> points);
TriMesh apply_field(const DeformationField& field, const TriMesh& mesh);

/// Interpolating spline through `targets` at `control_points`.
DeformationField interpolating_field(const Eigen::MatrixX3d& control_points,
                                     const Eigen::MatrixX3d& targets);

struct RegistrationParams {
    double lambda_bend = 0.01;   ///< bending-energy weight
    double lambda_vol = 100.0;   ///< volume-penalty weight
    int max_iters = 100;
    double tol_mm = 1e-4;
    int n_control = 100;

    std::vector<std::string> violations() const;
};

struct RegistrationResult {
    DeformationField field;
    double surface_rms = 0.0;    ///< deformed source vertices to target surface, mm
    double volume_error = 0.0;   ///< V(phi(source)) / V(target) - 1
    int iterations = 0;
    bool converged = false;      ///< false: best-so-far after max_iters
    RigidTransform prealignment;
    std::vector<double> objective_trace;
    std::vector<double> rms_trace;
};

/// Elastic source -> target surface registration with a soft global volume
/// constraint. Throws NonClosedMesh, VolumeRatioOutOfRange, InvalidArgument.
RegistrationResult elastic_register(const TriMesh& source, const TriMesh& target,
                                    const RegistrationParams& params = {});

/// Rigid initialization: centroids, principal axes (best of the proper sign
/// choices), then point-to-surface ICP.
RigidTransform rigid_prealign(const TriMesh& source, const TriMesh& target, int icp_iterations = 50);

/// `count` vertex indices by farthest-point sampling starting at vertex 0.
std::vector<std::size_t> farthest_point_samples(std::span<const Vec3> points, std::size_t count);

}  // namespace prosper
