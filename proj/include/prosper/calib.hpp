#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "prosper/geom.hpp"
#include "prosper/robot.hpp"

namespace prosper {

/// One needle insertion seen by the 3-D ultrasound probe.
struct CalibrationObservation {
    JointConfig config;
    Vec3 tip_us = Vec3::Zero();
};

struct CalibrationResult {
    RigidTransform us_from_robot;
    double rms_residual = 0.0;
    std::vector<double> per_point_residuals;
};

/// Closed-form least-squares rigid fit of US-frame tips against FK tips.
/// Throws TooFewPoints (< 3) or DegenerateGeometry (collinear robot tips).
CalibrationResult solve_calibration(std::span<const CalibrationObservation> obs,
                                    const RobotDescription& robot = {});

Vec3 predict_tip_us(const JointConfig& q, const CalibrationResult& cal,
                    const RobotDescription& robot = {});

/// Synthetic water-phantom detections: true_T * FK(q).tip plus isotropic
/// Gaussian noise of sigma per axis. Deterministic for a given seed.
std::vector<CalibrationObservation> simulate_water_phantom(const RigidTransform& true_t,
                                                           std::span<const JointConfig> configs,
                                                           double noise_sigma, std::uint64_t rng_seed,
                                                           const RobotDescription& robot = {});

/// Default insertion poses: workspace center first, then box corners, then
/// seeded random reachable poses once the corners are used up.
std::vector<JointConfig> default_calibration_configs(std::size_t n, const RobotDescription& robot = {});

/// Axis-aligned box of needle-tip positions reachable with a horizontal needle.
Eigen::AlignedBox3d tip_workspace(const RobotDescription& robot = {});

/// Worst disagreement between two transforms over an n^3 lattice of the tip workspace.
double max_workspace_error(const RigidTransform& truth, const RigidTransform& estimate, int n = 20,
                           const RobotDescription& robot = {});

/// Fixed probe placement used by the CLI and the acceptance suite.
RigidTransform reference_us_from_robot();

}  // namespace prosper
