#pragma once

#include <numbers>
#include <string>
#include <vector>

#include "prosper/geom.hpp"

namespace prosper {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Articulation of the insertion robot.
///
/// The placement module is a Cartesian carriage followed by a pan/tilt wrist.
/// Carriage axes are named in the carriage's own frame: `x` is lateral, `y`
/// is elevation and `z` is the approach stand-off along the needle axis. In
/// the robot frame they map to x, z and y respectively (robot +y points from
/// the perineum plane into the patient, +z is anterior).
struct JointConfig {
    double x = 0.0;          ///< mm
    double y = 0.0;          ///< mm
    double z = 0.0;          ///< mm
    double pan = 0.0;        ///< rad, about robot z
    double tilt = 0.0;       ///< rad, elevation of the needle axis
    double depth = 0.0;      ///< mm, insertion translation
    double spin_rate = 0.0;  ///< rad/s, axial needle rotation
};

struct JointRange {
    double min = 0.0;
    double max = 0.0;
    bool contains(double v, double tol = 1e-12) const { return v >= min - tol && v <= max + tol; }
};

struct JointLimits {
    JointRange x{-60.0, 60.0};
    JointRange y{-60.0, 60.0};
    JointRange z{-20.0, 20.0};
    JointRange pan{deg_to_rad(-30.0), deg_to_rad(30.0)};
    JointRange tilt{deg_to_rad(-30.0), deg_to_rad(30.0)};
    JointRange depth{0.0, 160.0};

    std::vector<std::string> violations() const;
    /// Name of the first joint outside its range, empty when all are inside.
    std::string first_violation(const JointConfig& q) const;
};

struct NeedlePose {
    Vec3 entry = Vec3::Zero();
    Vec3 direction = Vec3::UnitY();
    double depth = 0.0;
    double spin_rate = 0.0;

    Vec3 tip() const { return entry + depth * direction; }
    Vec3 point_at(double d) const { return entry + d * direction; }
};

/// Geometry of a particular robot build. Overridable from a robot document.
struct RobotDescription {
    JointLimits limits;
    /// Robot-frame position of the carriage zero.
    Vec3 carriage_origin = Vec3::Zero();
    /// Distance from the wrist pivot to the needle-guide exit (the entry point).
    double guide_length = 0.0;
    /// Template frame expressed in the robot frame.
    RigidTransform template_pose;
    double grid_pitch = 5.0;
    int grid_half_extent = 6;  ///< 13 x 13 holes

    std::vector<std::string> violations() const;
};

/// Unit needle axis for the given wrist angles (+y at pan = tilt = 0).
Vec3 needle_direction(double pan, double tilt);

/// Throws JointLimitViolation (subject = joint name).
NeedlePose forward_kinematics(const JointConfig& q, const RobotDescription& robot = {});

/// Closed-form inverse. Throws Unreachable with the saturating joint as subject.
JointConfig inverse_kinematics(const NeedlePose& pose, const RobotDescription& robot = {});

/// Hole (col, row) of the classical template, in the template frame:
/// entry (col * pitch, 0, row * pitch), horizontal direction +y.
NeedlePose grid_target(int col, int row, double grid_pitch = 5.0, int half_extent = 6);

/// Same hole, expressed in the robot frame through the template pose.
NeedlePose grid_target(const RobotDescription& robot, int col, int row);

bool workspace_contains(const NeedlePose& pose, const RobotDescription& robot = {});

}  // namespace prosper
