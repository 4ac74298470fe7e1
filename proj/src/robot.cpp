#include "prosper/robot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prosper/error.hpp"

namespace prosper {

namespace {

void check_range(std::vector<std::string>& out, const char* name, const JointRange& r)
{
    if (!(r.min < r.max)) out.push_back(std::string("joint ") + name + ": min must be < max");
}

}  // namespace

std::vector<std::string> JointLimits::violations() const
{
    std::vector<std::string> out;
    check_range(out, "x", x);
    check_range(out, "y", y);
    check_range(out, "z", z);
    check_range(out, "pan", pan);
    check_range(out, "tilt", tilt);
    check_range(out, "depth", depth);
    if (depth.min < 0.0) out.emplace_back("joint depth: min must be >= 0");
    return out;
}

std::string JointLimits::first_violation(const JointConfig& q) const
{
    if (!pan.contains(q.pan)) return "pan";
    if (!tilt.contains(q.tilt)) return "tilt";
    if (!x.contains(q.x)) return "x";
    if (!y.contains(q.y)) return "y";
    if (!z.contains(q.z)) return "z";
    if (!depth.contains(q.depth) || q.depth < 0.0) return "depth";
    if (!(q.spin_rate >= 0.0)) return "spin_rate";
    return {};
}

std::vector<std::string> RobotDescription::violations() const
{
    auto out = limits.violations();
    if (guide_length < 0.0) out.emplace_back("guide_length must be >= 0");
    if (!(grid_pitch > 0.0)) out.emplace_back("grid_pitch must be > 0");
    if (grid_half_extent < 0) out.emplace_back("grid_half_extent must be >= 0");
    if (!template_pose.valid()) out.emplace_back("template_pose rotation must be unit-norm");
    return out;
}

Vec3 needle_direction(double pan, double tilt)
{
    // Rz(pan) * Rx(tilt) * +y
    return {-std::sin(pan) * std::cos(tilt), std::cos(pan) * std::cos(tilt), std::sin(tilt)};
}

NeedlePose forward_kinematics(const JointConfig& q, const RobotDescription& robot)
{
    if (const auto joint = robot.limits.first_violation(q); !joint.empty()) {
        throw Error(Errc::JointLimitViolation, "joint " + joint + " outside limits", joint);
    }
    NeedlePose pose;
    pose.direction = needle_direction(q.pan, q.tilt);
    const Vec3 pivot = robot.carriage_origin + Vec3(q.x, q.z, q.y);
    pose.entry = pivot + robot.guide_length * pose.direction;
    pose.depth = q.depth;
    pose.spin_rate = q.spin_rate;
    return pose;
}

JointConfig inverse_kinematics(const NeedlePose& pose, const RobotDescription& robot)
{
    const double n = pose.direction.norm();
    if (!(n > 0.0) || !pose.entry.allFinite()) {
        throw Error(Errc::InvalidArgument, "needle pose direction must be non-zero and finite");
    }
    const Vec3 d = pose.direction / n;
    JointConfig q;
    q.tilt = std::asin(std::clamp(d.z(), -1.0, 1.0));
    q.pan = std::atan2(-d.x(), d.y());
    const Vec3 pivot = pose.entry - robot.guide_length * d - robot.carriage_origin;
    q.x = pivot.x();
    q.y = pivot.z();
    q.z = pivot.y();
    q.depth = pose.depth;
    q.spin_rate = pose.spin_rate;
    if (const auto joint = robot.limits.first_violation(q); !joint.empty()) {
        std::ostringstream msg;
        msg << "pose requires joint " << joint << " beyond its limit";
        throw Error(Errc::Unreachable, msg.str(), joint);
    }
    return q;
}

NeedlePose grid_target(int col, int row, double grid_pitch, int half_extent)
{
    if (std::abs(col) > half_extent || std::abs(row) > half_extent) {
        std::ostringstream msg;
        msg << "template hole (" << col << ", " << row << ") outside +/-" << half_extent;
        throw Error(Errc::IndexOutOfGrid, msg.str());
    }
    NeedlePose pose;
    pose.entry = Vec3(col * grid_pitch, 0.0, row * grid_pitch);
    pose.direction = Vec3::UnitY();
    return pose;
}

NeedlePose grid_target(const RobotDescription& robot, int col, int row)
{
    NeedlePose pose = grid_target(col, row, robot.grid_pitch, robot.grid_half_extent);
    pose.entry = robot.template_pose.apply(pose.entry);
    pose.direction = robot.template_pose.apply_vector(pose.direction);
    return pose;
}

bool workspace_contains(const NeedlePose& pose, const RobotDescription& robot)
{
    try {
        inverse_kinematics(pose, robot);
        return true;
    } catch (const Error&) {
        return false;
    }
}

}  // namespace prosper
