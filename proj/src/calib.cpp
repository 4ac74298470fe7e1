#include "prosper/calib.hpp"

#include <cmath>
#include <random>

#include "prosper/error.hpp"
#include "prosper/procrustes.hpp"

namespace prosper {

CalibrationResult solve_calibration(std::span<const CalibrationObservation> obs,
                                    const RobotDescription& robot)
{
    if (obs.size() < 3) {
        throw Error(Errc::TooFewPoints, "calibration needs at least 3 observations, got " +
                                            std::to_string(obs.size()));
    }
    std::vector<Vec3> robot_tips;
    std::vector<Vec3> us_tips;
    robot_tips.reserve(obs.size());
    us_tips.reserve(obs.size());
    for (const auto& o : obs) {
        robot_tips.push_back(forward_kinematics(o.config, robot).tip());
        us_tips.push_back(o.tip_us);
    }
    const Vec3 spread = spread_singular_values(robot_tips);
    if (spread[0] <= 0.0 || spread[1] <= 1e-9 * spread[0]) {
        throw Error(Errc::DegenerateGeometry, "robot-frame tips are collinear");
    }

    CalibrationResult out;
    out.us_from_robot = fit_rigid(robot_tips, us_tips);
    double sum_sq = 0.0;
    out.per_point_residuals.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double r = (us_tips[i] - out.us_from_robot.apply(robot_tips[i])).norm();
        out.per_point_residuals.push_back(r);
        sum_sq += r * r;
    }
    out.rms_residual = std::sqrt(sum_sq / static_cast<double>(obs.size()));
    return out;
}

Vec3 predict_tip_us(const JointConfig& q, const CalibrationResult& cal, const RobotDescription& robot)
{
    return cal.us_from_robot.apply(forward_kinematics(q, robot).tip());
}

std::vector<CalibrationObservation> simulate_water_phantom(const RigidTransform& true_t,
                                                           std::span<const JointConfig> configs,
                                                           double noise_sigma, std::uint64_t rng_seed,
                                                           const RobotDescription& robot)
{
    if (!(noise_sigma >= 0.0)) throw Error(Errc::InvalidArgument, "noise sigma must be >= 0");
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<CalibrationObservation> out;
    out.reserve(configs.size());
    for (const auto& q : configs) {
        Vec3 tip = true_t.apply(forward_kinematics(q, robot).tip());
        const double nx = noise(rng), ny = noise(rng), nz = noise(rng);
        tip += noise_sigma * Vec3(nx, ny, nz);
        out.push_back({q, tip});
    }
    return out;
}

std::vector<JointConfig> default_calibration_configs(std::size_t n, const RobotDescription& robot)
{
    const auto& lim = robot.limits;
    auto inset = [](const JointRange& r, double frac) {
        const double mid = 0.5 * (r.min + r.max);
        return std::pair{mid - frac * 0.5 * (r.max - r.min), mid + frac * 0.5 * (r.max - r.min)};
    };
    const auto [x_lo, x_hi] = inset(lim.x, 0.8);
    const auto [y_lo, y_hi] = inset(lim.y, 0.8);
    const auto [d_lo, d_hi] = inset(lim.depth, 0.75);

    std::vector<JointConfig> out;
    JointConfig center;
    center.x = 0.5 * (lim.x.min + lim.x.max);
    center.y = 0.5 * (lim.y.min + lim.y.max);
    center.z = 0.5 * (lim.z.min + lim.z.max);
    center.depth = 0.5 * (lim.depth.min + lim.depth.max);
    out.push_back(center);
    for (int corner = 0; corner < 8 && out.size() < n; ++corner) {
        JointConfig q = center;
        q.x = (corner & 1) ? x_hi : x_lo;
        q.y = (corner & 2) ? y_hi : y_lo;
        q.depth = (corner & 4) ? d_hi : d_lo;
        out.push_back(q);
    }
    std::mt19937_64 rng(0x5eed'ca1bULL);
    auto draw = [&](const JointRange& r, double frac) {
        const auto [lo, hi] = inset(r, frac);
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    while (out.size() < n) {
        JointConfig q;
        q.x = draw(lim.x, 0.8);
        q.y = draw(lim.y, 0.8);
        q.z = draw(lim.z, 0.8);
        q.pan = draw(lim.pan, 0.5);
        q.tilt = draw(lim.tilt, 0.5);
        q.depth = draw(lim.depth, 0.75);
        out.push_back(q);
    }
    out.resize(n);
    return out;
}

Eigen::AlignedBox3d tip_workspace(const RobotDescription& robot)
{
    const auto& lim = robot.limits;
    const Vec3 lo = robot.carriage_origin +
                    Vec3(lim.x.min, lim.z.min + robot.guide_length + lim.depth.min, lim.y.min);
    const Vec3 hi = robot.carriage_origin +
                    Vec3(lim.x.max, lim.z.max + robot.guide_length + lim.depth.max, lim.y.max);
    return {lo, hi};
}

double max_workspace_error(const RigidTransform& truth, const RigidTransform& estimate, int n,
                           const RobotDescription& robot)
{
    const auto box = tip_workspace(robot);
    const Vec3 span = box.max() - box.min();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                const Vec3 f(n > 1 ? double(i) / (n - 1) : 0.5, n > 1 ? double(j) / (n - 1) : 0.5,
                             n > 1 ? double(k) / (n - 1) : 0.5);
                const Vec3 p = box.min() + span.cwiseProduct(f);
                worst = std::max(worst, (truth.apply(p) - estimate.apply(p)).norm());
            }
        }
    }
    return worst;
}

RigidTransform reference_us_from_robot()
{
    return RigidTransform::from_axis_angle(Vec3(0.3, -1.0, 0.2), deg_to_rad(12.0),
                                           Vec3(4.0, -85.0, -32.0));
}

}  // namespace prosper
