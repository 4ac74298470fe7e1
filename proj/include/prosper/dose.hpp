#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prosper/dose_model.hpp"
#include "prosper/geom.hpp"
#include "prosper/robot.hpp"

namespace prosper {

/// One needle: its pose (depth = deepest seed) and the seed depths along it,
/// deepest first, which is the deposit order.
struct Trajectory {
    NeedlePose pose;
    std::vector<double> seed_depths;
    int col = 0;               ///< template hole
    int row = 0;
    double tilt = 0.0;         ///< rad, relative to the horizontal hole axis

    std::vector<std::string> violations() const;
};

/// Needle through template hole (col, row), tilted by `tilt` rad, with the
/// given seed depths (sorted deepest first; pose depth = deepest seed).
Trajectory make_trajectory(const RobotDescription& robot, int col, int row, double tilt,
                           std::vector<double> seed_depths);

struct PlanMetrics {
    double d90 = 0.0;          ///< Gy
    double v100 = 0.0;         ///< fraction of target volume at or above prescription
    int seed_count = 0;
    int sample_count = 0;
};

enum class PlanMode { grid, oblique };

std::string to_string(PlanMode mode);
PlanMode plan_mode_from_string(const std::string& s);  ///< throws InvalidArgument

struct PlanConstraints {
    int max_seeds = 150;
    double margin = 2.0;              ///< mm, required arch clearance
    double seed_strength = 0.5;       ///< U
    double site_spacing = 5.0;        ///< mm, depth lattice along each needle
    double min_seed_separation = 4.0; ///< mm, between any two seeds
    double target_v100 = 0.95;
    std::vector<double> oblique_tilts_deg{0.0, -10.0, 10.0, -15.0, 15.0};
    int n_samples = 10000;
    std::uint64_t rng_seed = 1;

    std::vector<std::string> violations() const;
};

struct Plan {
    PlanMode mode = PlanMode::grid;
    std::vector<Trajectory> trajectories;
    PlanMetrics metrics;
    double seed_strength = 0.5;
    std::vector<double> v100_trace;   ///< after each greedy addition

    std::vector<Seed> seeds() const;
};

/// Stratified jittered interior samples: an (x, z) column grid with one
/// jittered ray per column along y, jittered strata along each ray, parity
/// inside test. Close to `n` points; deterministic for a given seed.
std::vector<Vec3> interior_samples(const TriMesh& target, int n, std::uint64_t rng_seed);

/// Throws OpenMesh (or another mesh validity code) and InvalidArgument when n < 10^4.
PlanMetrics compute_metrics(const TriMesh& target, std::span<const Seed> seeds, const DoseParams& params,
                            int n_samples = 10000, std::uint64_t rng_seed = 1);

/// Metrics over a precomputed sample set.
PlanMetrics metrics_from_samples(std::span<const Vec3> samples, std::span<const Seed> seeds,
                                 const DoseParams& params);

struct ArchCheck {
    bool conflict = false;
    double clearance = 0.0;  ///< mm, 0 when the needle touches the arch
};

/// Needle segment entry -> tip against the arch. Throws DegenerateSegment, InvalidArgument.
ArchCheck check_arch_conflict(const Trajectory& traj, const TriMesh& arch, double margin);

/// Greedy coverage planning followed by single-seed relocation.
/// Throws InfeasibleNoTrajectories, TargetOutsideWorkspace, InvalidArgument.
Plan plan_seeds(const TriMesh& target, const TriMesh* arch, const DoseParams& params, PlanMode mode,
                const PlanConstraints& constraints = {}, const RobotDescription& robot = {});

/// Every target vertex reachable by a horizontal template trajectory.
bool target_in_workspace(const TriMesh& target, const RobotDescription& robot = {});

}  // namespace prosper
