#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prosper/dose.hpp"
#include "prosper/geom.hpp"
#include "prosper/robot.hpp"

namespace prosper {

/// Mobile prostate on a 6-DOF spring anchor at its rest volume centroid.
struct Phantom {
    TriMesh prostate;                        ///< rest pose
    double anchor_translation_stiffness = 0.5;  ///< K_t, N/mm
    double anchor_rotation_stiffness = 200.0;   ///< K_r, N mm/rad
    double friction_coefficient = 0.3;          ///< mu
    double tissue_pressure = 0.06;              ///< P, N/mm^2 normal pressure on the shaft
    double cutting_force = 1.5;                 ///< F_c, N
    double needle_radius = 0.6;                 ///< r_n, mm
    std::optional<TriMesh> arch;
    std::uint64_t rng_seed = 1;
    double deposit_jitter = 0.3;                ///< sigma_d, mm per axis
    double stiffness_jitter = 0.10;             ///< relative, per trial
    double arch_contact_stiffness = 50.0;       ///< N/mm, needle-bone reaction proxy

    Vec3 anchor() const;
    std::vector<std::string> violations() const;
};

struct InsertionParams {
    double feed_rate = 5.0;              ///< v, mm/s
    double spin_rate = 0.0;              ///< omega, rad/s
    double dt = 0.05;                    ///< s
    double stop_force_threshold = 4.0;   ///< N
    int event_stride = 10;               ///< a "step" event every this many steps

    std::vector<std::string> violations() const;
};

struct PhantomState {
    RigidTransform prostate_pose;        ///< rest -> current
    std::optional<NeedlePose> needle;
    double embedded_depth = 0.0;         ///< mm of shaft inside the prostate
    std::vector<Vec3> seeds_world;
    std::vector<Vec3> seeds_rest;
    double time = 0.0;                   ///< s
    double axial_force = 0.0;            ///< N, on the prostate along the needle
    double max_cut = 0.0;                ///< deepest cut along the current track, mm
    bool retracting = false;
};

struct SimEvent {
    double t = 0.0;
    std::string kind;          ///< needle_start, step, deposit, needle_end, passive_stop, ...
    int trajectory = -1;
    double depth = 0.0;        ///< mm
    double displacement = 0.0; ///< mm, largest prostate vertex displacement
    double force = 0.0;        ///< N
    std::string detail;
};

struct TrialResult {
    std::vector<double> per_seed_error;  ///< mm, rest frame
    double mean_error = 0.0;
    double max_error = 0.0;
    double peak_prostate_displacement = 0.0;
    std::vector<Vec3> planned_rest;
    std::vector<Vec3> deposited_rest;
    std::vector<int> skipped_trajectories;
    std::vector<SimEvent> events;
    double spin_rate = 0.0;
};

/// Coulomb shaft friction with the sliding direction split between feed and spin.
double axial_friction_force(double embedded_depth, double feed_rate, double spin_rate, const Phantom& phantom);

/// Needle inserted at the template, depth 0, prostate at rest.
PhantomState start_needle(PhantomState state, const NeedlePose& pose);

/// Advances (or retracts, when state.retracting) the needle by v*dt, clamped
/// to `limit_depth` when given, and solves the quasi-static equilibrium.
/// Throws PassiveStopTriggered.
PhantomState step_insertion(const PhantomState& state, const Phantom& phantom, const InsertionParams& params,
                            std::optional<double> limit_depth = std::nullopt);

/// Re-solves the equilibrium at the current depth (e.g. after a change of
/// direction) without moving the needle.
PhantomState settle(const PhantomState& state, const Phantom& phantom, const InsertionParams& params);

/// Fixes a seed to the prostate material point at the needle tip. Throws TipOutsideProstate.
PhantomState deposit_seed(const PhantomState& state, const Phantom& phantom);

/// Largest vertex displacement of the prostate in `state` relative to rest.
double prostate_displacement(const PhantomState& state, const Phantom& phantom);

TrialResult execute_plan(const Plan& plan, const Phantom& phantom, const InsertionParams& params,
                         const RobotDescription& robot = {});

/// Throws FractionOutOfRange outside [0, 0.2] unless `allow_override` (then up to 1.0).
Phantom apply_edema(const Phantom& phantom, double fraction, bool allow_override = false);

}  // namespace prosper
