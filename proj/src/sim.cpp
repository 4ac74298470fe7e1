#include "prosper/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "prosper/error.hpp"

namespace prosper {

namespace {

struct Track {
    double inside_length = 0.0;
    bool tip_inside = false;
};

/// Length of the segment inside the mesh and whether its end point is inside.
Track track_geometry(const Vec3& a, const Vec3& b, const TriMesh& m, const Vec3& center, double radius)
{
    Track out;
    const Vec3 ab = b - a;
    const double len = ab.norm();
    if (len <= 0.0) return out;
    const double t = std::clamp((center - a).dot(ab) / (len * len), 0.0, 1.0);
    if ((a + t * ab - center).norm() > radius) return out;

    std::vector<double> ts = line_mesh_crossings(a, ab, m);
    ts.erase(std::unique(ts.begin(), ts.end(), [](double x, double y) { return std::abs(x - y) < 1e-12; }),
             ts.end());
    if (ts.size() % 2 != 0) {
        out.inside_length = segment_inside_length(a, b, m);
        out.tip_inside = point_in_mesh(b, m);
        return out;
    }
    std::size_t beyond = 0;
    for (std::size_t i = 0; i + 1 < ts.size(); i += 2) {
        const double lo = std::max(ts[i], 0.0);
        const double hi = std::min(ts[i + 1], 1.0);
        if (hi > lo) out.inside_length += (hi - lo) * len;
    }
    for (double x : ts) beyond += x > 1.0 ? 1 : 0;
    out.tip_inside = beyond % 2 == 1;
    return out;
}

struct Equilibrium {
    double force = 0.0;
    RigidTransform pose;
    Track track;
};

class Solver {
public:
    Solver(const Phantom& phantom, const InsertionParams& params)
        : phantom_(phantom),
          anchor_(phantom.anchor()),
          friction_per_mm_(axial_friction_force(1.0, params.feed_rate, params.spin_rate, phantom))
    {
        for (const auto& v : phantom.prostate.vertices) radius_ = std::max(radius_, (v - anchor_).norm());
        radius_ += 1e-6;
    }

    RigidTransform pose_for(double force, const NeedlePose& needle) const
    {
        const Vec3& d = needle.direction;
        const Vec3 theta = force * (needle.entry - anchor_).cross(d) / phantom_.anchor_rotation_stiffness;
        const double angle = theta.norm();
        RigidTransform t;
        if (angle > 0.0) t.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(angle, theta / angle));
        t.translation = anchor_ - t.rotation * anchor_ + force * d / phantom_.anchor_translation_stiffness;
        return t;
    }

    Track track_for(const RigidTransform& pose, const NeedlePose& needle) const
    {
        const RigidTransform inv = pose.inverse();
        return track_geometry(inv.apply(needle.entry), inv.apply(needle.tip()), phantom_.prostate, anchor_,
                              radius_);
    }

    /// Force the tissue exerts on the prostate along the needle direction
    /// when the prostate sits at pose_for(force).
    double tissue_force(double force, const NeedlePose& needle, bool retracting, double max_cut,
                        Track* track_out) const
    {
        const Track tr = track_for(pose_for(force, needle), needle);
        if (track_out) *track_out = tr;
        const double friction = friction_per_mm_ * tr.inside_length;
        if (retracting) return -friction;
        const bool cutting = tr.tip_inside && tr.inside_length > max_cut + 1e-9;
        return (cutting ? phantom_.cutting_force : 0.0) + friction;
    }

    Equilibrium solve(const NeedlePose& needle, bool retracting, double max_cut) const
    {
        Equilibrium eq;
        Track tr;
        const double at_rest = tissue_force(0.0, needle, retracting, max_cut, &tr);
        if (at_rest == 0.0) {
            eq.track = tr;
            return eq;
        }
        const double span = phantom_.cutting_force + friction_per_mm_ * needle.depth + 1e-9;
        double lo = retracting ? -span : 0.0;
        double hi = retracting ? 0.0 : span;
        auto h = [&](double f) { return f - tissue_force(f, needle, retracting, max_cut, nullptr); };
        double flo = h(lo), fhi = h(hi);
        // Illinois regula falsi with a bisection step every fourth iteration;
        // h is increasing but may jump where the tip crosses the surface.
        int side = 0;
        for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
            double x = (it % 4 == 3 || fhi == flo) ? 0.5 * (lo + hi) : (lo * fhi - hi * flo) / (fhi - flo);
            if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
            const double fx = h(x);
            if (fx == 0.0) {
                lo = hi = x;
                break;
            }
            if (fx < 0.0) {
                lo = x;
                flo = fx;
                if (side == -1) fhi *= 0.5;
                side = -1;
            } else {
                hi = x;
                fhi = fx;
                if (side == 1) flo *= 0.5;
                side = 1;
            }
        }
        eq.force = 0.5 * (lo + hi);
        eq.pose = pose_for(eq.force, needle);
        eq.track = track_for(eq.pose, needle);
        return eq;
    }

private:
    const Phantom& phantom_;
    Vec3 anchor_;
    double friction_per_mm_;
    double radius_ = 0.0;
};

PhantomState solve_state(PhantomState s, const Phantom& phantom, const InsertionParams& params)
{
    const Solver solver(phantom, params);
    const Equilibrium eq = solver.solve(*s.needle, s.retracting, s.max_cut);
    s.prostate_pose = eq.pose;
    s.axial_force = eq.force;
    s.embedded_depth = std::min(eq.track.inside_length, s.needle->depth);
    if (!s.retracting && eq.track.tip_inside) s.max_cut = std::max(s.max_cut, eq.track.inside_length);
    for (std::size_t i = 0; i < s.seeds_rest.size(); ++i) s.seeds_world[i] = s.prostate_pose.apply(s.seeds_rest[i]);

    if (phantom.arch && s.needle->depth > 0.0) {
        const Clearance c = segment_mesh_clearance(s.needle->entry, s.needle->tip(), *phantom.arch);
        const double gap = c.intersects ? 0.0 : c.min_distance;
        if (gap < phantom.needle_radius) {
            const double intrusion = segment_inside_length(s.needle->entry, s.needle->tip(), *phantom.arch);
            const double contact = phantom.arch_contact_stiffness * (phantom.needle_radius - gap + intrusion);
            const double total = std::abs(s.axial_force) + contact;
            if (total > params.stop_force_threshold) {
                std::ostringstream msg;
                msg << "arch contact at depth " << s.needle->depth << " mm, axial force " << total << " N";
                throw Error(Errc::PassiveStopTriggered, msg.str());
            }
        }
    }
    return s;
}

void require_needle(const PhantomState& s)
{
    if (!s.needle) throw Error(Errc::InvalidArgument, "no needle inserted", "needle");
}

}  // namespace

Vec3 Phantom::anchor() const { return volume_centroid(prostate); }

std::vector<std::string> Phantom::violations() const
{
    std::vector<std::string> out;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0)) out.push_back(std::string(name) + " must be > 0");
    };
    positive(anchor_translation_stiffness, "anchor_translation_stiffness");
    positive(anchor_rotation_stiffness, "anchor_rotation_stiffness");
    positive(friction_coefficient, "friction_coefficient");
    positive(tissue_pressure, "tissue_pressure");
    positive(cutting_force, "cutting_force");
    positive(needle_radius, "needle_radius");
    positive(arch_contact_stiffness, "arch_contact_stiffness");
    if (!(deposit_jitter >= 0.0)) out.emplace_back("deposit_jitter must be >= 0");
    if (!(stiffness_jitter >= 0.0 && stiffness_jitter < 1.0)) out.emplace_back("stiffness_jitter must be in [0, 1)");
    for (auto& v : mesh_violations(prostate)) out.push_back("prostate: " + v);
    if (arch) {
        for (auto& v : mesh_violations(*arch)) out.push_back("arch: " + v);
    }
    return out;
}

std::vector<std::string> InsertionParams::violations() const
{
    std::vector<std::string> out;
    if (!(feed_rate > 0.0)) out.emplace_back("feed_rate must be > 0");
    if (!(spin_rate >= 0.0)) out.emplace_back("spin_rate must be >= 0");
    if (!(dt > 0.0 && dt <= 0.1)) out.emplace_back("dt must be in (0, 0.1]");
    if (!(stop_force_threshold > 0.0)) out.emplace_back("stop_force_threshold must be > 0");
    if (event_stride < 1) out.emplace_back("event_stride must be >= 1");
    return out;
}

double axial_friction_force(double embedded_depth, double feed_rate, double spin_rate, const Phantom& phantom)
{
    const double r = phantom.needle_radius;
    const double area = 2.0 * std::numbers::pi * r * std::max(embedded_depth, 0.0);
    const double tangential = spin_rate * r;
    const double split = feed_rate / std::sqrt(feed_rate * feed_rate + tangential * tangential);
    return phantom.friction_coefficient * phantom.tissue_pressure * area * split;
}

PhantomState start_needle(PhantomState state, const NeedlePose& pose)
{
    state.needle = pose;
    state.needle->depth = 0.0;
    state.prostate_pose = RigidTransform::identity();
    state.embedded_depth = 0.0;
    state.axial_force = 0.0;
    state.max_cut = 0.0;
    state.retracting = false;
    for (std::size_t i = 0; i < state.seeds_rest.size(); ++i) state.seeds_world[i] = state.seeds_rest[i];
    return state;
}

PhantomState step_insertion(const PhantomState& state, const Phantom& phantom, const InsertionParams& params,
                            std::optional<double> limit_depth)
{
    require_needle(state);
    PhantomState s = state;
    const double step = params.feed_rate * params.dt;
    double depth = s.needle->depth + (s.retracting ? -step : step);
    if (limit_depth) depth = s.retracting ? std::max(depth, *limit_depth) : std::min(depth, *limit_depth);
    depth = std::max(depth, 0.0);
    s.time += std::abs(depth - s.needle->depth) / params.feed_rate;
    s.needle->depth = depth;
    return solve_state(std::move(s), phantom, params);
}

PhantomState settle(const PhantomState& state, const Phantom& phantom, const InsertionParams& params)
{
    require_needle(state);
    return solve_state(state, phantom, params);
}

PhantomState deposit_seed(const PhantomState& state, const Phantom& phantom)
{
    require_needle(state);
    const Vec3 tip = state.needle->tip();
    const Vec3 rest = state.prostate_pose.inverse().apply(tip);
    if (!point_in_mesh(rest, phantom.prostate)) {
        throw Error(Errc::TipOutsideProstate, "needle tip is not inside the prostate");
    }
    PhantomState s = state;
    s.seeds_rest.push_back(rest);
    s.seeds_world.push_back(tip);
    return s;
}

double prostate_displacement(const PhantomState& state, const Phantom& phantom)
{
    double worst = 0.0;
    for (const auto& v : phantom.prostate.vertices) {
        worst = std::max(worst, (state.prostate_pose.apply(v) - v).norm());
    }
    return worst;
}

TrialResult execute_plan(const Plan& plan, const Phantom& phantom, const InsertionParams& params,
                         const RobotDescription& robot)
{
    if (const auto v = phantom.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    if (const auto v = params.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    for (const auto& t : plan.trajectories) {
        if (const auto v = t.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    }

    std::mt19937_64 rng(phantom.rng_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Phantom trial = phantom;
    const double k_scale = 1.0 + phantom.stiffness_jitter * unit(rng);
    trial.anchor_translation_stiffness *= k_scale;
    trial.anchor_rotation_stiffness *= k_scale;

    TrialResult result;
    result.spin_rate = params.spin_rate;
    PhantomState state;
    long step_count = 0;
    double displacement = 0.0;

    auto log = [&](const std::string& kind, int traj, const std::string& detail = {}) {
        SimEvent e;
        e.t = state.time;
        e.kind = kind;
        e.trajectory = traj;
        e.depth = state.needle ? state.needle->depth : 0.0;
        e.displacement = displacement;
        e.force = state.axial_force;
        e.detail = detail;
        result.events.push_back(std::move(e));
    };
    auto advance = [&](int traj, double limit) {
        state = step_insertion(state, trial, params, limit);
        displacement = state.axial_force == 0.0 ? 0.0 : prostate_displacement(state, trial);
        result.peak_prostate_displacement = std::max(result.peak_prostate_displacement, displacement);
        if (++step_count % params.event_stride == 0) log("step", traj);
    };

    for (std::size_t i = 0; i < plan.trajectories.size(); ++i) {
        const Trajectory& traj = plan.trajectories[i];
        const int ti = static_cast<int>(i);
        if (traj.seed_depths.empty()) continue;
        NeedlePose planned = traj.pose;
        planned.depth = 0.0;
        JointConfig q = inverse_kinematics(planned, robot);
        q.spin_rate = params.spin_rate;
        const NeedlePose pose = forward_kinematics(q, robot);

        std::vector<double> depths = traj.seed_depths;
        std::sort(depths.begin(), depths.end(), std::greater<>());
        state = start_needle(std::move(state), pose);
        displacement = 0.0;
        log("needle_start", ti);
        try {
            while (state.needle->depth < depths.front() - 1e-12) advance(ti, depths.front());
            state.retracting = true;
            state = settle(state, trial, params);
            for (std::size_t k = 0; k < depths.size(); ++k) {
                while (state.needle->depth > depths[k] + 1e-12) advance(ti, depths[k]);
                displacement = state.axial_force == 0.0 ? 0.0 : prostate_displacement(state, trial);
                const Vec3 tip = state.needle->tip();
                Vec3 rest = state.prostate_pose.inverse().apply(tip);
                const bool inside = point_in_mesh(rest, trial.prostate);
                rest += trial.deposit_jitter * Vec3(normal(rng), normal(rng), normal(rng));
                state.seeds_rest.push_back(rest);
                state.seeds_world.push_back(state.prostate_pose.apply(rest));
                const Vec3 target = traj.pose.point_at(depths[k]);
                result.planned_rest.push_back(target);
                result.deposited_rest.push_back(rest);
                const double err = (rest - target).norm();
                result.per_seed_error.push_back(err);
                std::ostringstream detail;
                detail << "seed " << result.per_seed_error.size() - 1 << " error " << err << " mm";
                if (!inside) detail << " (tip outside prostate)";
                log("deposit", ti, detail.str());
            }
            state.needle.reset();
            state.prostate_pose = RigidTransform::identity();
            state.axial_force = 0.0;
            state.embedded_depth = 0.0;
            displacement = 0.0;
            state.seeds_world = state.seeds_rest;
            log("needle_end", ti);
        } catch (const Error& e) {
            if (e.code() != Errc::PassiveStopTriggered) throw;
            log("passive_stop", ti, e.what());
            result.skipped_trajectories.push_back(ti);
            state.needle.reset();
            state.prostate_pose = RigidTransform::identity();
            state.axial_force = 0.0;
            state.embedded_depth = 0.0;
            state.seeds_world = state.seeds_rest;
        }
    }

    if (!result.per_seed_error.empty()) {
        double sum = 0.0;
        for (double e : result.per_seed_error) {
            sum += e;
            result.max_error = std::max(result.max_error, e);
        }
        result.mean_error = sum / static_cast<double>(result.per_seed_error.size());
    }
    std::ostringstream detail;
    detail << result.per_seed_error.size() << " seeds, mean error " << result.mean_error << " mm";
    log("trial_end", -1, detail.str());
    return result;
}

Phantom apply_edema(const Phantom& phantom, double fraction, bool allow_override)
{
    const double upper = allow_override ? 1.0 : 0.2;
    if (!(fraction >= 0.0 && fraction <= upper)) {
        std::ostringstream msg;
        msg << "edema fraction " << fraction << " outside [0, " << upper << "]";
        throw Error(Errc::FractionOutOfRange, msg.str(), "fraction");
    }
    if (fraction == 0.0) return phantom;
    Phantom out = phantom;
    out.prostate = scale_to_volume_factor(phantom.prostate, 1.0 + fraction);
    return out;
}

}  // namespace prosper
