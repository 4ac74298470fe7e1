#include "doctest.h"

#include <numbers>

#include "prosper/error.hpp"
#include "prosper/scenario.hpp"
#include "prosper/sim.hpp"
#include "support.hpp"

using namespace prosper;
using prosper::testing::code_of;

namespace {

const Scenario& reference()
{
    static const Scenario s = load_scenario("reference");
    return s;
}

const Plan& reference_plan()
{
    static const Plan p = plan_seeds(reference().target(), reference().arch(), DoseParams{}, PlanMode::grid);
    return p;
}

NeedlePose axial_needle()
{
    NeedlePose n;
    n.entry = Vec3(0, 0, 0);
    n.direction = Vec3::UnitY();
    return n;
}

}  // namespace

TEST_CASE("axial_friction_force")
{
    Phantom ph;
    const double full = ph.friction_coefficient * ph.tissue_pressure * 2.0 * std::numbers::pi * ph.needle_radius * 20.0;
    CHECK(axial_friction_force(20.0, 5.0, 0.0, ph) == doctest::Approx(full).epsilon(1e-14));
    CHECK(axial_friction_force(0.0, 5.0, 30.0, ph) == 0.0);
    CHECK(axial_friction_force(20.0, 5.0, 1e9, ph) < 1e-6);
    double prev = full;
    for (double w : {10.0, 30.0, 60.0}) {
        const double f = axial_friction_force(20.0, 5.0, w, ph);
        CHECK(f < prev);
        const double tangential = w * ph.needle_radius;
        CHECK(f == doctest::Approx(full * 5.0 / std::hypot(5.0, tangential)).epsilon(1e-14));
        prev = f;
    }
}

TEST_CASE("needle stepping")
{
    const Phantom& ph = reference().phantom;
    InsertionParams params;

    SUBCASE("outside the gland nothing moves")
    {
        PhantomState s = start_needle({}, axial_needle());
        for (int i = 0; i < 40; ++i) s = step_insertion(s, ph, params);  // 10 mm, still in front of the gland
        CHECK(s.needle->depth == doctest::Approx(10.0));
        CHECK(s.axial_force == 0.0);
        CHECK(prostate_displacement(s, ph) == 0.0);
        CHECK(code_of([&] { deposit_seed(s, ph); }) == Errc::TipOutsideProstate);
    }
    SUBCASE("insertion pushes the gland forward and it returns on release")
    {
        NeedlePose through = axial_needle();
        through.entry = Vec3(ph.anchor().x(), 0.0, ph.anchor().z());
        PhantomState s = start_needle({}, through);
        while (s.needle->depth < 65.0) s = step_insertion(s, ph, params, 65.0);
        CHECK(s.needle->depth == 65.0);
        CHECK(s.axial_force > 0.0);
        CHECK(s.prostate_pose.translation.y() > 0.0);
        CHECK(s.embedded_depth > 0.0);
        CHECK(s.embedded_depth <= s.needle->depth);
        // Along the axis through the anchor the torque vanishes.
        CHECK(Eigen::AngleAxisd(s.prostate_pose.rotation).angle() < 1e-9);
        CHECK(s.axial_force / ph.anchor_translation_stiffness == doctest::Approx(s.prostate_pose.translation.y()));

        s = deposit_seed(s, ph);
        REQUIRE(s.seeds_rest.size() == 1);
        CHECK((s.seeds_world[0] - s.needle->tip()).norm() < 1e-12);
        CHECK((s.prostate_pose.apply(s.seeds_rest[0]) - s.seeds_world[0]).norm() < 1e-12);
        CHECK(s.seeds_rest[0].y() < 65.0);

        s.retracting = true;
        s = settle(s, ph, params);
        CHECK(s.axial_force <= 0.0);
        for (int i = 0; i < 20; ++i) s = step_insertion(s, ph, params);
        CHECK((s.prostate_pose.apply(s.seeds_rest[0]) - s.seeds_world[0]).norm() < 1e-12);
        CHECK(s.time > 0.0);
    }
    SUBCASE("no needle")
    {
        CHECK(code_of([&] { step_insertion(PhantomState{}, ph, params); }) == Errc::InvalidArgument);
        CHECK(code_of([&] { deposit_seed(PhantomState{}, ph); }) == Errc::InvalidArgument);
    }
}

TEST_CASE("rigid anchor places seeds exactly")
{
    Phantom ph = reference().phantom;
    ph.anchor_translation_stiffness = 1e9;
    ph.anchor_rotation_stiffness = 1e12;
    ph.deposit_jitter = 0.0;
    ph.stiffness_jitter = 0.0;
    const TrialResult r = execute_plan(reference_plan(), ph, InsertionParams{});
    CHECK(r.per_seed_error.size() == reference_plan().seeds().size());
    CHECK(r.mean_error < 1e-3);
    CHECK(r.max_error < 1e-3);
    CHECK(r.skipped_trajectories.empty());
}

TEST_CASE("execute_plan")
{
    const Phantom& ph = reference().phantom;
    InsertionParams params;
    params.spin_rate = 60.0;
    const TrialResult a = execute_plan(reference_plan(), ph, params);

    SUBCASE("accuracy and event log")
    {
        CHECK(a.per_seed_error.size() == reference_plan().seeds().size());
        CHECK(a.mean_error < 2.0);
        CHECK(a.skipped_trajectories.empty());
        REQUIRE_FALSE(a.events.empty());
        CHECK(a.events.front().kind == "needle_start");
        CHECK(a.events.back().kind == "trial_end");
        int deposits = 0;
        for (std::size_t i = 1; i < a.events.size(); ++i) {
            CHECK(a.events[i].t >= a.events[i - 1].t);
            deposits += a.events[i].kind == "deposit" ? 1 : 0;
        }
        CHECK(deposits == static_cast<int>(a.per_seed_error.size()));
    }
    SUBCASE("deterministic")
    {
        const TrialResult b = execute_plan(reference_plan(), ph, params);
        CHECK(b.per_seed_error == a.per_seed_error);
        CHECK(b.events.size() == a.events.size());
        Phantom other = ph;
        other.rng_seed = 2;
        CHECK(execute_plan(reference_plan(), other, params).per_seed_error != a.per_seed_error);
    }
    SUBCASE("halving the time step")
    {
        InsertionParams fine = params;
        fine.dt = params.dt / 2.0;
        const TrialResult b = execute_plan(reference_plan(), ph, fine);
        CHECK(std::abs(b.mean_error - a.mean_error) <= 0.05 * a.mean_error);
    }
    SUBCASE("invalid inputs")
    {
        InsertionParams bad = params;
        bad.dt = 0.0;
        CHECK(code_of([&] { execute_plan(reference_plan(), ph, bad); }) == Errc::InvalidArgument);
        Phantom soft = ph;
        soft.anchor_translation_stiffness = -1.0;
        CHECK(code_of([&] { execute_plan(reference_plan(), soft, params); }) == Errc::InvalidArgument);
    }
}

TEST_CASE("spinning reduces error and displacement")
{
    const Phantom& ph = reference().phantom;
    double prev_error = 1e9, prev_disp = 1e9;
    for (double w : {0.0, 10.0, 30.0, 60.0}) {
        InsertionParams params;
        params.spin_rate = w;
        const TrialResult r = execute_plan(reference_plan(), ph, params);
        MESSAGE("omega=" << w << " mean=" << r.mean_error << " peak=" << r.peak_prostate_displacement);
        CHECK(r.mean_error < prev_error);
        CHECK(r.peak_prostate_displacement < prev_disp);
        prev_error = r.mean_error;
        prev_disp = r.peak_prostate_displacement;
    }
}

TEST_CASE("passive stop on bone contact")
{
    Phantom ph = reference().phantom;
    ph.arch = make_box(Vec3(-60, 5, -60), Vec3(60, 15, 60));
    const TrialResult r = execute_plan(reference_plan(), ph, InsertionParams{});
    CHECK(r.skipped_trajectories.size() == reference_plan().trajectories.size());
    CHECK(r.per_seed_error.empty());
    int stops = 0;
    for (const auto& e : r.events) stops += e.kind == "passive_stop" ? 1 : 0;
    CHECK(stops == static_cast<int>(reference_plan().trajectories.size()));

    PhantomState s = start_needle({}, axial_needle());
    CHECK(code_of([&] {
        for (int i = 0; i < 100; ++i) s = step_insertion(s, ph, InsertionParams{});
    }) == Errc::PassiveStopTriggered);
}

TEST_CASE("apply_edema")
{
    const Phantom& ph = reference().phantom;
    const double v0 = mesh_volume(ph.prostate);
    const Phantom swollen = apply_edema(ph, 0.2);
    CHECK(mesh_volume(swollen.prostate) / v0 == doctest::Approx(1.2).epsilon(1e-9));
    CHECK((swollen.prostate.vertex_centroid() - ph.prostate.vertex_centroid()).norm() < 1e-9);
    CHECK(apply_edema(ph, 0.0).prostate.vertices == ph.prostate.vertices);
    CHECK(code_of([&] { apply_edema(ph, 0.25); }) == Errc::FractionOutOfRange);
    CHECK(code_of([&] { apply_edema(ph, -0.1); }) == Errc::FractionOutOfRange);
    CHECK(mesh_volume(apply_edema(ph, 0.5, true).prostate) / v0 == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(code_of([&] { apply_edema(ph, 1.5, true); }) == Errc::FractionOutOfRange);
}

TEST_CASE("bundled scenarios")
{
    CHECK(scenario_names().size() == 3);
    for (const auto& name : scenario_names()) {
        const Scenario s = load_scenario(name);
        CHECK(s.name == name);
        CHECK(s.violations().empty());
        CHECK(s.arch() != nullptr);
    }
    const Scenario e = load_scenario("edema");
    REQUIRE(e.pre_edema_target);
    CHECK(mesh_volume(e.target()) / mesh_volume(*e.pre_edema_target) == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(load_scenario("large_prostate").recommended_mode == PlanMode::oblique);
    CHECK(code_of([] { load_scenario("nope"); }) == Errc::UnknownScenario);
}
