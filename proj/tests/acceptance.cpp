// Acceptance run: one PASS/FAIL line per headline criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>

#include "prosper/calib.hpp"
#include "prosper/cli.hpp"
#include "prosper/dose.hpp"
#include "prosper/io.hpp"
#include "prosper/register.hpp"
#include "prosper/scenario.hpp"
#include "prosper/service.hpp"
#include "prosper/shape.hpp"
#include "prosper/sim.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace prosper;
using namespace prosper::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Plan reference_plan(const Scenario& s)
{
    return plan_seeds(s.target(), s.arch(), DoseParams{}, PlanMode::grid, PlanConstraints{}, s.robot);
}

Outcome calibration()
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto truth = reference_us_from_robot();
    const auto obs = simulate_water_phantom(truth, default_calibration_configs(8), 0.2, 1);
    const auto cal = solve_calibration(obs);
    const double err = max_workspace_error(truth, cal.us_from_robot, 20);
    const double secs = seconds_since(t0);
    return {err < 1.0 && secs < 1.0, fmt("max workspace error %.4f mm over 20^3, %.3f s", err, secs)};
}

Outcome placement()
{
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario s = load_scenario("reference");
    InsertionParams p;
    p.spin_rate = 60.0;
    const TrialResult r = execute_plan(reference_plan(s), s.phantom, p, s.robot);
    const double secs = seconds_since(t0);
    return {r.mean_error < 2.0 && secs < 10.0,
            fmt("mean seed error %.3f mm at 60 rad/s, plan+execute %.2f s", r.mean_error, secs)};
}

Outcome rotation_benefit()
{
    const Scenario s = load_scenario("reference");
    const Plan plan = reference_plan(s);
    std::string detail;
    bool ok = true;
    double prev_mean = 0.0, prev_peak = 0.0;
    for (double w : {0.0, 10.0, 30.0, 60.0}) {
        InsertionParams p;
        p.spin_rate = w;
        const TrialResult r = execute_plan(plan, s.phantom, p, s.robot);
        if (w > 0.0) ok = ok && r.mean_error < prev_mean && r.peak_prostate_displacement < prev_peak;
        prev_mean = r.mean_error;
        prev_peak = r.peak_prostate_displacement;
        detail += fmt("%s%g: %.3f/%.3f", detail.empty() ? "w=" : ", ", w, r.mean_error, r.peak_prostate_displacement);
    }
    return {ok, detail + " (mean error/peak displacement, mm)"};
}

Outcome edema()
{
    const Scenario s = load_scenario("reference");
    const Phantom swollen = apply_edema(s.phantom, 0.2);
    const double ratio = mesh_volume(swollen.prostate) / mesh_volume(s.phantom.prostate);
    const double stale = compute_metrics(swollen.prostate, reference_plan(s).seeds(), DoseParams{}).v100;
    const Plan replan = plan_seeds(swollen.prostate, s.arch(), DoseParams{}, PlanMode::grid, PlanConstraints{}, s.robot);
    return {std::abs(ratio - 1.2) <= 1e-9 && replan.metrics.v100 >= 0.95,
            fmt("volume ratio %.12f, v100 %.4f before replanning, %.4f after", ratio, stale, replan.metrics.v100)};
}

Outcome pubic_arch()
{
    const Scenario s = load_scenario("large_prostate");
    const PlanConstraints c;
    bool grid_infeasible = false;
    try {
        plan_seeds(s.target(), s.arch(), DoseParams{}, PlanMode::grid, c, s.robot);
    } catch (const Error& e) {
        grid_infeasible = e.code() == Errc::InfeasibleNoTrajectories;
    }
    const Plan oblique = plan_seeds(s.target(), s.arch(), DoseParams{}, PlanMode::oblique, c, s.robot);
    double min_clear = std::numeric_limits<double>::infinity();
    for (const auto& t : oblique.trajectories) min_clear = std::min(min_clear, check_arch_conflict(t, *s.arch(), c.margin).clearance);
    const bool ok = grid_infeasible && !oblique.trajectories.empty() && min_clear >= c.margin;
    return {ok, fmt("grid %s, oblique %zu needles, min clearance %.3f mm (margin %.1f), v100 %.4f",
                    grid_infeasible ? "infeasible" : "FEASIBLE", oblique.trajectories.size(), min_clear, c.margin,
                    oblique.metrics.v100)};
}

Outcome kinematics()
{
    std::mt19937_64 rng(1);
    const JointLimits lim;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const NeedlePose pose = forward_kinematics(random_config(rng, lim));
        const NeedlePose back = forward_kinematics(inverse_kinematics(pose));
        worst = std::max({worst, (back.entry - pose.entry).norm(), (back.tip() - pose.tip()).norm()});
    }
    int reachable = 0;
    double lattice = 0.0;
    for (int col = -6; col <= 6; ++col) {
        for (int row = -6; row <= 6; ++row) {
            NeedlePose p = grid_target(col, row);
            p.depth = 100.0;
            reachable += workspace_contains(p) ? 1 : 0;
            lattice = std::max(lattice, (p.entry - Vec3(5.0 * col, 0.0, 5.0 * row)).norm());
        }
    }
    return {worst < 1e-6 && reachable == 169 && lattice == 0.0,
            fmt("FK(IK) worst %.2e mm on 10^4 poses, %d/169 holes reachable, lattice deviation %.1e mm", worst,
                reachable, lattice)};
}

Outcome registration()
{
    const TriMesh src = prostate_like_mesh({}, 3);
    const TriMesh tgt = warped(src);
    const double change = mesh_volume(tgt) / mesh_volume(src) - 1.0;
    const RegistrationResult r = elastic_register(src, tgt);
    const double s2s = surface_to_surface_rms(apply_field(r.field, src), tgt);
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    for (double lv : {0.0, 1.0, 10.0}) {
        RegistrationParams p;
        p.lambda_vol = lv;
        const double e = std::abs(elastic_register(src, tgt, p).volume_error);
        monotone = monotone && e <= prev + 1e-12;
        prev = e;
    }
    return {std::abs(change) <= 0.05 && s2s < 0.5 && std::abs(r.volume_error) < 0.02 && monotone,
            fmt("volume change %+.2f%%, surface rms %.3f mm, volume error %+.3f%%, lambda_vol monotone: %s",
                100.0 * change, s2s, 100.0 * r.volume_error, monotone ? "yes" : "no")};
}

Outcome shape_fit()
{
    const ShapeModel& m = bundled_shape_model();
    const auto idx = spread_vertices(m.mean_mesh(), 12);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(m.mode_count());
    truth[0] = 0.8 * std::sqrt(m.variances[0]);
    truth[1] = -0.6 * std::sqrt(m.variances[1]);
    const SimilarityTransform pose{1.05, RigidTransform::from_axis_angle(Vec3(0.2, 1, 0.1), 0.2, Vec3(3, 55, -4))};
    const TriMesh target = synthesize(m, {truth}, pose);
    std::vector<Vec3> pts, mean_pts;
    for (int i : idx) {
        pts.push_back(target.vertices[i]);
        mean_pts.push_back(m.mean[i]);
    }
    const FitResult r = fit_to_points(m, pts);
    const double s2s = surface_to_surface_rms(synthesize(m, r.coeffs, r.pose), target);
    const double b_mean = fit_to_points(m, mean_pts).coeffs.b.norm();
    return {s2s < 0.5 && b_mean < 1e-3, fmt("12-point surface rms %.3f mm, mean-shape |b| %.2e", s2s, b_mean)};
}

Outcome determinism()
{
    // CLI pipeline
    const fs::path dir = fs::temp_directory_path() / "prosper_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto path = [&](const char* f) { return (dir / f).string(); };
    std::ostringstream out, err;
    int rc = cli::run({"scenario", "reference", "--out", path("s.json")}, out, err);
    if (rc == 0) rc = cli::run({"plan", "--scenario", path("s.json"), "--out", path("p.json")}, out, err);
    if (rc == 0)
        rc = cli::run({"simulate", "--scenario", path("s.json"), "--plan", path("p.json"), "--spin", "60", "--out",
                       path("t.json")},
                      out, err);
    if (rc != 0) return {false, "CLI pipeline failed: " + err.str()};
    const json cli_trial = read_document(path("t.json")).payload;
    fs::remove_all(dir);

    // Service
    SessionManager sm;
    const std::string id = sm.create_session("reference")["id"];
    sm.optimize(id, 0, PlanMode::grid);
    sm.mutate(id, 1, {{"op", "set_spin"}, {"spin_rate", 60.0}});
    json svc_trial = sm.execute(id);
    json cli_core = cli_trial;
    cli_core.erase("diagnostics");
    const bool same = cli_core == svc_trial;

    // Geometry oracles
    const TriMesh sphere = make_icosphere(10.0, 2);
    std::mt19937_64 rng(2024);
    double worst_clear = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Vec3 a = random_point(rng, 16.0), b = random_point(rng, 16.0);
        worst_clear = std::max(worst_clear, std::abs(segment_mesh_clearance(a, b, sphere).min_distance -
                                                     brute_force_clearance(a, b, sphere)));
    }
    const TriMesh gland = load_scenario("reference").target();
    const double v = mesh_volume(gland);
    const double mc = monte_carlo_volume(gland, 40000, 25, 99);
    const double vol_rel = std::abs(v - mc) / mc;
    return {same && worst_clear < 1e-9 && vol_rel < 0.01,
            fmt("CLI vs service trial %s, clearance oracle worst %.1e mm on 200 segments, "
                "volume vs Monte-Carlo %.3f%%",
                same ? "identical" : "DIFFERENT", worst_clear, 100.0 * vol_rel)};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"calibration accuracy", calibration},
        {"placement accuracy", placement},
        {"rotation benefit", rotation_benefit},
        {"edema handling", edema},
        {"pubic arch rerouting", pubic_arch},
        {"kinematics", kinematics},
        {"registration recovery", registration},
        {"shape fitting", shape_fit},
        {"determinism and oracles", determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s  %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria pass\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
