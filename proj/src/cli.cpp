#include "prosper/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "prosper/error.hpp"
#include "prosper/io.hpp"
#include "prosper/service.hpp"

namespace prosper::cli {

namespace {

struct Common {
    std::string out_path;
    std::optional<std::uint64_t> seed;
    std::string config_path;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--out", c.out_path, "Output document path (stdout when omitted)");
    cmd->add_option("--seed", c.seed, "RNG seed");
    cmd->add_option("--config", c.config_path, "JSON file whose sections override module defaults");
}

/// Validation failures of input documents (exit 1).
struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const Common& c)
{
    if (c.config_path.empty()) return json::object();
    std::ifstream in(c.config_path);
    if (!in) throw Error(Errc::ParseError, "cannot open config " + c.config_path, c.config_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, c.config_path + ": " + e.what(), c.config_path);
    }
    if (!j.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object", c.config_path);
    for (const auto& [key, v] : j.items()) {
        static const char* known[] = {"dose", "plan", "insertion", "registration", "fit", "phantom", "robot"};
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            throw Error(Errc::InvalidArgument, "unknown config section '" + key + "'", key);
        }
    }
    return j;
}

json section(const json& config, const char* name) { return config.contains(name) ? config.at(name) : json(nullptr); }

Document read_valid(const std::string& path, DocKind kind)
{
    const Document d = read_document(path);
    if (d.kind != kind) {
        throw InvalidInput(path + ": expected a " + to_string(kind) + " document, got " + to_string(d.kind));
    }
    if (const auto v = validate(d); !v.empty()) throw InvalidInput(path + ": " + v.front());
    return d;
}

void emit(const Document& doc, const Common& c, std::ostream& out)
{
    if (c.out_path.empty()) {
        out << document_to_json(doc).dump(1) << '\n';
    } else {
        write_document(c.out_path, doc);
    }
}

std::string created_by(const std::string& command) { return std::string("prosper ") + kDocumentVersion + " " + command; }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Vec3> read_points(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path, path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, path + ": " + e.what(), path);
    }
    if (j.is_object() && j.contains("points")) j = j.at("points");
    if (!j.is_array()) throw InvalidInput(path + ": expected an array of [x, y, z] points");
    std::vector<Vec3> pts;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 3) throw InvalidInput(path + ": points must be [x, y, z]");
        pts.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    return pts;
}

RobotDescription robot_from(const std::string& path, const json& config)
{
    RobotDescription robot;
    if (!path.empty()) robot = payload_as<RobotDescription>(read_valid(path, DocKind::robot), DocKind::robot);
    robot = with_overrides(robot, section(config, "robot"));
    if (const auto v = robot.violations(); !v.empty()) throw InvalidInput("robot: " + v.front());
    return robot;
}

// ---- report ----

struct ReportInput {
    std::string path;
    Document doc;
};

json build_report(const std::vector<ReportInput>& inputs)
{
    json r = {{"version", kDocumentVersion}, {"sources", json::array()}};
    for (const auto& in : inputs) {
        const Document& d = in.doc;
        r["sources"].push_back({{"path", in.path},
                                {"kind", to_string(d.kind)},
                                {"created_by", d.provenance.created_by},
                                {"config_hash", d.provenance.config_hash}});
        const json diag = d.payload.value("diagnostics", json::object());
        switch (d.kind) {
        case DocKind::calibration: {
            const auto c = payload_as<CalibrationResult>(d, DocKind::calibration);
            json s = {{"rms_residual_mm", c.rms_residual}, {"observations", c.per_point_residuals.size()}};
            for (const char* k : {"workspace_error_mm", "runtime_s", "noise_sigma"}) {
                if (diag.contains(k)) s[k] = diag.at(k);
            }
            r["calibration"] = s;
            break;
        }
        case DocKind::field: {
            json s = {{"control_points", d.payload.at("control_points").size()}};
            for (const char* k : {"surface_rms", "volume_error", "iterations", "converged"}) {
                if (diag.contains(k)) s[k] = diag.at(k);
            }
            r["registration"] = s;
            break;
        }
        case DocKind::mesh: {
            if (!diag.empty()) r["shape_fit"] = diag;
            break;
        }
        case DocKind::plan: {
            const auto p = payload_as<Plan>(d, DocKind::plan);
            r["plan"] = {{"mode", to_string(p.mode)},
                         {"trajectories", p.trajectories.size()},
                         {"seed_count", p.metrics.seed_count},
                         {"v100", p.metrics.v100},
                         {"d90_gy", p.metrics.d90}};
            if (diag.contains("min_arch_clearance_mm")) r["plan"]["min_arch_clearance_mm"] = diag.at("min_arch_clearance_mm");
            break;
        }
        case DocKind::trial: {
            const auto t = payload_as<TrialResult>(d, DocKind::trial);
            r["trial"] = {{"spin_rate", t.spin_rate},
                          {"seeds", t.per_seed_error.size()},
                          {"mean_error_mm", t.mean_error},
                          {"max_error_mm", t.max_error},
                          {"peak_prostate_displacement_mm", t.peak_prostate_displacement},
                          {"skipped_trajectories", t.skipped_trajectories},
                          {"events", t.events.size()}};
            break;
        }
        default: break;
        }
    }
    return r;
}

std::string human_report(const json& r)
{
    std::ostringstream o;
    o << std::fixed << std::setprecision(4);
    o << "prosper report\n";
    if (r.contains("calibration")) {
        const json& c = r["calibration"];
        o << "calibration: rms residual " << c["rms_residual_mm"].get<double>() << " mm over "
          << c["observations"].get<std::size_t>() << " insertions";
        if (c.contains("workspace_error_mm")) o << ", worst workspace error " << c["workspace_error_mm"].get<double>() << " mm";
        o << '\n';
    }
    if (r.contains("shape_fit")) {
        const json& s = r["shape_fit"];
        if (s.contains("rms")) o << "shape fit: point rms " << s["rms"].get<double>() << " mm\n";
    }
    if (r.contains("registration")) {
        const json& g = r["registration"];
        o << "registration: " << g["control_points"].get<std::size_t>() << " control points";
        if (g.contains("surface_rms")) o << ", surface rms " << g["surface_rms"].get<double>() << " mm";
        if (g.contains("volume_error")) o << ", volume error " << 100.0 * g["volume_error"].get<double>() << " %";
        o << '\n';
    }
    if (r.contains("plan")) {
        const json& p = r["plan"];
        o << "plan (" << p["mode"].get<std::string>() << "): " << p["seed_count"].get<int>() << " seeds on "
          << p["trajectories"].get<std::size_t>() << " needles, V100 " << p["v100"].get<double>() << ", D90 "
          << p["d90_gy"].get<double>() << " Gy\n";
    }
    if (r.contains("trial")) {
        const json& t = r["trial"];
        o << "trial (spin " << t["spin_rate"].get<double>() << " rad/s): " << t["seeds"].get<std::size_t>()
          << " seeds, mean error " << t["mean_error_mm"].get<double>() << " mm, max " << t["max_error_mm"].get<double>()
          << " mm, peak displacement " << t["peak_prostate_displacement_mm"].get<double>() << " mm";
        if (!t["skipped_trajectories"].empty()) o << ", " << t["skipped_trajectories"].size() << " needles stopped";
        o << '\n';
    }
    for (const auto& s : r["sources"]) {
        o << "source " << s["path"].get<std::string>() << " (" << s["kind"].get<std::string>() << ", config "
          << s["config_hash"].get<std::string>() << ")\n";
    }
    return o.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Robot-assisted prostate brachytherapy planning and simulation", "prosper"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kDocumentVersion);

    Common common;

    auto* scenario = app.add_subcommand("scenario", "Write a bundled scenario document");
    std::string scenario_name;
    bool list = false;
    scenario->add_option("name", scenario_name, "reference | large_prostate | edema");
    scenario->add_flag("--list", list, "List bundled scenarios");
    add_common(scenario, common);

    auto* calibrate = app.add_subcommand("calibrate", "Probe-to-robot calibration from needle insertions");
    std::size_t n_insertions = 8;
    double noise = 0.2;
    std::string observations_path, robot_path;
    calibrate->add_option("--n", n_insertions, "Number of simulated insertions")->check(CLI::Range(3, 10000));
    calibrate->add_option("--noise", noise, "Detection noise sigma per axis, mm")->check(CLI::NonNegativeNumber);
    calibrate->add_option("--observations", observations_path, "Measured observations (JSON array) instead of simulation");
    calibrate->add_option("--robot", robot_path, "Robot document");
    add_common(calibrate, common);

    auto* fit = app.add_subcommand("fit-shape", "Fit the statistical prostate model to sparse points");
    std::string points_path, model_path;
    fit->add_option("--points", points_path, "JSON array of [x, y, z] points")->required();
    fit->add_option("--model", model_path, "Shape model or scenario document (bundled model by default)");
    add_common(fit, common);

    auto* reg = app.add_subcommand("register", "Elastic volume-constrained surface registration");
    std::string source_path, target_path;
    reg->add_option("--source", source_path, "Source mesh (document, bare JSON or ASCII PLY)")->required();
    reg->add_option("--target", target_path, "Target mesh")->required();
    add_common(reg, common);

    auto* plan = app.add_subcommand("plan", "Seed planning on a scenario");
    std::string plan_scenario, plan_target, mode_name;
    plan->add_option("--scenario", plan_scenario, "Scenario document")->required();
    plan->add_option("--target", plan_target, "Replace the scenario target mesh");
    plan->add_option("--mode", mode_name, "grid | oblique (scenario recommendation by default)")
        ->check(CLI::IsMember({"grid", "oblique"}));
    add_common(plan, common);

    auto* simulate = app.add_subcommand("simulate", "Simulated robotic insertion of a plan");
    std::string sim_scenario, sim_plan;
    double spin = 0.0;
    simulate->add_option("--scenario", sim_scenario, "Scenario document")->required();
    simulate->add_option("--plan", sim_plan, "Plan document")->required();
    simulate->add_option("--spin", spin, "Needle spin rate, rad/s")->check(CLI::NonNegativeNumber);
    add_common(simulate, common);

    auto* report = app.add_subcommand("report", "Summarize calibration, registration, plan and trial documents");
    std::vector<std::string> report_inputs;
    std::string format = "human";
    report->add_option("inputs", report_inputs, "Documents to summarize")->required();
    report->add_option("--format", format, "human | machine")->check(CLI::IsMember({"human", "machine"}));
    add_common(report, common);

    auto* serve = app.add_subcommand("serve", "Run the planning service (HTTP + JSON, SSE events)");
    std::string bind = "127.0.0.1";
    int port = 8080;
    serve->add_option("--bind", bind, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    add_common(serve, common);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code == 0) return kExitOk;
        const auto active = app.get_subcommands();
        err << (active.empty() ? app.help() : active.front()->help());
        return kExitUsage;
    }

    try {
        const json config = load_config(common);
        std::vector<std::string> hashed_args;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--out") {
                ++i;
            } else if (args[i].rfind("--out=", 0) != 0) {
                hashed_args.push_back(args[i]);
            }
        }
        const json hashed_config = {{"config", config}, {"args", hashed_args}};

        if (scenario->parsed()) {
            if (list) {
                for (const auto& n : scenario_names()) out << n << '\n';
                return kExitOk;
            }
            if (scenario_name.empty()) throw CLI::RequiredError("name");
            Scenario s = load_scenario(scenario_name);
            s.phantom = with_overrides(s.phantom, section(config, "phantom"));
            if (common.seed) s.phantom.rng_seed = *common.seed;
            s.robot = with_overrides(s.robot, section(config, "robot"));
            if (const auto v = s.violations(); !v.empty()) throw InvalidInput(v.front());
            emit(make_document(DocKind::scenario, json(s), created_by("scenario"), hashed_config), common, out);
            return kExitOk;
        }

        if (calibrate->parsed()) {
            const auto t0 = std::chrono::steady_clock::now();
            const RobotDescription robot = robot_from(robot_path, config);
            std::vector<CalibrationObservation> obs;
            std::optional<RigidTransform> truth;
            if (!observations_path.empty()) {
                std::ifstream in(observations_path);
                if (!in) throw Error(Errc::ParseError, "cannot open " + observations_path, observations_path);
                json j;
                try {
                    in >> j;
                    if (j.is_object() && j.contains("payload")) j = j.at("payload").at("observations");
                    obs = j.get<std::vector<CalibrationObservation>>();
                } catch (const std::exception& e) {
                    throw InvalidInput(observations_path + ": " + e.what());
                }
            } else {
                truth = reference_us_from_robot();
                const auto configs = default_calibration_configs(n_insertions, robot);
                obs = simulate_water_phantom(*truth, configs, noise, common.seed.value_or(1), robot);
            }
            const CalibrationResult cal = solve_calibration(obs, robot);
            json payload = cal;
            payload["observations"] = obs;
            json diag = {{"n", obs.size()}};
            if (truth) {
                diag["workspace_error_mm"] = max_workspace_error(*truth, cal.us_from_robot, 20, robot);
                diag["noise_sigma"] = noise;
                diag["seed"] = common.seed.value_or(1);
            }
            diag["runtime_s"] = seconds_since(t0);
            payload["diagnostics"] = diag;
            err << "calibration: rms residual " << cal.rms_residual << " mm";
            if (truth) err << ", worst workspace error " << diag["workspace_error_mm"].get<double>() << " mm";
            err << '\n';
            emit(make_document(DocKind::calibration, payload, created_by("calibrate"), hashed_config), common, out);
            return kExitOk;
        }

        if (fit->parsed()) {
            const auto points = read_points(points_path);
            ShapeModel model = bundled_shape_model();
            if (!model_path.empty()) {
                const Document d = read_document(model_path);
                if (d.kind == DocKind::scenario) {
                    model = payload_as<Scenario>(read_valid(model_path, DocKind::scenario), DocKind::scenario).shape_model;
                } else {
                    model = payload_as<ShapeModel>(read_valid(model_path, DocKind::shape_model), DocKind::shape_model);
                }
            }
            const FitOptions opts = with_overrides(FitOptions{}, section(config, "fit"));
            const FitResult r = fit_to_points(model, points, opts);
            const TriMesh surface = synthesize(model, r.coeffs, r.pose);
            json payload = surface;
            payload["diagnostics"] = {{"rms", r.rms},
                                      {"iterations", r.iterations},
                                      {"coefficients", std::vector<double>(r.coeffs.b.data(), r.coeffs.b.data() + r.coeffs.b.size())},
                                      {"scale", r.pose.scale},
                                      {"pose", r.pose.rigid},
                                      {"points", points.size()}};
            err << "shape fit: rms " << r.rms << " mm after " << r.iterations << " iterations\n";
            emit(make_document(DocKind::mesh, payload, created_by("fit-shape"), hashed_config), common, out);
            return kExitOk;
        }

        if (reg->parsed()) {
            const TriMesh source = read_mesh(source_path);
            const TriMesh target = read_mesh(target_path);
            const RegistrationParams params = with_overrides(RegistrationParams{}, section(config, "registration"));
            const RegistrationResult r = elastic_register(source, target, params);
            json payload = r.field;
            payload["diagnostics"] = {{"surface_rms", r.surface_rms},
                                      {"volume_error", r.volume_error},
                                      {"iterations", r.iterations},
                                      {"converged", r.converged},
                                      {"prealignment", r.prealignment},
                                      {"rms_trace", r.rms_trace}};
            err << "registration: surface rms " << r.surface_rms << " mm, volume error " << 100.0 * r.volume_error
                << " %" << (r.converged ? "" : " (not converged)") << '\n';
            emit(make_document(DocKind::field, payload, created_by("register"), hashed_config), common, out);
            return kExitOk;
        }

        if (plan->parsed()) {
            Scenario s = payload_as<Scenario>(read_valid(plan_scenario, DocKind::scenario), DocKind::scenario);
            TriMesh target = s.target();
            if (!plan_target.empty()) target = read_mesh(plan_target);
            const PlanMode mode = mode_name.empty() ? s.recommended_mode : plan_mode_from_string(mode_name);
            const DoseParams dose = with_overrides(DoseParams{}, section(config, "dose"));
            PlanConstraints c = with_overrides(PlanConstraints{}, section(config, "plan"));
            if (common.seed) c.rng_seed = *common.seed;
            const Plan p = plan_seeds(target, s.arch(), dose, mode, c, s.robot);
            json payload = p;
            double clearance = std::numeric_limits<double>::infinity();
            if (s.arch()) {
                for (const auto& t : p.trajectories) clearance = std::min(clearance, check_arch_conflict(t, *s.arch(), c.margin).clearance);
            }
            payload["diagnostics"] = {{"scenario", s.name}};
            if (std::isfinite(clearance)) payload["diagnostics"]["min_arch_clearance_mm"] = clearance;
            err << "plan (" << to_string(mode) << "): " << p.metrics.seed_count << " seeds, V100 " << p.metrics.v100
                << ", D90 " << p.metrics.d90 << " Gy\n";
            emit(make_document(DocKind::plan, payload, created_by("plan"), hashed_config), common, out);
            return kExitOk;
        }

        if (simulate->parsed()) {
            const Scenario s = payload_as<Scenario>(read_valid(sim_scenario, DocKind::scenario), DocKind::scenario);
            const Plan p = payload_as<Plan>(read_valid(sim_plan, DocKind::plan), DocKind::plan);
            Phantom phantom = with_overrides(s.phantom, section(config, "phantom"));
            if (common.seed) phantom.rng_seed = *common.seed;
            InsertionParams params = with_overrides(InsertionParams{}, section(config, "insertion"));
            params.spin_rate = spin;
            const TrialResult r = execute_plan(p, phantom, params, s.robot);
            err << "trial (spin " << spin << " rad/s): mean error " << r.mean_error << " mm, max " << r.max_error
                << " mm, peak displacement " << r.peak_prostate_displacement << " mm\n";
            emit(make_document(DocKind::trial, json(r), created_by("simulate"), hashed_config), common, out);
            return kExitOk;
        }

        if (report->parsed()) {
            std::vector<ReportInput> inputs;
            for (const auto& path : report_inputs) {
                Document d = read_document(path);
                if (const auto v = validate(d); !v.empty()) throw InvalidInput(path + ": " + v.front());
                inputs.push_back({path, std::move(d)});
            }
            const json r = build_report(inputs);
            const std::string text = format == "machine" ? r.dump(1) + "\n" : human_report(r);
            if (common.out_path.empty()) {
                out << text;
            } else {
                std::ofstream f(common.out_path);
                if (!(f << text)) throw Error(Errc::InvalidArgument, "cannot write " + common.out_path, common.out_path);
            }
            return kExitOk;
        }

        if (serve->parsed()) {
            SessionManager sessions(with_overrides(DoseParams{}, section(config, "dose")),
                                    with_overrides(InsertionParams{}, section(config, "insertion")));
            HttpService http(sessions);
            if (!http.bind(bind, port)) {
                err << "error: cannot bind " << bind << ":" << port << '\n';
                return kExitInvalid;
            }
            err << "prosper service listening on http://" << bind << ":" << http.port() << '\n';
            http.serve();
            return kExitOk;
        }
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        const auto active = app.get_subcommands();
        err << (active.empty() ? app.help() : active.front()->help());
        return kExitUsage;
    } catch (const InvalidInput& e) {
        err << "invalid input: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        const bool infeasible = e.code() == Errc::InfeasibleNoTrajectories || e.code() == Errc::TargetOutsideWorkspace;
        return infeasible ? kExitInfeasible : kExitInvalid;
    }
    return kExitUsage;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace prosper::cli
