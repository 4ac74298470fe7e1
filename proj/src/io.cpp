#include "prosper/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "prosper/error.hpp"

namespace prosper {

namespace {

[[noreturn]] void schema_error(const std::string& msg) { throw Error(Errc::ParseError, msg); }

/// Requires exactly the listed keys (plus any in `optional`).
void expect_keys(const json& j, std::initializer_list<const char*> required, const char* what,
                 std::initializer_list<const char*> optional = {})
{
    if (!j.is_object()) schema_error(std::string(what) + ": expected an object");
    for (const char* k : required) {
        if (!j.contains(k)) schema_error(std::string(what) + ": missing field '" + k + "'");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : required) known = known || key == k;
        for (const char* k : optional) known = known || key == k;
        if (!known) schema_error(std::string(what) + ": unexpected field '" + key + "'");
    }
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j)
{
    if (!j.is_array() || j.size() != 3) schema_error("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json points_json(const std::vector<Vec3>& pts)
{
    json out = json::array();
    for (const auto& p : pts) out.push_back(vec_json(p));
    return out;
}

std::vector<Vec3> points_from(const json& j)
{
    if (!j.is_array()) schema_error("expected an array of 3-vectors");
    std::vector<Vec3> out;
    out.reserve(j.size());
    for (const auto& p : j) out.push_back(vec_from(p));
    return out;
}

template <class Derived>
json matrix_json(const Eigen::MatrixBase<Derived>& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols = -1)
{
    if (!j.is_array()) schema_error("expected a matrix (array of rows)");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    if (cols < 0) cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) schema_error("ragged matrix row");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json faces_json(const std::vector<Face>& faces)
{
    json out = json::array();
    for (const auto& f : faces) out.push_back(json::array({f[0], f[1], f[2]}));
    return out;
}

std::vector<Face> faces_from(const json& j)
{
    if (!j.is_array()) schema_error("expected an array of faces");
    std::vector<Face> out;
    out.reserve(j.size());
    for (const auto& f : j) {
        if (!f.is_array() || f.size() != 3) schema_error("faces must be index triples");
        out.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
    }
    return out;
}

json range_json(const JointRange& r) { return json::array({r.min, r.max}); }

JointRange range_from(const json& j)
{
    if (!j.is_array() || j.size() != 2) schema_error("joint range must be [min, max]");
    return {j[0].get<double>(), j[1].get<double>()};
}

/// Payload without its optional diagnostics block.
json schema_part(const json& payload)
{
    if (!payload.is_object()) return payload;
    json p = payload;
    p.erase("diagnostics");
    return p;
}

template <class T>
T parse_payload(const json& payload)
{
    try {
        return schema_part(payload).get<T>();
    } catch (const json::exception& e) {
        schema_error(std::string("schema: ") + e.what());
    }
}

void append(std::vector<std::string>& out, const std::vector<std::string>& more, const std::string& prefix = {})
{
    for (const auto& v : more) out.push_back(prefix + v);
}

std::vector<std::string> plan_violations(const Plan& p)
{
    std::vector<std::string> out;
    if (!(p.seed_strength > 0.0)) out.emplace_back("seed_strength must be > 0");
    std::size_t seeds = 0;
    for (std::size_t i = 0; i < p.trajectories.size(); ++i) {
        append(out, p.trajectories[i].violations(), "trajectory " + std::to_string(i) + ": ");
        seeds += p.trajectories[i].seed_depths.size();
    }
    if (static_cast<std::size_t>(p.metrics.seed_count) != seeds) out.emplace_back("metrics.seed_count disagrees with trajectories");
    if (!(p.metrics.v100 >= 0.0 && p.metrics.v100 <= 1.0)) out.emplace_back("metrics.v100 must be in [0, 1]");
    if (!(p.metrics.d90 >= 0.0)) out.emplace_back("metrics.d90 must be >= 0");
    return out;
}

std::vector<std::string> trial_violations(const TrialResult& r)
{
    std::vector<std::string> out;
    const std::size_t n = r.per_seed_error.size();
    if (r.planned_rest.size() != n || r.deposited_rest.size() != n) {
        out.emplace_back("per_seed_error, planned_rest and deposited_rest must have equal length");
    }
    for (double e : r.per_seed_error) {
        if (!(e >= 0.0)) {
            out.emplace_back("per_seed_error entries must be >= 0");
            break;
        }
    }
    if (!(r.max_error >= r.mean_error && r.mean_error >= 0.0)) out.emplace_back("require 0 <= mean_error <= max_error");
    for (std::size_t i = 1; i < r.events.size(); ++i) {
        if (r.events[i].t < r.events[i - 1].t) {
            out.emplace_back("events are not time ordered");
            break;
        }
    }
    return out;
}

std::vector<std::string> calibration_violations(const CalibrationResult& c)
{
    std::vector<std::string> out;
    if (!c.us_from_robot.valid()) out.emplace_back("us_from_robot rotation is not a unit quaternion");
    if (!(c.rms_residual >= 0.0)) out.emplace_back("rms_residual must be >= 0");
    for (double r : c.per_point_residuals) {
        if (!(r >= 0.0)) {
            out.emplace_back("residuals must be >= 0");
            break;
        }
    }
    return out;
}

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void check_version(const std::string& version)
{
    int major = 0, minor = 0, patch = 0;
    char tail = 0;
    if (std::sscanf(version.c_str(), "%d.%d.%d%c", &major, &minor, &patch, &tail) != 3) {
        throw Error(Errc::UnsupportedVersion, "malformed version '" + version + "'", version);
    }
    // Same major, minor not newer than ours.
    if (major != 1 || minor > 0) {
        throw Error(Errc::UnsupportedVersion, "document version " + version + " is not readable by " + kDocumentVersion,
                    version);
    }
}

TriMesh read_ply(std::istream& in)
{
    std::string line;
    std::size_t nv = 0, nf = 0;
    std::vector<std::string> vertex_props;
    std::string element;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) schema_error("not a PLY file");
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") schema_error("only ASCII PLY is supported");
        } else if (word == "element") {
            std::size_t count = 0;
            ls >> element >> count;
            if (element == "vertex") nv = count;
            if (element == "face") nf = count;
        } else if (word == "property" && element == "vertex") {
            std::string type, name;
            ls >> type >> name;
            vertex_props.push_back(name);
        } else if (word == "end_header") {
            break;
        }
    }
    auto index_of = [&](const char* name) {
        for (std::size_t i = 0; i < vertex_props.size(); ++i) {
            if (vertex_props[i] == name) return i;
        }
        schema_error(std::string("PLY vertex lacks property ") + name);
    };
    const std::size_t ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    TriMesh m;
    m.vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        std::vector<double> vals(vertex_props.size());
        for (auto& v : vals) {
            if (!(in >> v)) schema_error("truncated PLY vertex list");
        }
        m.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
    }
    for (std::size_t i = 0; i < nf; ++i) {
        int count = 0;
        if (!(in >> count)) schema_error("truncated PLY face list");
        std::vector<int> idx(static_cast<std::size_t>(std::max(count, 0)));
        for (auto& k : idx) in >> k;
        if (!in || count < 3) schema_error("bad PLY face");
        for (int k = 1; k + 1 < count; ++k) m.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
    return m;
}

}  // namespace

std::string to_string(DocKind kind)
{
    switch (kind) {
    case DocKind::mesh: return "mesh";
    case DocKind::robot: return "robot";
    case DocKind::calibration: return "calibration";
    case DocKind::shape_model: return "shape_model";
    case DocKind::field: return "field";
    case DocKind::plan: return "plan";
    case DocKind::phantom: return "phantom";
    case DocKind::trial: return "trial";
    case DocKind::scenario: return "scenario";
    }
    return "mesh";
}

DocKind doc_kind_from_string(const std::string& s)
{
    for (DocKind k : {DocKind::mesh, DocKind::robot, DocKind::calibration, DocKind::shape_model, DocKind::field,
                      DocKind::plan, DocKind::phantom, DocKind::trial, DocKind::scenario}) {
        if (to_string(k) == s) return k;
    }
    throw Error(Errc::UnknownKind, "unknown document kind '" + s + "'", s);
}

// ---- serializers ----

void to_json(json& j, const RigidTransform& t)
{
    const auto& q = t.rotation;
    j = {{"rotation", {q.w(), q.x(), q.y(), q.z()}}, {"translation", vec_json(t.translation)}};
}

void from_json(const json& j, RigidTransform& t)
{
    expect_keys(j, {"rotation", "translation"}, "transform");
    const json& q = j.at("rotation");
    if (!q.is_array() || q.size() != 4) schema_error("rotation must be [w, x, y, z]");
    t.rotation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
    t.translation = vec_from(j.at("translation"));
}

void to_json(json& j, const TriMesh& m) { j = {{"vertices", points_json(m.vertices)}, {"faces", faces_json(m.faces)}}; }

void from_json(const json& j, TriMesh& m)
{
    expect_keys(j, {"vertices", "faces"}, "mesh");
    m.vertices = points_from(j.at("vertices"));
    m.faces = faces_from(j.at("faces"));
}

void to_json(json& j, const JointConfig& q)
{
    j = {{"x", q.x}, {"y", q.y}, {"z", q.z}, {"pan", q.pan}, {"tilt", q.tilt}, {"depth", q.depth}, {"spin_rate", q.spin_rate}};
}

void from_json(const json& j, JointConfig& q)
{
    expect_keys(j, {"x", "y", "z", "pan", "tilt", "depth", "spin_rate"}, "joint config");
    j.at("x").get_to(q.x);
    j.at("y").get_to(q.y);
    j.at("z").get_to(q.z);
    j.at("pan").get_to(q.pan);
    j.at("tilt").get_to(q.tilt);
    j.at("depth").get_to(q.depth);
    j.at("spin_rate").get_to(q.spin_rate);
}

void to_json(json& j, const NeedlePose& p)
{
    j = {{"entry", vec_json(p.entry)}, {"direction", vec_json(p.direction)}, {"depth", p.depth}, {"spin_rate", p.spin_rate}};
}

void from_json(const json& j, NeedlePose& p)
{
    expect_keys(j, {"entry", "direction", "depth", "spin_rate"}, "needle pose");
    p.entry = vec_from(j.at("entry"));
    p.direction = vec_from(j.at("direction"));
    j.at("depth").get_to(p.depth);
    j.at("spin_rate").get_to(p.spin_rate);
}

void to_json(json& j, const RobotDescription& r)
{
    const JointLimits& l = r.limits;
    j = {{"limits",
          {{"x", range_json(l.x)}, {"y", range_json(l.y)}, {"z", range_json(l.z)}, {"pan", range_json(l.pan)},
           {"tilt", range_json(l.tilt)}, {"depth", range_json(l.depth)}}},
         {"carriage_origin", vec_json(r.carriage_origin)},
         {"guide_length", r.guide_length},
         {"template_pose", r.template_pose},
         {"grid_pitch", r.grid_pitch},
         {"grid_half_extent", r.grid_half_extent}};
}

void from_json(const json& j, RobotDescription& r)
{
    expect_keys(j, {"limits", "carriage_origin", "guide_length", "template_pose", "grid_pitch", "grid_half_extent"},
                "robot");
    const json& l = j.at("limits");
    expect_keys(l, {"x", "y", "z", "pan", "tilt", "depth"}, "robot.limits");
    r.limits.x = range_from(l.at("x"));
    r.limits.y = range_from(l.at("y"));
    r.limits.z = range_from(l.at("z"));
    r.limits.pan = range_from(l.at("pan"));
    r.limits.tilt = range_from(l.at("tilt"));
    r.limits.depth = range_from(l.at("depth"));
    r.carriage_origin = vec_from(j.at("carriage_origin"));
    j.at("guide_length").get_to(r.guide_length);
    j.at("template_pose").get_to(r.template_pose);
    j.at("grid_pitch").get_to(r.grid_pitch);
    j.at("grid_half_extent").get_to(r.grid_half_extent);
}

void to_json(json& j, const CalibrationObservation& o) { j = {{"config", o.config}, {"tip_us", vec_json(o.tip_us)}}; }

void from_json(const json& j, CalibrationObservation& o)
{
    expect_keys(j, {"config", "tip_us"}, "observation");
    j.at("config").get_to(o.config);
    o.tip_us = vec_from(j.at("tip_us"));
}

void to_json(json& j, const CalibrationResult& c)
{
    j = {{"us_from_robot", c.us_from_robot}, {"rms_residual", c.rms_residual}, {"per_point_residuals", c.per_point_residuals}};
}

void from_json(const json& j, CalibrationResult& c)
{
    expect_keys(j, {"us_from_robot", "rms_residual", "per_point_residuals"}, "calibration");
    j.at("us_from_robot").get_to(c.us_from_robot);
    j.at("rms_residual").get_to(c.rms_residual);
    j.at("per_point_residuals").get_to(c.per_point_residuals);
}

void to_json(json& j, const ShapeModel& m)
{
    j = {{"mean", points_json(m.mean)},
         {"modes", matrix_json(m.modes.transpose())},  // one row per mode
         {"variances", std::vector<double>(m.variances.data(), m.variances.data() + m.variances.size())},
         {"faces", faces_json(m.faces)},
         {"retained_fraction", m.retained_fraction},
         {"training_count", m.training_count}};
}

void from_json(const json& j, ShapeModel& m)
{
    expect_keys(j, {"mean", "modes", "variances", "faces", "retained_fraction", "training_count"}, "shape_model");
    m.mean = points_from(j.at("mean"));
    const auto var = j.at("variances").get<std::vector<double>>();
    m.variances = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size()));
    const json& modes = j.at("modes");
    m.modes = modes.empty() ? Eigen::MatrixXd(static_cast<Eigen::Index>(3 * m.mean.size()), 0)
                            : Eigen::MatrixXd(matrix_from(modes).transpose());
    m.faces = faces_from(j.at("faces"));
    j.at("retained_fraction").get_to(m.retained_fraction);
    j.at("training_count").get_to(m.training_count);
}

void to_json(json& j, const FitOptions& o)
{
    j = {{"beta", o.beta}, {"max_iterations", o.max_iterations}, {"tolerance_mm", o.tolerance_mm},
         {"plausibility_sigmas", o.plausibility_sigmas}};
}

void from_json(const json& j, FitOptions& o)
{
    expect_keys(j, {"beta", "max_iterations", "tolerance_mm", "plausibility_sigmas"}, "fit options");
    j.at("beta").get_to(o.beta);
    j.at("max_iterations").get_to(o.max_iterations);
    j.at("tolerance_mm").get_to(o.tolerance_mm);
    j.at("plausibility_sigmas").get_to(o.plausibility_sigmas);
}

void to_json(json& j, const DeformationField& f)
{
    j = {{"control_points", matrix_json(f.control_points)},
         {"tps_weights", matrix_json(f.tps_weights)},
         {"affine", matrix_json(f.affine_part)}};
}

void from_json(const json& j, DeformationField& f)
{
    expect_keys(j, {"control_points", "tps_weights", "affine"}, "field");
    f.control_points = matrix_from(j.at("control_points"), 3);
    f.tps_weights = matrix_from(j.at("tps_weights"), 3);
    const Eigen::MatrixXd a = matrix_from(j.at("affine"), 4);
    if (a.rows() != 3) schema_error("affine must be 3 x 4");
    f.affine_part = a;
}

void to_json(json& j, const RegistrationParams& p)
{
    j = {{"lambda_bend", p.lambda_bend}, {"lambda_vol", p.lambda_vol}, {"max_iters", p.max_iters},
         {"tol_mm", p.tol_mm}, {"n_control", p.n_control}};
}

void from_json(const json& j, RegistrationParams& p)
{
    expect_keys(j, {"lambda_bend", "lambda_vol", "max_iters", "tol_mm", "n_control"}, "registration params");
    j.at("lambda_bend").get_to(p.lambda_bend);
    j.at("lambda_vol").get_to(p.lambda_vol);
    j.at("max_iters").get_to(p.max_iters);
    j.at("tol_mm").get_to(p.tol_mm);
    j.at("n_control").get_to(p.n_control);
}

void to_json(json& j, const DoseParams& p)
{
    json knots = json::array();
    for (const auto& [r, g] : p.radial_dose) knots.push_back({r, g});
    j = {{"dose_rate_constant", p.dose_rate_constant}, {"radial_dose", knots},
         {"prescription_gy", p.prescription_gy}, {"integration_factor_h", p.integration_factor_h}};
}

void from_json(const json& j, DoseParams& p)
{
    expect_keys(j, {"dose_rate_constant", "radial_dose", "prescription_gy", "integration_factor_h"}, "dose params");
    j.at("dose_rate_constant").get_to(p.dose_rate_constant);
    p.radial_dose.clear();
    for (const auto& k : j.at("radial_dose")) {
        if (!k.is_array() || k.size() != 2) schema_error("radial_dose knots must be [r, g]");
        p.radial_dose.emplace_back(k[0].get<double>(), k[1].get<double>());
    }
    j.at("prescription_gy").get_to(p.prescription_gy);
    j.at("integration_factor_h").get_to(p.integration_factor_h);
}

void to_json(json& j, const PlanConstraints& c)
{
    j = {{"max_seeds", c.max_seeds},
         {"margin", c.margin},
         {"seed_strength", c.seed_strength},
         {"site_spacing", c.site_spacing},
         {"min_seed_separation", c.min_seed_separation},
         {"target_v100", c.target_v100},
         {"oblique_tilts_deg", c.oblique_tilts_deg},
         {"n_samples", c.n_samples},
         {"rng_seed", c.rng_seed}};
}

void from_json(const json& j, PlanConstraints& c)
{
    expect_keys(j, {"max_seeds", "margin", "seed_strength", "site_spacing", "min_seed_separation", "target_v100",
                    "oblique_tilts_deg", "n_samples", "rng_seed"},
                "plan constraints");
    j.at("max_seeds").get_to(c.max_seeds);
    j.at("margin").get_to(c.margin);
    j.at("seed_strength").get_to(c.seed_strength);
    j.at("site_spacing").get_to(c.site_spacing);
    j.at("min_seed_separation").get_to(c.min_seed_separation);
    j.at("target_v100").get_to(c.target_v100);
    j.at("oblique_tilts_deg").get_to(c.oblique_tilts_deg);
    j.at("n_samples").get_to(c.n_samples);
    j.at("rng_seed").get_to(c.rng_seed);
}

void to_json(json& j, const Trajectory& t)
{
    j = {{"pose", t.pose}, {"seed_depths", t.seed_depths}, {"col", t.col}, {"row", t.row}, {"tilt", t.tilt}};
}

void from_json(const json& j, Trajectory& t)
{
    expect_keys(j, {"pose", "seed_depths", "col", "row", "tilt"}, "trajectory");
    j.at("pose").get_to(t.pose);
    j.at("seed_depths").get_to(t.seed_depths);
    j.at("col").get_to(t.col);
    j.at("row").get_to(t.row);
    j.at("tilt").get_to(t.tilt);
}

void to_json(json& j, const Plan& p)
{
    j = {{"mode", to_string(p.mode)},
         {"trajectories", p.trajectories},
         {"metrics",
          {{"d90", p.metrics.d90}, {"v100", p.metrics.v100}, {"seed_count", p.metrics.seed_count},
           {"sample_count", p.metrics.sample_count}}},
         {"seed_strength", p.seed_strength},
         {"v100_trace", p.v100_trace}};
}

void from_json(const json& j, Plan& p)
{
    expect_keys(j, {"mode", "trajectories", "metrics", "seed_strength", "v100_trace"}, "plan");
    try {
        p.mode = plan_mode_from_string(j.at("mode").get<std::string>());
    } catch (const Error& e) {
        schema_error(e.what());
    }
    j.at("trajectories").get_to(p.trajectories);
    const json& m = j.at("metrics");
    expect_keys(m, {"d90", "v100", "seed_count", "sample_count"}, "plan.metrics");
    m.at("d90").get_to(p.metrics.d90);
    m.at("v100").get_to(p.metrics.v100);
    m.at("seed_count").get_to(p.metrics.seed_count);
    m.at("sample_count").get_to(p.metrics.sample_count);
    j.at("seed_strength").get_to(p.seed_strength);
    j.at("v100_trace").get_to(p.v100_trace);
}

void to_json(json& j, const Phantom& p)
{
    j = {{"prostate", p.prostate},
         {"anchor_translation_stiffness", p.anchor_translation_stiffness},
         {"anchor_rotation_stiffness", p.anchor_rotation_stiffness},
         {"friction_coefficient", p.friction_coefficient},
         {"tissue_pressure", p.tissue_pressure},
         {"cutting_force", p.cutting_force},
         {"needle_radius", p.needle_radius},
         {"arch", p.arch ? json(*p.arch) : json(nullptr)},
         {"rng_seed", p.rng_seed},
         {"deposit_jitter", p.deposit_jitter},
         {"stiffness_jitter", p.stiffness_jitter},
         {"arch_contact_stiffness", p.arch_contact_stiffness}};
}

void from_json(const json& j, Phantom& p)
{
    expect_keys(j, {"prostate", "anchor_translation_stiffness", "anchor_rotation_stiffness", "friction_coefficient",
                    "tissue_pressure", "cutting_force", "needle_radius", "arch", "rng_seed", "deposit_jitter",
                    "stiffness_jitter", "arch_contact_stiffness"},
                "phantom");
    j.at("prostate").get_to(p.prostate);
    j.at("anchor_translation_stiffness").get_to(p.anchor_translation_stiffness);
    j.at("anchor_rotation_stiffness").get_to(p.anchor_rotation_stiffness);
    j.at("friction_coefficient").get_to(p.friction_coefficient);
    j.at("tissue_pressure").get_to(p.tissue_pressure);
    j.at("cutting_force").get_to(p.cutting_force);
    j.at("needle_radius").get_to(p.needle_radius);
    if (j.at("arch").is_null()) {
        p.arch.reset();
    } else {
        p.arch = j.at("arch").get<TriMesh>();
    }
    j.at("rng_seed").get_to(p.rng_seed);
    j.at("deposit_jitter").get_to(p.deposit_jitter);
    j.at("stiffness_jitter").get_to(p.stiffness_jitter);
    j.at("arch_contact_stiffness").get_to(p.arch_contact_stiffness);
}

void to_json(json& j, const InsertionParams& p)
{
    j = {{"feed_rate", p.feed_rate}, {"spin_rate", p.spin_rate}, {"dt", p.dt},
         {"stop_force_threshold", p.stop_force_threshold}, {"event_stride", p.event_stride}};
}

void from_json(const json& j, InsertionParams& p)
{
    expect_keys(j, {"feed_rate", "spin_rate", "dt", "stop_force_threshold", "event_stride"}, "insertion params");
    j.at("feed_rate").get_to(p.feed_rate);
    j.at("spin_rate").get_to(p.spin_rate);
    j.at("dt").get_to(p.dt);
    j.at("stop_force_threshold").get_to(p.stop_force_threshold);
    j.at("event_stride").get_to(p.event_stride);
}

void to_json(json& j, const SimEvent& e)
{
    j = {{"t", e.t}, {"kind", e.kind}, {"trajectory", e.trajectory}, {"depth", e.depth},
         {"displacement", e.displacement}, {"force", e.force}, {"detail", e.detail}};
}

void from_json(const json& j, SimEvent& e)
{
    expect_keys(j, {"t", "kind", "trajectory", "depth", "displacement", "force", "detail"}, "event");
    j.at("t").get_to(e.t);
    j.at("kind").get_to(e.kind);
    j.at("trajectory").get_to(e.trajectory);
    j.at("depth").get_to(e.depth);
    j.at("displacement").get_to(e.displacement);
    j.at("force").get_to(e.force);
    j.at("detail").get_to(e.detail);
}

void to_json(json& j, const TrialResult& r)
{
    j = {{"per_seed_error", r.per_seed_error},
         {"mean_error", r.mean_error},
         {"max_error", r.max_error},
         {"peak_prostate_displacement", r.peak_prostate_displacement},
         {"planned_rest", points_json(r.planned_rest)},
         {"deposited_rest", points_json(r.deposited_rest)},
         {"skipped_trajectories", r.skipped_trajectories},
         {"events", r.events},
         {"spin_rate", r.spin_rate}};
}

void from_json(const json& j, TrialResult& r)
{
    expect_keys(j, {"per_seed_error", "mean_error", "max_error", "peak_prostate_displacement", "planned_rest",
                    "deposited_rest", "skipped_trajectories", "events", "spin_rate"},
                "trial");
    j.at("per_seed_error").get_to(r.per_seed_error);
    j.at("mean_error").get_to(r.mean_error);
    j.at("max_error").get_to(r.max_error);
    j.at("peak_prostate_displacement").get_to(r.peak_prostate_displacement);
    r.planned_rest = points_from(j.at("planned_rest"));
    r.deposited_rest = points_from(j.at("deposited_rest"));
    j.at("skipped_trajectories").get_to(r.skipped_trajectories);
    j.at("events").get_to(r.events);
    j.at("spin_rate").get_to(r.spin_rate);
}

void to_json(json& j, const Scenario& s)
{
    j = {{"name", s.name},
         {"description", s.description},
         {"phantom", s.phantom},
         {"shape_model", s.shape_model},
         {"robot", s.robot},
         {"recommended_mode", to_string(s.recommended_mode)},
         {"edema_fraction", s.edema_fraction},
         {"pre_edema_target", s.pre_edema_target ? json(*s.pre_edema_target) : json(nullptr)}};
}

void from_json(const json& j, Scenario& s)
{
    expect_keys(j, {"name", "description", "phantom", "shape_model", "robot", "recommended_mode", "edema_fraction",
                    "pre_edema_target"},
                "scenario");
    j.at("name").get_to(s.name);
    j.at("description").get_to(s.description);
    j.at("phantom").get_to(s.phantom);
    j.at("shape_model").get_to(s.shape_model);
    j.at("robot").get_to(s.robot);
    try {
        s.recommended_mode = plan_mode_from_string(j.at("recommended_mode").get<std::string>());
    } catch (const Error& e) {
        schema_error(e.what());
    }
    j.at("edema_fraction").get_to(s.edema_fraction);
    if (j.at("pre_edema_target").is_null()) {
        s.pre_edema_target.reset();
    } else {
        s.pre_edema_target = j.at("pre_edema_target").get<TriMesh>();
    }
}

// ---- envelope ----

std::string config_hash(const json& config)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
    return buf;
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Document make_document(DocKind kind, json payload, const std::string& created_by, const json& config)
{
    Document d;
    d.kind = kind;
    d.payload = std::move(payload);
    d.provenance = {created_by, utc_timestamp(), config_hash(config)};
    return d;
}

json document_to_json(const Document& doc)
{
    return {{"version", doc.version},
            {"kind", to_string(doc.kind)},
            {"payload", doc.payload},
            {"provenance",
             {{"created_by", doc.provenance.created_by},
              {"timestamp", doc.provenance.timestamp},
              {"config_hash", doc.provenance.config_hash}}}};
}

Document document_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("version") || !j.contains("kind") || !j.contains("payload")) {
        schema_error("not a document: expected version, kind and payload");
    }
    Document d;
    try {
        d.version = j.at("version").get<std::string>();
        check_version(d.version);
        d.kind = doc_kind_from_string(j.at("kind").get<std::string>());
        d.payload = j.at("payload");
        if (j.contains("provenance")) {
            const json& p = j.at("provenance");
            d.provenance.created_by = p.value("created_by", "");
            d.provenance.timestamp = p.value("timestamp", "");
            d.provenance.config_hash = p.value("config_hash", "");
        }
    } catch (const json::exception& e) {
        schema_error(std::string("envelope: ") + e.what());
    }
    return d;
}

std::vector<std::string> validate(const Document& doc)
{
    check_version(doc.version);
    std::vector<std::string> out;
    if (doc.payload.is_object() && doc.payload.contains("diagnostics") && !doc.payload.at("diagnostics").is_object()) {
        out.emplace_back("diagnostics must be an object");
    }
    try {
        switch (doc.kind) {
        case DocKind::mesh: append(out, mesh_violations(parse_payload<TriMesh>(doc.payload))); break;
        case DocKind::robot: append(out, parse_payload<RobotDescription>(doc.payload).violations()); break;
        case DocKind::calibration: {
            json p = schema_part(doc.payload);
            if (p.is_object() && p.contains("observations")) {
                try {
                    (void)p.at("observations").get<std::vector<CalibrationObservation>>();
                } catch (const json::exception& e) {
                    schema_error(std::string("schema: observations: ") + e.what());
                }
                p.erase("observations");
            }
            append(out, calibration_violations(parse_payload<CalibrationResult>(p)));
            break;
        }
        case DocKind::shape_model: append(out, parse_payload<ShapeModel>(doc.payload).violations()); break;
        case DocKind::field: append(out, parse_payload<DeformationField>(doc.payload).violations()); break;
        case DocKind::plan: append(out, plan_violations(parse_payload<Plan>(doc.payload))); break;
        case DocKind::phantom: append(out, parse_payload<Phantom>(doc.payload).violations()); break;
        case DocKind::trial: append(out, trial_violations(parse_payload<TrialResult>(doc.payload))); break;
        case DocKind::scenario: append(out, parse_payload<Scenario>(doc.payload).violations()); break;
        }
    } catch (const Error& e) {
        if (e.code() != Errc::ParseError) throw;
        out.emplace_back(e.what());
    }
    return out;
}

std::vector<std::string> validate(const json& doc) { return validate(document_from_json(doc)); }

void write_document(const std::filesystem::path& path, const Document& doc)
{
    std::ofstream out(path);
    if (!out) throw Error(Errc::InvalidArgument, "cannot write " + path.string(), path.string());
    out << document_to_json(doc).dump(1) << '\n';
    if (!out) throw Error(Errc::InvalidArgument, "write failed for " + path.string(), path.string());
}

Document read_document(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path.string(), path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, path.string() + ": " + e.what(), path.string());
    }
    return document_from_json(j);
}

TriMesh read_mesh(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(Errc::ParseError, "cannot open " + path.string(), path.string());
    const int first = in.peek();
    if (first == 'p') return read_ply(in);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, path.string() + ": " + e.what(), path.string());
    }
    if (j.is_object() && j.contains("kind")) return payload_as<TriMesh>(document_from_json(j), DocKind::mesh);
    return parse_payload<TriMesh>(j);
}

template <class T>
T payload_as(const Document& doc, DocKind expected)
{
    if (doc.kind != expected) {
        schema_error("expected a " + to_string(expected) + " document, got " + to_string(doc.kind));
    }
    if (expected == DocKind::calibration) {
        json p = schema_part(doc.payload);
        if (p.is_object()) p.erase("observations");
        return parse_payload<T>(p);
    }
    return parse_payload<T>(doc.payload);
}

template TriMesh payload_as<TriMesh>(const Document&, DocKind);
template RobotDescription payload_as<RobotDescription>(const Document&, DocKind);
template CalibrationResult payload_as<CalibrationResult>(const Document&, DocKind);
template ShapeModel payload_as<ShapeModel>(const Document&, DocKind);
template DeformationField payload_as<DeformationField>(const Document&, DocKind);
template Plan payload_as<Plan>(const Document&, DocKind);
template Phantom payload_as<Phantom>(const Document&, DocKind);
template TrialResult payload_as<TrialResult>(const Document&, DocKind);
template Scenario payload_as<Scenario>(const Document&, DocKind);

}  // namespace prosper
