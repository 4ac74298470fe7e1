#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "prosper/io.hpp"
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

/// Equal up to 1e-12 relative for reals, exact otherwise.
bool json_close(const json& a, const json& b)
{
    if (a.is_number_float() || b.is_number_float()) {
        if (!a.is_number() || !b.is_number()) return false;
        const double x = a.get<double>(), y = b.get<double>();
        return std::abs(x - y) <= 1e-12 * std::max({1.0, std::abs(x), std::abs(y)});
    }
    if (a.type() != b.type()) return false;
    if (a.is_array()) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!json_close(a[i], b[i])) return false;
        }
        return true;
    }
    if (a.is_object()) {
        if (a.size() != b.size()) return false;
        for (const auto& [k, v] : a.items()) {
            if (!b.contains(k) || !json_close(v, b.at(k))) return false;
        }
        return true;
    }
    return a == b;
}

std::filesystem::path temp_path(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("prosper_test_io_" + name);
}

template <class T>
void check_round_trip(const T& value, DocKind kind)
{
    const Document doc = make_document(kind, json(value), "test_io");
    CHECK(validate(doc).empty());
    const json text = json::parse(document_to_json(doc).dump());
    const Document back = document_from_json(text);
    CHECK(back.kind == kind);
    const T parsed = payload_as<T>(back, kind);
    CHECK(json_close(json(parsed), json(value)));
}

}  // namespace

TEST_CASE("document kinds")
{
    for (const char* k : {"mesh", "robot", "calibration", "shape_model", "field", "plan", "phantom", "trial", "scenario"}) {
        CHECK(to_string(doc_kind_from_string(k)) == k);
    }
    CHECK(code_of([] { doc_kind_from_string("voxels"); }) == Errc::UnknownKind);
}

TEST_CASE("round trips")
{
    const Scenario& s = reference();
    check_round_trip(s.target(), DocKind::mesh);
    check_round_trip(s.robot, DocKind::robot);
    check_round_trip(s.shape_model, DocKind::shape_model);
    check_round_trip(s.phantom, DocKind::phantom);
    check_round_trip(s, DocKind::scenario);
    check_round_trip(load_scenario("edema"), DocKind::scenario);
    check_round_trip(reference_plan(), DocKind::plan);

    CalibrationResult cal;
    cal.us_from_robot = reference_us_from_robot();
    cal.rms_residual = 0.125;
    cal.per_point_residuals = {0.1, 0.2, 0.05};
    check_round_trip(cal, DocKind::calibration);

    Eigen::MatrixX3d ctrl(4, 3), tgt(4, 3);
    ctrl << 0, 0, 0, 10, 0, 0, 0, 10, 0, 0, 0, 10;
    tgt = ctrl;
    tgt(3, 2) += 1.0 / 3.0;
    check_round_trip(interpolating_field(ctrl, tgt), DocKind::field);

    InsertionParams params;
    params.spin_rate = 60.0;
    Phantom fast = s.phantom;
    const TrialResult trial = execute_plan(reference_plan(), fast, params);
    check_round_trip(trial, DocKind::trial);

    // Reals are written with round-trip precision: bit exact.
    const json j = json::parse(json(reference_plan()).dump());
    CHECK(j.get<Plan>().metrics.d90 == reference_plan().metrics.d90);
}

TEST_CASE("validation")
{
    SUBCASE("mesh with a boundary edge")
    {
        TriMesh open = reference().target();
        open.faces.pop_back();
        const auto v = validate(make_document(DocKind::mesh, json(open), "t"));
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("OpenMesh") != std::string::npos);
    }
    SUBCASE("payload of another kind")
    {
        const auto v = validate(make_document(DocKind::plan, json(reference().phantom), "t"));
        REQUIRE_FALSE(v.empty());
        CHECK(v.front().find("plan") != std::string::npos);
    }
    SUBCASE("unexpected field and diagnostics")
    {
        json p = json(reference().robot);
        p["diagnostics"] = {{"note", "free-form"}};
        CHECK(validate(make_document(DocKind::robot, p, "t")).empty());
        p["colour"] = "red";
        CHECK_FALSE(validate(make_document(DocKind::robot, p, "t")).empty());
    }
    SUBCASE("domain invariants are delegated")
    {
        Phantom ph = reference().phantom;
        ph.friction_coefficient = -1.0;
        CHECK_FALSE(validate(make_document(DocKind::phantom, json(ph), "t")).empty());
        Plan plan = reference_plan();
        plan.metrics.seed_count += 1;
        CHECK_FALSE(validate(make_document(DocKind::plan, json(plan), "t")).empty());
        RobotDescription robot;
        robot.grid_pitch = 0.0;
        CHECK_FALSE(validate(make_document(DocKind::robot, json(robot), "t")).empty());
    }
    SUBCASE("envelope errors")
    {
        json doc = document_to_json(make_document(DocKind::robot, json(RobotDescription{}), "t"));
        doc["version"] = "2.0.0";
        CHECK(code_of([&] { validate(doc); }) == Errc::UnsupportedVersion);
        doc["version"] = "1.1.0";
        CHECK(code_of([&] { validate(doc); }) == Errc::UnsupportedVersion);
        doc["version"] = "1.0.7";
        CHECK(validate(doc).empty());
        doc["kind"] = "hologram";
        CHECK(code_of([&] { validate(doc); }) == Errc::UnknownKind);
        CHECK(code_of([] { document_from_json(json::array()); }) == Errc::ParseError);
    }
    SUBCASE("provenance")
    {
        const Document a = make_document(DocKind::robot, json(RobotDescription{}), "t", {{"seed", 1}});
        const Document b = make_document(DocKind::robot, json(RobotDescription{}), "t", {{"seed", 2}});
        CHECK(a.provenance.config_hash.size() == 16);
        CHECK(a.provenance.config_hash != b.provenance.config_hash);
        CHECK(a.provenance.timestamp.back() == 'Z');
    }
}

TEST_CASE("files")
{
    const TriMesh cube = make_box(Vec3(0, 0, 0), Vec3(1, 2, 3));

    SUBCASE("document")
    {
        const auto path = temp_path("mesh.prosper.json");
        write_document(path, make_document(DocKind::mesh, json(cube), "t"));
        const Document d = read_document(path);
        CHECK(validate(d).empty());
        CHECK(read_mesh(path).vertices == cube.vertices);
        CHECK(code_of([&] { payload_as<Plan>(d, DocKind::plan); }) == Errc::ParseError);
        std::filesystem::remove(path);
    }
    SUBCASE("bare mesh json")
    {
        const auto path = temp_path("bare.json");
        std::ofstream(path) << json(cube).dump();
        CHECK(read_mesh(path).faces == cube.faces);
        std::filesystem::remove(path);
    }
    SUBCASE("ascii ply with a quad")
    {
        const auto path = temp_path("quad.ply");
        std::ofstream(path) << "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\n"
                               "property float z\nproperty uchar red\nelement face 1\n"
                               "property list uchar int vertex_indices\nend_header\n"
                               "0 0 0 1\n1 0 0 1\n1 1 0 1\n0 1 0 1\n4 0 1 2 3\n";
        const TriMesh m = read_mesh(path);
        CHECK(m.vertices.size() == 4);
        REQUIRE(m.faces.size() == 2);
        CHECK(m.faces[1] == Face{0, 2, 3});
        std::filesystem::remove(path);
    }
    SUBCASE("unreadable")
    {
        CHECK(code_of([] { read_document("/nonexistent/x.prosper.json"); }) == Errc::ParseError);
        const auto path = temp_path("junk.json");
        std::ofstream(path) << "{ not json";
        CHECK(code_of([&] { read_document(path); }) == Errc::ParseError);
        std::filesystem::remove(path);
    }
}

TEST_CASE("config overrides")
{
    const PlanConstraints c = with_overrides(PlanConstraints{}, {{"max_seeds", 12}, {"margin", 3.5}});
    CHECK(c.max_seeds == 12);
    CHECK(c.margin == 3.5);
    CHECK(c.site_spacing == PlanConstraints{}.site_spacing);
    CHECK(with_overrides(InsertionParams{}, nullptr).dt == InsertionParams{}.dt);
    CHECK(code_of([] { with_overrides(PlanConstraints{}, {{"max_seed", 12}}); }) == Errc::InvalidArgument);
    CHECK(code_of([] { with_overrides(PlanConstraints{}, {{"max_seeds", "many"}}); }) == Errc::InvalidArgument);
    CHECK(code_of([] { with_overrides(PlanConstraints{}, json::array()); }) == Errc::InvalidArgument);
}

TEST_CASE("shipped example documents")
{
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(PROSPER_EXAMPLES_DIR)) {
        const std::string path = entry.path().string();
        if (!path.ends_with(".prosper.json")) continue;
        CAPTURE(path);
        const Document d = read_document(path);
        CHECK(validate(d).empty());
        CHECK(document_from_json(document_to_json(d)).payload == d.payload);
        ++count;
    }
    CHECK(count >= 4);

    const Plan p = payload_as<Plan>(read_document(std::string(PROSPER_EXAMPLES_DIR) + "/plan.prosper.json"), DocKind::plan);
    const Scenario& s = reference();
    CHECK(json(p) == json(plan_seeds(s.target(), s.arch(), DoseParams{}, PlanMode::grid, PlanConstraints{}, s.robot)));
}
