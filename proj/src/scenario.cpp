#include "prosper/scenario.hpp"

#include "prosper/error.hpp"

namespace prosper {

namespace {

// Gland centre in the robot frame: on the template axis, 65 mm in front of it.
const Vec3 kGlandCenter(0.0, 65.0, 0.0);

TriMesh placed(const TriMesh& m, const Vec3& center)
{
    return transformed(m, RigidTransform::from_axis_angle(Vec3::UnitX(), 0.0, center));
}

Scenario reference()
{
    Scenario s;
    s.name = "reference";
    s.description = "Average gland, pubic arch anterior to all template rows that reach it.";
    s.phantom.prostate = placed(prostate_like_mesh({}), kGlandCenter);
    s.phantom.arch = make_box(Vec3(-40.0, 5.0, 28.0), Vec3(40.0, 15.0, 45.0));
    s.shape_model = bundled_shape_model();
    return s;
}

Scenario large_prostate()
{
    Scenario s;
    s.name = "large_prostate";
    s.description =
        "Enlarged gland whose whole template projection lies behind the pubic arch; "
        "only tilted needles from the outer rows reach it.";
    ProstateShapeParams p;
    p.semi_axes *= 1.3;
    s.phantom.prostate = placed(prostate_like_mesh(p), Vec3(0.0, 72.0, 0.0));
    s.phantom.arch = make_box(Vec3(-40.0, 5.0, -24.0), Vec3(40.0, 12.0, 24.0));
    s.shape_model = bundled_shape_model();
    s.recommended_mode = PlanMode::oblique;
    return s;
}

Scenario edema()
{
    Scenario s = reference();
    s.name = "edema";
    s.description = "Reference gland after 20% edema swelling.";
    s.pre_edema_target = s.phantom.prostate;
    s.edema_fraction = 0.2;
    s.phantom = apply_edema(s.phantom, s.edema_fraction);
    return s;
}

}  // namespace

std::vector<std::string> Scenario::violations() const
{
    std::vector<std::string> out = phantom.violations();
    for (auto& v : shape_model.violations()) out.push_back("shape_model: " + v);
    for (auto& v : robot.violations()) out.push_back("robot: " + v);
    if (!target_in_workspace(target(), robot)) out.emplace_back("target outside the robot workspace");
    return out;
}

std::vector<std::string> scenario_names() { return {"reference", "large_prostate", "edema"}; }

Scenario load_scenario(const std::string& name)
{
    if (name == "reference") return reference();
    if (name == "large_prostate") return large_prostate();
    if (name == "edema") return edema();
    throw Error(Errc::UnknownScenario, "no bundled scenario named '" + name + "'", name);
}

}  // namespace prosper
