#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prosper/dose.hpp"
#include "prosper/robot.hpp"
#include "prosper/shape.hpp"
#include "prosper/sim.hpp"

namespace prosper {

/// Bundled, fully synthetic case: everything needed to plan and simulate.
struct Scenario {
    std::string name;
    std::string description;
    Phantom phantom;                 ///< phantom.prostate is the planning target
    ShapeModel shape_model;
    RobotDescription robot;
    PlanMode recommended_mode = PlanMode::grid;
    double edema_fraction = 0.0;     ///< already applied to phantom.prostate
    std::optional<TriMesh> pre_edema_target;

    const TriMesh& target() const { return phantom.prostate; }
    const TriMesh* arch() const { return phantom.arch ? &*phantom.arch : nullptr; }
    std::vector<std::string> violations() const;
};

std::vector<std::string> scenario_names();

/// Throws UnknownScenario.
Scenario load_scenario(const std::string& name);

}  // namespace prosper
