#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prosper {

enum class Errc {
    InvalidArgument,
    OpenMesh,
    InvertedOrientation,
    DegenerateFace,
    FactorOutOfRange,
    DegenerateSegment,
    JointLimitViolation,
    Unreachable,
    IndexOutOfGrid,
    TooFewPoints,
    DegenerateGeometry,
    TopologyMismatch,
    TooFewShapes,
    CoefficientCountMismatch,
    CoplanarPoints,
    NonClosedMesh,
    VolumeRatioOutOfRange,
    InfeasibleNoTrajectories,
    TargetOutsideWorkspace,
    PassiveStopTriggered,
    TipOutsideProstate,
    FractionOutOfRange,
    UnknownKind,
    UnsupportedVersion,
    UnknownScenario,
    UnknownSession,
    RevisionConflict,
    ParseError,
};

std::string_view errc_name(Errc code) noexcept;

/// Exception type thrown by every module. `subject` names the offending
/// entity when one exists (a joint, a face index, a field name).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message, std::string subject = {})
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code),
          subject_(std::move(subject)) {}

    Errc code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }

private:
    Errc code_;
    std::string subject_;
};

}  // namespace prosper
