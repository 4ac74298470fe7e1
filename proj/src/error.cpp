#include "prosper/error.hpp"

namespace prosper {

std::string_view errc_name(Errc code) noexcept
{
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OpenMesh: return "OpenMesh";
    case Errc::InvertedOrientation: return "InvertedOrientation";
    case Errc::DegenerateFace: return "DegenerateFace";
    case Errc::FactorOutOfRange: return "FactorOutOfRange";
    case Errc::DegenerateSegment: return "DegenerateSegment";
    case Errc::JointLimitViolation: return "JointLimitViolation";
    case Errc::Unreachable: return "Unreachable";
    case Errc::IndexOutOfGrid: return "IndexOutOfGrid";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::DegenerateGeometry: return "DegenerateGeometry";
    case Errc::TopologyMismatch: return "TopologyMismatch";
    case Errc::TooFewShapes: return "TooFewShapes";
    case Errc::CoefficientCountMismatch: return "CoefficientCountMismatch";
    case Errc::CoplanarPoints: return "CoplanarPoints";
    case Errc::NonClosedMesh: return "NonClosedMesh";
    case Errc::VolumeRatioOutOfRange: return "VolumeRatioOutOfRange";
    case Errc::InfeasibleNoTrajectories: return "InfeasibleNoTrajectories";
    case Errc::TargetOutsideWorkspace: return "TargetOutsideWorkspace";
    case Errc::PassiveStopTriggered: return "PassiveStopTriggered";
    case Errc::TipOutsideProstate: return "TipOutsideProstate";
    case Errc::FractionOutOfRange: return "FractionOutOfRange";
    case Errc::UnknownKind: return "UnknownKind";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::UnknownScenario: return "UnknownScenario";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::RevisionConflict: return "RevisionConflict";
    case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

}  // namespace prosper
