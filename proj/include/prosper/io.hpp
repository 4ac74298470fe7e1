#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "prosper/calib.hpp"
#include "prosper/dose.hpp"
#include "prosper/error.hpp"
#include "prosper/register.hpp"
#include "prosper/scenario.hpp"
#include "prosper/shape.hpp"
#include "prosper/sim.hpp"

namespace prosper {

using json = nlohmann::json;

inline constexpr const char* kDocumentVersion = "1.0.0";
inline constexpr const char* kDocumentExtension = ".prosper.json";

enum class DocKind { mesh, robot, calibration, shape_model, field, plan, phantom, trial, scenario };

std::string to_string(DocKind kind);
DocKind doc_kind_from_string(const std::string& s);  ///< throws UnknownKind

struct Provenance {
    std::string created_by;
    std::string timestamp;    ///< ISO 8601, UTC
    std::string config_hash;  ///< FNV-1a 64 of the canonical config dump, hex
};

/// Self-describing envelope shared by every artifact.
/// Payloads may carry an optional "diagnostics" object next to the schema fields.
struct Document {
    std::string version = kDocumentVersion;
    DocKind kind = DocKind::mesh;
    json payload;
    Provenance provenance;
};

std::string config_hash(const json& config);
std::string utc_timestamp();

Document make_document(DocKind kind, json payload, const std::string& created_by, const json& config = json::object());

json document_to_json(const Document& doc);
/// Throws ParseError (envelope shape), UnknownKind, UnsupportedVersion.
Document document_from_json(const json& j);

/// Schema and delegated domain checks; empty iff the payload is valid.
/// Throws UnknownKind, UnsupportedVersion.
std::vector<std::string> validate(const Document& doc);
std::vector<std::string> validate(const json& doc);

void write_document(const std::filesystem::path& path, const Document& doc);
/// Throws ParseError when the file is unreadable or not JSON.
Document read_document(const std::filesystem::path& path);

/// Accepts a mesh document, a bare {"vertices", "faces"} object, or ASCII PLY.
TriMesh read_mesh(const std::filesystem::path& path);

/// Typed payload extraction; throws ParseError when the document kind differs
/// or the payload does not match the schema.
template <class T>
T payload_as(const Document& doc, DocKind expected);

// Serializers (nlohmann ADL hooks).
void to_json(json& j, const RigidTransform& t);
void from_json(const json& j, RigidTransform& t);
void to_json(json& j, const TriMesh& m);
void from_json(const json& j, TriMesh& m);
void to_json(json& j, const JointConfig& q);
void from_json(const json& j, JointConfig& q);
void to_json(json& j, const NeedlePose& p);
void from_json(const json& j, NeedlePose& p);
void to_json(json& j, const RobotDescription& r);
void from_json(const json& j, RobotDescription& r);
void to_json(json& j, const CalibrationObservation& o);
void from_json(const json& j, CalibrationObservation& o);
void to_json(json& j, const CalibrationResult& c);
void from_json(const json& j, CalibrationResult& c);
void to_json(json& j, const ShapeModel& m);
void from_json(const json& j, ShapeModel& m);
void to_json(json& j, const FitOptions& o);
void from_json(const json& j, FitOptions& o);
void to_json(json& j, const DeformationField& f);
void from_json(const json& j, DeformationField& f);
void to_json(json& j, const RegistrationParams& p);
void from_json(const json& j, RegistrationParams& p);
void to_json(json& j, const DoseParams& p);
void from_json(const json& j, DoseParams& p);
void to_json(json& j, const PlanConstraints& c);
void from_json(const json& j, PlanConstraints& c);
void to_json(json& j, const Trajectory& t);
void from_json(const json& j, Trajectory& t);
void to_json(json& j, const Plan& p);
void from_json(const json& j, Plan& p);
void to_json(json& j, const Phantom& p);
void from_json(const json& j, Phantom& p);
void to_json(json& j, const InsertionParams& p);
void from_json(const json& j, InsertionParams& p);
void to_json(json& j, const SimEvent& e);
void from_json(const json& j, SimEvent& e);
void to_json(json& j, const TrialResult& r);
void from_json(const json& j, TrialResult& r);
void to_json(json& j, const Scenario& s);
void from_json(const json& j, Scenario& s);

/// Merge-patches `overrides` onto the serialized defaults. Keys the type does
/// not have are rejected with InvalidArgument (subject = key).
template <class T>
T with_overrides(const T& defaults, const json& overrides)
{
    json base = defaults;
    if (overrides.is_null()) return defaults;
    if (!overrides.is_object()) throw Error(Errc::InvalidArgument, "config section must be an object");
    for (const auto& [key, value] : overrides.items()) {
        if (!base.contains(key)) throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'", key);
    }
    base.merge_patch(overrides);
    try {
        return base.get<T>();
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("bad config value: ") + e.what());
    } catch (const Error& e) {
        throw Error(Errc::InvalidArgument, std::string("bad config value: ") + e.what());
    }
}

}  // namespace prosper
