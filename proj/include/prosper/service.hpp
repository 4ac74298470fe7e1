#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prosper/io.hpp"

namespace prosper {

/// Immutable snapshot of one planning session.
struct SessionState {
    std::string id;
    long revision = 0;
    Scenario scenario;            ///< as loaded
    Phantom phantom;              ///< current (edema applied)
    double edema_fraction = 0.0;  ///< relative to the pre-edema gland
    Plan draft;
    double spin_rate = 0.0;       ///< rad/s used by execute
    DoseParams dose;
    InsertionParams insertion;
    std::shared_ptr<const std::vector<Vec3>> samples;  ///< metric samples of the current target

    const TriMesh& target() const { return phantom.prostate; }
};

/// Canonical JSON of the state (what replay hashes are computed from).
json state_json(const SessionState& s);
std::string state_hash(const SessionState& s);

struct DoseSlice {
    char axis = 'z';              ///< slice normal
    double offset = 0.0;          ///< mm along the normal
    double spacing = 1.0;         ///< mm per cell
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();  ///< (u, v) of cell (0, 0)
    int nu = 0;
    int nv = 0;
    std::vector<double> values;   ///< Gy, row-major: values[j * nu + i] at origin + spacing * (i, j)
    std::vector<std::array<Eigen::Vector2d, 2>> contour;  ///< target cross-section segments
};

/// In-plane axes for a slice normal: x -> (y, z), y -> (x, z), z -> (x, y).
DoseSlice dose_slice(const TriMesh& target, std::span<const Seed> seeds, const DoseParams& params, char axis,
                     double offset, double spacing, double pad = 10.0);

json to_json_value(const DoseSlice& s);

/// In-memory sessions. Mutations on one session are serialized and checked
/// against the caller's revision; reads work on immutable snapshots.
class SessionManager {
public:
    using EventSink = std::function<void(const SimEvent&)>;

    explicit SessionManager(DoseParams dose = {}, InsertionParams insertion = {});

    /// Throws UnknownScenario.
    json create_session(const std::string& scenario_name);

    /// Throws UnknownSession.
    std::shared_ptr<const SessionState> snapshot(const std::string& id) const;
    json get_state(const std::string& id) const;

    /// `op` is one of
    ///   {"op": "add_seed", "position": [x, y, z]} (snapped to the nearest hole)
    ///   {"op": "add_seed", "col", "row", "depth", "tilt_deg"?}
    ///   {"op": "move_seed", "seed": i, then the add_seed fields}
    ///   {"op": "delete_seed", "seed": i}
    ///   {"op": "set_tilt", "trajectory": t, "tilt_deg"}
    ///   {"op": "set_spin", "spin_rate"}
    ///   {"op": "apply_edema", "fraction"}
    /// Throws RevisionConflict, UnknownSession, InvalidArgument, FractionOutOfRange.
    json mutate(const std::string& id, long expected_revision, const json& op);

    /// Throws InfeasibleNoTrajectories / TargetOutsideWorkspace through.
    json optimize(const std::string& id, long expected_revision, PlanMode mode);

    json get_dose_slice(const std::string& id, char axis, double offset, double spacing) const;

    /// Runs the draft; events reach `sink` in order before the result returns.
    TrialResult execute(const std::string& id, const EventSink& sink = {}) const;

    /// Scenario, phantom, plan and (when executed) trial documents.
    json export_bundle(const std::string& id) const;

    std::vector<std::string> session_ids() const;

private:
    struct Slot {
        std::mutex write;
        mutable std::mutex read;
        std::shared_ptr<const SessionState> state;
        std::mutex trial;
        std::optional<TrialResult> last_trial;
        long trial_revision = -1;
    };

    std::shared_ptr<Slot> slot(const std::string& id) const;
    json commit(Slot& slot, std::shared_ptr<SessionState> next);

    DoseParams dose_;
    InsertionParams insertion_;
    mutable std::mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    long next_id_ = 1;
};

/// HTTP + JSON transport over a SessionManager; execute events as SSE.
class HttpService {
public:
    explicit HttpService(SessionManager& sessions);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds and serves until stop(). port 0 picks a free port (see port()).
    bool bind(const std::string& host, int port);
    void serve();
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

/// Maps library error codes to HTTP status codes.
int http_status(Errc code);

}  // namespace prosper
