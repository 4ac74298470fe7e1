#include "prosper/service.hpp"

#include <cmath>
#include <map>

#include "prosper/error.hpp"

namespace prosper {

namespace {

constexpr int kMetricSamples = 10000;
constexpr std::uint64_t kMetricSeed = 1;
constexpr double kDisplayCell = 2.0;  // mm, vertex clustering for display meshes
constexpr std::size_t kMaxSliceCells = 250000;

std::shared_ptr<const std::vector<Vec3>> samples_for(const TriMesh& target)
{
    return std::make_shared<const std::vector<Vec3>>(interior_samples(target, kMetricSamples, kMetricSeed));
}

Phantom pre_edema_phantom(const Scenario& s)
{
    Phantom p = s.phantom;
    if (s.pre_edema_target) p.prostate = *s.pre_edema_target;
    return p;
}

void refresh_metrics(SessionState& s)
{
    const auto seeds = s.draft.seeds();
    s.draft.metrics = metrics_from_samples(*s.samples, seeds, s.dose);
}

/// Vertex clustering on a regular grid; faces that collapse are dropped.
TriMesh decimate(const TriMesh& m, double cell)
{
    std::map<std::array<long, 3>, int> index;
    std::vector<Vec3> sums;
    std::vector<int> counts;
    std::vector<int> remap(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
        const Vec3& v = m.vertices[i];
        const std::array<long, 3> key{std::lround(std::floor(v.x() / cell)), std::lround(std::floor(v.y() / cell)),
                                      std::lround(std::floor(v.z() / cell))};
        auto [it, fresh] = index.emplace(key, static_cast<int>(sums.size()));
        if (fresh) {
            sums.push_back(Vec3::Zero());
            counts.push_back(0);
        }
        sums[it->second] += v;
        ++counts[it->second];
        remap[i] = it->second;
    }
    TriMesh out;
    for (std::size_t i = 0; i < sums.size(); ++i) out.vertices.push_back(sums[i] / counts[i]);
    for (const Face& f : m.faces) {
        const Face g{remap[f[0]], remap[f[1]], remap[f[2]]};
        if (g[0] != g[1] && g[1] != g[2] && g[0] != g[2]) out.faces.push_back(g);
    }
    return out;
}

/// (trajectory, seed) of the i-th seed in Plan::seeds() order.
std::pair<std::size_t, std::size_t> locate_seed(const Plan& plan, long index)
{
    long k = 0;
    for (std::size_t t = 0; t < plan.trajectories.size(); ++t) {
        for (std::size_t s = 0; s < plan.trajectories[t].seed_depths.size(); ++s, ++k) {
            if (k == index) return {t, s};
        }
    }
    throw Error(Errc::InvalidArgument, "no seed with index " + std::to_string(index), "seed");
}

void remove_seed(Plan& plan, long index, const RobotDescription& robot)
{
    const auto [t, s] = locate_seed(plan, index);
    auto& traj = plan.trajectories[t];
    traj.seed_depths.erase(traj.seed_depths.begin() + static_cast<std::ptrdiff_t>(s));
    if (traj.seed_depths.empty()) {
        plan.trajectories.erase(plan.trajectories.begin() + static_cast<std::ptrdiff_t>(t));
    } else {
        traj = make_trajectory(robot, traj.col, traj.row, traj.tilt, traj.seed_depths);
    }
}

struct SiteRequest {
    int col = 0;
    int row = 0;
    double tilt = 0.0;
    double depth = 0.0;
};

SiteRequest site_from(const json& op, const RobotDescription& robot)
{
    SiteRequest r;
    r.tilt = deg_to_rad(op.value("tilt_deg", 0.0));
    if (op.contains("position")) {
        const json& p = op.at("position");
        if (!p.is_array() || p.size() != 3) throw Error(Errc::InvalidArgument, "position must be [x, y, z]", "position");
        const Vec3 world(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
        const Vec3 local = robot.template_pose.inverse().apply(world);
        r.col = static_cast<int>(std::lround(local.x() / robot.grid_pitch));
        r.row = static_cast<int>(std::lround(local.z() / robot.grid_pitch));
        const NeedlePose hole = make_trajectory(robot, r.col, r.row, r.tilt, {}).pose;
        r.depth = (world - hole.entry).dot(hole.direction);
    } else {
        r.col = op.at("col").get<int>();
        r.row = op.at("row").get<int>();
        r.depth = op.at("depth").get<double>();
    }
    if (!(r.depth > 0.0)) throw Error(Errc::InvalidArgument, "seed depth must be > 0", "depth");
    return r;
}

void insert_seed(Plan& plan, const SiteRequest& r, const RobotDescription& robot)
{
    std::vector<double> depths{r.depth};
    std::size_t slot = plan.trajectories.size();
    for (std::size_t t = 0; t < plan.trajectories.size(); ++t) {
        const auto& traj = plan.trajectories[t];
        if (traj.col == r.col && traj.row == r.row && std::abs(traj.tilt - r.tilt) < 1e-12) {
            slot = t;
            depths.insert(depths.end(), traj.seed_depths.begin(), traj.seed_depths.end());
        }
    }
    Trajectory traj = make_trajectory(robot, r.col, r.row, r.tilt, depths);
    if (const auto v = traj.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front(), "depth");
    if (!workspace_contains(traj.pose, robot)) {
        throw Error(Errc::InvalidArgument, "seed site is outside the robot workspace", "depth");
    }
    if (slot == plan.trajectories.size()) {
        plan.trajectories.push_back(std::move(traj));
    } else {
        plan.trajectories[slot] = std::move(traj);
    }
}

json metrics_json(const PlanMetrics& m)
{
    return {{"d90", m.d90}, {"v100", m.v100}, {"seed_count", m.seed_count}, {"sample_count", m.sample_count}};
}

Vec3 slice_point(char axis, double offset, double u, double v)
{
    switch (axis) {
    case 'x': return {offset, u, v};
    case 'y': return {u, offset, v};
    default: return {u, v, offset};
    }
}

std::pair<int, int> slice_axes(char axis)
{
    switch (axis) {
    case 'x': return {1, 2};
    case 'y': return {0, 2};
    default: return {0, 1};
    }
}

int axis_index(char axis) { return axis == 'x' ? 0 : axis == 'y' ? 1 : 2; }

}  // namespace

json state_json(const SessionState& s)
{
    return {{"revision", s.revision},
            {"scenario", s.scenario.name},
            {"phantom", s.phantom},
            {"edema_fraction", s.edema_fraction},
            {"draft", s.draft},
            {"spin_rate", s.spin_rate},
            {"dose", s.dose},
            {"insertion", s.insertion}};
}

std::string state_hash(const SessionState& s) { return config_hash(state_json(s)); }

DoseSlice dose_slice(const TriMesh& target, std::span<const Seed> seeds, const DoseParams& params, char axis,
                     double offset, double spacing, double pad)
{
    if (axis != 'x' && axis != 'y' && axis != 'z') {
        throw Error(Errc::InvalidArgument, "slice axis must be x, y or z", "axis");
    }
    if (!(spacing > 0.0)) throw Error(Errc::InvalidArgument, "resolution must be > 0", "resolution");
    const auto [a, b] = slice_axes(axis);
    const auto box = target.bounds();
    DoseSlice s;
    s.axis = axis;
    s.offset = offset;
    s.spacing = spacing;
    s.origin = {box.min()[a] - pad, box.min()[b] - pad};
    s.nu = static_cast<int>(std::floor((box.max()[a] - box.min()[a] + 2.0 * pad) / spacing)) + 1;
    s.nv = static_cast<int>(std::floor((box.max()[b] - box.min()[b] + 2.0 * pad) / spacing)) + 1;
    if (static_cast<std::size_t>(s.nu) * static_cast<std::size_t>(s.nv) > kMaxSliceCells) {
        throw Error(Errc::InvalidArgument, "slice resolution too fine", "resolution");
    }
    s.values.resize(static_cast<std::size_t>(s.nu) * static_cast<std::size_t>(s.nv));
    for (int j = 0; j < s.nv; ++j) {
        for (int i = 0; i < s.nu; ++i) {
            const Vec3 p = slice_point(axis, offset, s.origin.x() + spacing * i, s.origin.y() + spacing * j);
            s.values[static_cast<std::size_t>(j) * s.nu + i] = dose_at(p, seeds, params);
        }
    }
    const int n = axis_index(axis);
    for (const Face& f : target.faces) {
        std::vector<Eigen::Vector2d> hits;
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = target.vertices[f[k]];
            const Vec3& q = target.vertices[f[(k + 1) % 3]];
            const double dp = p[n] - offset, dq = q[n] - offset;
            if ((dp < 0.0) != (dq < 0.0)) {
                const Vec3 x = p + (dp / (dp - dq)) * (q - p);
                hits.emplace_back(x[a], x[b]);
            }
        }
        if (hits.size() == 2) s.contour.push_back({hits[0], hits[1]});
    }
    return s;
}

json to_json_value(const DoseSlice& s)
{
    json contour = json::array();
    for (const auto& seg : s.contour) {
        contour.push_back({{seg[0].x(), seg[0].y()}, {seg[1].x(), seg[1].y()}});
    }
    return {{"axis", std::string(1, s.axis)},
            {"offset", s.offset},
            {"spacing", s.spacing},
            {"origin", {s.origin.x(), s.origin.y()}},
            {"nu", s.nu},
            {"nv", s.nv},
            {"values", s.values},
            {"contour", contour}};
}

SessionManager::SessionManager(DoseParams dose, InsertionParams insertion)
    : dose_(std::move(dose)), insertion_(insertion)
{
    if (const auto v = dose_.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    if (const auto v = insertion_.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
}

json SessionManager::create_session(const std::string& scenario_name)
{
    auto state = std::make_shared<SessionState>();
    state->scenario = load_scenario(scenario_name);
    state->phantom = state->scenario.phantom;
    state->edema_fraction = state->scenario.edema_fraction;
    state->dose = dose_;
    state->insertion = insertion_;
    state->spin_rate = insertion_.spin_rate;
    state->draft.mode = state->scenario.recommended_mode;
    state->draft.seed_strength = PlanConstraints{}.seed_strength;
    state->samples = samples_for(state->target());
    refresh_metrics(*state);

    auto slot = std::make_shared<Slot>();
    {
        std::lock_guard lock(map_mutex_);
        state->id = "s" + std::to_string(next_id_++);
        slot->state = state;
        sessions_.emplace(state->id, slot);
    }
    return get_state(state->id);
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& id) const
{
    std::lock_guard lock(map_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::UnknownSession, "no session '" + id + "'", id);
    return it->second;
}

std::shared_ptr<const SessionState> SessionManager::snapshot(const std::string& id) const
{
    const auto s = slot(id);
    std::lock_guard lock(s->read);
    return s->state;
}

std::vector<std::string> SessionManager::session_ids() const
{
    std::lock_guard lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

json SessionManager::get_state(const std::string& id) const
{
    const auto s = snapshot(id);
    const RobotDescription& robot = s->scenario.robot;
    return {{"id", s->id},
            {"revision", s->revision},
            {"state_hash", state_hash(*s)},
            {"scenario",
             {{"name", s->scenario.name},
              {"description", s->scenario.description},
              {"recommended_mode", to_string(s->scenario.recommended_mode)}}},
            {"target", decimate(s->target(), kDisplayCell)},
            {"arch", s->phantom.arch ? json(decimate(*s->phantom.arch, kDisplayCell)) : json(nullptr)},
            {"grid", {{"pitch", robot.grid_pitch}, {"half_extent", robot.grid_half_extent}, {"template_pose", robot.template_pose}}},
            {"plan", s->draft},
            {"metrics", metrics_json(s->draft.metrics)},
            {"spin_rate", s->spin_rate},
            {"edema_fraction", s->edema_fraction},
            {"prescription_gy", s->dose.prescription_gy}};
}

json SessionManager::commit(Slot& slot, std::shared_ptr<SessionState> next)
{
    next->revision += 1;
    {
        std::lock_guard lock(slot.read);
        slot.state = next;
    }
    return {{"id", next->id},
            {"revision", next->revision},
            {"state_hash", state_hash(*next)},
            {"metrics", metrics_json(next->draft.metrics)},
            {"plan", next->draft}};
}

json SessionManager::mutate(const std::string& id, long expected_revision, const json& op)
{
    const auto s = slot(id);
    std::lock_guard write(s->write);
    const std::shared_ptr<const SessionState> current = s->state;
    if (current->revision != expected_revision) {
        throw Error(Errc::RevisionConflict,
                    "session is at revision " + std::to_string(current->revision) + ", request was made against " +
                        std::to_string(expected_revision),
                    id);
    }
    auto next = std::make_shared<SessionState>(*current);
    const RobotDescription& robot = next->scenario.robot;
    try {
        if (!op.is_object() || !op.contains("op")) throw Error(Errc::InvalidArgument, "mutation needs an 'op' field", "op");
        const std::string kind = op.at("op").get<std::string>();
        if (kind == "add_seed") {
            insert_seed(next->draft, site_from(op, robot), robot);
        } else if (kind == "delete_seed") {
            remove_seed(next->draft, op.at("seed").get<long>(), robot);
        } else if (kind == "move_seed") {
            remove_seed(next->draft, op.at("seed").get<long>(), robot);
            insert_seed(next->draft, site_from(op, robot), robot);
        } else if (kind == "set_tilt") {
            const auto t = op.at("trajectory").get<long>();
            if (t < 0 || static_cast<std::size_t>(t) >= next->draft.trajectories.size()) {
                throw Error(Errc::InvalidArgument, "no trajectory with index " + std::to_string(t), "trajectory");
            }
            Trajectory& traj = next->draft.trajectories[static_cast<std::size_t>(t)];
            const double tilt = deg_to_rad(op.at("tilt_deg").get<double>());
            for (std::size_t k = 0; k < next->draft.trajectories.size(); ++k) {
                const auto& o = next->draft.trajectories[k];
                if (k != static_cast<std::size_t>(t) && o.col == traj.col && o.row == traj.row &&
                    std::abs(o.tilt - tilt) < 1e-12) {
                    throw Error(Errc::InvalidArgument, "another needle already uses this hole and tilt", "tilt_deg");
                }
            }
            Trajectory updated = make_trajectory(robot, traj.col, traj.row, tilt, traj.seed_depths);
            if (!workspace_contains(updated.pose, robot)) {
                throw Error(Errc::InvalidArgument, "tilted needle leaves the robot workspace", "tilt_deg");
            }
            traj = std::move(updated);
        } else if (kind == "set_spin") {
            const double w = op.at("spin_rate").get<double>();
            if (!(w >= 0.0)) throw Error(Errc::InvalidArgument, "spin_rate must be >= 0", "spin_rate");
            next->spin_rate = w;
        } else if (kind == "apply_edema") {
            const double f = op.at("fraction").get<double>();
            next->phantom = apply_edema(pre_edema_phantom(next->scenario), f);
            next->edema_fraction = f;
            next->samples = samples_for(next->target());
        } else {
            throw Error(Errc::InvalidArgument, "unknown mutation '" + kind + "'", "op");
        }
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("malformed mutation: ") + e.what(), "op");
    }
    next->draft.v100_trace.clear();
    refresh_metrics(*next);
    return commit(*s, std::move(next));
}

json SessionManager::optimize(const std::string& id, long expected_revision, PlanMode mode)
{
    const auto s = slot(id);
    std::lock_guard write(s->write);
    const std::shared_ptr<const SessionState> current = s->state;
    if (current->revision != expected_revision) {
        throw Error(Errc::RevisionConflict,
                    "session is at revision " + std::to_string(current->revision) + ", request was made against " +
                        std::to_string(expected_revision),
                    id);
    }
    auto next = std::make_shared<SessionState>(*current);
    PlanConstraints c;
    c.n_samples = kMetricSamples;
    c.rng_seed = kMetricSeed;
    next->draft = plan_seeds(next->target(), next->phantom.arch ? &*next->phantom.arch : nullptr, next->dose, mode, c,
                             next->scenario.robot);
    return commit(*s, std::move(next));
}

json SessionManager::get_dose_slice(const std::string& id, char axis, double offset, double spacing) const
{
    const auto s = snapshot(id);
    const auto seeds = s->draft.seeds();
    json out = to_json_value(dose_slice(s->target(), seeds, s->dose, axis, offset, spacing));
    out["revision"] = s->revision;
    out["prescription_gy"] = s->dose.prescription_gy;
    return out;
}

TrialResult SessionManager::execute(const std::string& id, const EventSink& sink) const
{
    const auto sl = slot(id);
    std::shared_ptr<const SessionState> s;
    {
        std::lock_guard lock(sl->read);
        s = sl->state;
    }
    InsertionParams params = s->insertion;
    params.spin_rate = s->spin_rate;
    TrialResult r = execute_plan(s->draft, s->phantom, params, s->scenario.robot);
    if (sink) {
        for (const auto& e : r.events) sink(e);
    }
    std::lock_guard lock(sl->trial);
    sl->last_trial = r;
    sl->trial_revision = s->revision;
    return r;
}

json SessionManager::export_bundle(const std::string& id) const
{
    const auto sl = slot(id);
    std::shared_ptr<const SessionState> s;
    {
        std::lock_guard lock(sl->read);
        s = sl->state;
    }
    const std::string by = "prosper service session " + s->id;
    const json config = state_json(*s);
    json docs = json::array();
    docs.push_back(document_to_json(make_document(DocKind::scenario, json(s->scenario), by, config)));
    docs.push_back(document_to_json(make_document(DocKind::phantom, json(s->phantom), by, config)));
    docs.push_back(document_to_json(make_document(DocKind::plan, json(s->draft), by, config)));
    std::lock_guard lock(sl->trial);
    if (sl->last_trial) {
        Document trial = make_document(DocKind::trial, json(*sl->last_trial), by, config);
        trial.payload["diagnostics"] = {{"revision", sl->trial_revision}};
        docs.push_back(document_to_json(trial));
    }
    return {{"id", s->id}, {"revision", s->revision}, {"state_hash", state_hash(*s)}, {"documents", docs}};
}

}  // namespace prosper
