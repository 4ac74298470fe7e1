#include "prosper/dose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "prosper/error.hpp"
#include "prosper/kernels.hpp"

namespace prosper {

namespace {

struct Candidate {
    NeedlePose pose;  ///< depth 0
    int col = 0;
    int row = 0;
    double tilt = 0.0;
};

struct Site {
    std::size_t candidate = 0;
    double depth = 0.0;
    Vec3 position = Vec3::Zero();
};

std::vector<double> inside_intervals(const Vec3& origin, const Vec3& dir, const TriMesh& m)
{
    std::vector<double> ts = line_mesh_crossings(origin, dir, m);
    ts.erase(std::unique(ts.begin(), ts.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             ts.end());
    if (ts.size() % 2 != 0) ts.clear();  // grazing hit; treat the line as missing the mesh
    return ts;
}

std::vector<Candidate> enumerate_candidates(const RobotDescription& robot, PlanMode mode,
                                            const PlanConstraints& c)
{
    std::vector<double> tilts{0.0};
    if (mode == PlanMode::oblique) {
        tilts.clear();
        for (double deg : c.oblique_tilts_deg) tilts.push_back(deg_to_rad(deg));
        std::sort(tilts.begin(), tilts.end());
        tilts.erase(std::unique(tilts.begin(), tilts.end()), tilts.end());
    }
    std::vector<Candidate> out;
    const int h = robot.grid_half_extent;
    for (int col = -h; col <= h; ++col) {
        for (int row = -h; row <= h; ++row) {
            for (double tilt : tilts) {
                Candidate cand;
                cand.col = col;
                cand.row = row;
                cand.tilt = tilt;
                cand.pose = make_trajectory(robot, col, row, tilt, {}).pose;
                out.push_back(cand);
            }
        }
    }
    return out;
}

std::vector<Site> enumerate_sites(const std::vector<Candidate>& cands, const TriMesh& target,
                                  const RobotDescription& robot, double spacing)
{
    std::vector<Site> sites;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const auto& cand = cands[i];
        const auto ts = inside_intervals(cand.pose.entry, cand.pose.direction, target);
        for (std::size_t k = 0; k + 1 < ts.size(); k += 2) {
            const double lo = std::max(ts[k], 0.0);
            const double hi = ts[k + 1];
            for (double d = std::ceil(lo / spacing) * spacing; d <= hi; d += spacing) {
                if (d <= 0.0) continue;
                NeedlePose pose = cand.pose;
                pose.depth = d;
                if (!workspace_contains(pose, robot)) continue;
                sites.push_back({i, d, pose.tip()});
            }
        }
    }
    return sites;
}

double percentile_low(std::vector<double> values, double fraction)
{
    if (values.empty()) return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(values.size())));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

}  // namespace

std::vector<std::string> Trajectory::violations() const
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < seed_depths.size(); ++i) {
        if (seed_depths[i] < 0.0 || seed_depths[i] > pose.depth + 1e-9) {
            out.emplace_back("seed depth outside the needle depth");
        }
        if (i > 0 && seed_depths[i - 1] - seed_depths[i] < 5.0 - 1e-9) {
            out.emplace_back("seed depths must descend with at least 5 mm spacing");
        }
    }
    return out;
}

Trajectory make_trajectory(const RobotDescription& robot, int col, int row, double tilt,
                           std::vector<double> seed_depths)
{
    Trajectory t;
    t.pose = grid_target(robot, col, row);
    t.pose.direction = robot.template_pose.apply_vector(needle_direction(0.0, tilt));
    t.col = col;
    t.row = row;
    t.tilt = tilt;
    std::sort(seed_depths.begin(), seed_depths.end(), std::greater<>());
    t.pose.depth = seed_depths.empty() ? 0.0 : seed_depths.front();
    t.seed_depths = std::move(seed_depths);
    return t;
}

std::string to_string(PlanMode mode) { return mode == PlanMode::grid ? "grid" : "oblique"; }

PlanMode plan_mode_from_string(const std::string& s)
{
    if (s == "grid") return PlanMode::grid;
    if (s == "oblique") return PlanMode::oblique;
    throw Error(Errc::InvalidArgument, "unknown plan mode '" + s + "'", "mode");
}

std::vector<std::string> PlanConstraints::violations() const
{
    std::vector<std::string> out;
    if (max_seeds < 0) out.emplace_back("max_seeds must be >= 0");
    if (!(margin >= 0.0)) out.emplace_back("margin must be >= 0");
    if (!(seed_strength > 0.0)) out.emplace_back("seed_strength must be > 0");
    if (!(site_spacing >= 5.0)) out.emplace_back("site_spacing must be >= 5 mm");
    if (!(min_seed_separation >= 0.0)) out.emplace_back("min_seed_separation must be >= 0");
    if (!(target_v100 > 0.0 && target_v100 <= 1.0)) out.emplace_back("target_v100 must be in (0, 1]");
    if (n_samples < 10000) out.emplace_back("n_samples must be >= 10000");
    for (double t : oblique_tilts_deg) {
        if (!std::isfinite(t)) out.emplace_back("oblique tilts must be finite");
    }
    return out;
}

std::vector<Seed> Plan::seeds() const
{
    std::vector<Seed> out;
    for (const auto& t : trajectories) {
        for (double d : t.seed_depths) out.push_back({t.pose.point_at(d), seed_strength});
    }
    return out;
}

std::vector<Vec3> interior_samples(const TriMesh& target, int n, std::uint64_t rng_seed)
{
    std::vector<Vec3> out;
    if (n <= 0) return out;
    const double volume = mesh_volume(target);
    const double h = std::cbrt(volume / n);
    const auto box = target.bounds();
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int nx = static_cast<int>(std::ceil(box.sizes().x() / h));
    const int nz = static_cast<int>(std::ceil(box.sizes().z() / h));
    out.reserve(static_cast<std::size_t>(n) + static_cast<std::size_t>(n) / 10);
    for (int i = 0; i < nx; ++i) {
        for (int k = 0; k < nz; ++k) {
            const double x = box.min().x() + (i + unit(rng)) * h;
            const double z = box.min().z() + (k + unit(rng)) * h;
            const Vec3 origin(x, box.min().y() - 1.0, z);
            const auto ts = inside_intervals(origin, Vec3::UnitY(), target);
            const double y0 = origin.y();
            for (std::size_t s = 0; s + 1 < ts.size(); s += 2) {
                // global strata along y so neighbouring columns stay aligned
                const int j0 = static_cast<int>(std::floor(ts[s] / h));
                const int j1 = static_cast<int>(std::floor(ts[s + 1] / h));
                for (int j = j0; j <= j1; ++j) {
                    const double t = (j + unit(rng)) * h;
                    if (t >= ts[s] && t < ts[s + 1]) out.emplace_back(x, y0 + t, z);
                }
            }
        }
    }
    return out;
}

PlanMetrics metrics_from_samples(std::span<const Vec3> samples, std::span<const Seed> seeds,
                                 const DoseParams& params)
{
    PlanMetrics m;
    m.seed_count = static_cast<int>(seeds.size());
    m.sample_count = static_cast<int>(samples.size());
    if (samples.empty()) return m;
    const auto dose = kernels::parallel::dose_at_points(samples, seeds, params);
    std::size_t covered = 0;
    for (double d : dose) covered += d >= params.prescription_gy ? 1 : 0;
    m.v100 = static_cast<double>(covered) / static_cast<double>(dose.size());
    m.d90 = percentile_low(dose, 0.10);
    return m;
}

PlanMetrics compute_metrics(const TriMesh& target, std::span<const Seed> seeds, const DoseParams& params,
                            int n_samples, std::uint64_t rng_seed)
{
    if (n_samples < 10000) throw Error(Errc::InvalidArgument, "n_samples must be >= 10000", "n_samples");
    if (const auto v = params.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    require_closed(target);
    const auto samples = interior_samples(target, n_samples, rng_seed);
    return metrics_from_samples(samples, seeds, params);
}

ArchCheck check_arch_conflict(const Trajectory& traj, const TriMesh& arch, double margin)
{
    if (!(margin >= 0.0)) throw Error(Errc::InvalidArgument, "margin must be >= 0", "margin");
    const Clearance c = segment_mesh_clearance(traj.pose.entry, traj.pose.tip(), arch);
    ArchCheck out;
    out.clearance = c.intersects ? 0.0 : c.min_distance;
    out.conflict = out.clearance < margin;
    return out;
}

bool target_in_workspace(const TriMesh& target, const RobotDescription& robot)
{
    const RigidTransform to_template = robot.template_pose.inverse();
    for (const auto& v : target.vertices) {
        const Vec3 local = to_template.apply(v);
        if (local.y() <= 0.0) return false;
        NeedlePose pose;
        pose.entry = robot.template_pose.apply(Vec3(local.x(), 0.0, local.z()));
        pose.direction = robot.template_pose.apply_vector(Vec3::UnitY());
        pose.depth = local.y();
        if (!workspace_contains(pose, robot)) return false;
    }
    return true;
}

Plan plan_seeds(const TriMesh& target, const TriMesh* arch, const DoseParams& params, PlanMode mode,
                const PlanConstraints& constraints, const RobotDescription& robot)
{
    if (const auto v = params.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    if (const auto v = constraints.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    require_closed(target);
    if (!target_in_workspace(target, robot)) {
        throw Error(Errc::TargetOutsideWorkspace, "target is not reachable from the template");
    }

    const auto cands = enumerate_candidates(robot, mode, constraints);
    std::vector<Site> sites = enumerate_sites(cands, target, robot, constraints.site_spacing);
    const std::size_t reachable = sites.size();
    if (arch != nullptr) {
        std::erase_if(sites, [&](const Site& s) {
            const Clearance c = segment_mesh_clearance(cands[s.candidate].pose.entry, s.position, *arch);
            return c.intersects || c.min_distance < constraints.margin;
        });
    }
    if (sites.empty()) {
        throw Error(Errc::InfeasibleNoTrajectories,
                    reachable == 0 ? "no candidate trajectory intersects the target"
                                   : "all " + std::to_string(reachable) + " candidate seed sites are arch-blocked");
    }

    const auto samples = interior_samples(target, constraints.n_samples, constraints.rng_seed);
    Plan plan;
    plan.mode = mode;
    plan.seed_strength = constraints.seed_strength;
    const double threshold = params.prescription_gy;
    const std::size_t ns = samples.size();

    std::vector<Seed> sources(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) sources[i] = {sites[i].position, constraints.seed_strength};
    const kernels::DoseMatrix table = kernels::parallel::dose_matrix(sources, samples, params);

    std::vector<std::size_t> chosen;
    std::vector<double> current(ns, 0.0);
    const std::size_t goal = static_cast<std::size_t>(std::ceil(constraints.target_v100 * static_cast<double>(ns)));

    auto exact_dose = [&](const std::vector<std::size_t>& picks) {
        std::vector<Seed> s;
        for (auto i : picks) s.push_back(sources[i]);
        return kernels::parallel::dose_at_points(samples, s, params);
    };
    auto covered_count = [&](const std::vector<double>& dose) {
        return static_cast<std::size_t>(std::count_if(dose.begin(), dose.end(), [&](double d) { return d >= threshold; }));
    };
    auto active_set = [&](const std::vector<double>& dose) {
        std::vector<std::uint32_t> a;
        for (std::size_t s = 0; s < ns; ++s) {
            if (dose[s] < threshold) a.push_back(static_cast<std::uint32_t>(s));
        }
        return a;
    };
    const double sep2 = constraints.min_seed_separation * constraints.min_seed_separation;
    auto available = [&](std::size_t site, const std::vector<std::size_t>& picks, std::size_t skip) {
        for (std::size_t k = 0; k < picks.size(); ++k) {
            if (k == skip) continue;
            if (picks[k] == site) return false;
            if ((sites[picks[k]].position - sites[site].position).squaredNorm() < sep2) return false;
        }
        return true;
    };
    // Best (covered, deficit) candidate in site order; nullopt if nothing helps.
    auto best_site = [&](const std::vector<double>& dose, const std::vector<std::size_t>& picks,
                         std::size_t skip) -> std::optional<std::pair<std::size_t, kernels::CandidateGain>> {
        const auto active = active_set(dose);
        if (active.empty()) return std::nullopt;
        const auto gains = kernels::parallel::candidate_gains(table, dose, threshold, active);
        std::optional<std::pair<std::size_t, kernels::CandidateGain>> best;
        for (std::size_t i = 0; i < gains.size(); ++i) {
            const auto& g = gains[i];
            if (g.covered == 0 && !(g.deficit > 0.0)) continue;
            if (best && (g.covered < best->second.covered ||
                         (g.covered == best->second.covered && !(g.deficit > best->second.deficit)))) {
                continue;
            }
            if (!available(i, picks, skip)) continue;
            best = std::make_pair(i, g);
        }
        return best;
    };

    std::size_t covered = 0;
    while (chosen.size() < static_cast<std::size_t>(constraints.max_seeds) && covered < goal) {
        const auto pick = best_site(current, chosen, chosen.size());
        if (!pick) break;
        chosen.push_back(pick->first);
        const Seed& s = sources[pick->first];
        for (std::size_t i = 0; i < ns; ++i) {
            current[i] += point_source_dose((samples[i] - s.position).norm(), s.strength, params);
        }
        covered = covered_count(current);
        plan.v100_trace.push_back(static_cast<double>(covered) / static_cast<double>(ns));
    }

    // Single-seed relocation until no move strictly raises coverage.
    for (bool improved = !chosen.empty(); improved;) {
        improved = false;
        for (std::size_t k = 0; k < chosen.size(); ++k) {
            std::vector<std::size_t> others = chosen;
            others.erase(others.begin() + static_cast<std::ptrdiff_t>(k));
            const auto without = exact_dose(others);
            const auto pick = best_site(without, chosen, k);
            if (!pick || pick->first == chosen[k]) continue;
            if (covered_count(without) + static_cast<std::size_t>(pick->second.covered) <= covered) continue;
            std::vector<std::size_t> trial = chosen;
            trial[k] = pick->first;
            const auto dose = exact_dose(trial);
            const std::size_t c = covered_count(dose);
            if (c > covered) {
                chosen = std::move(trial);
                current = dose;
                covered = c;
                improved = true;
            }
        }
    }

    // Group by trajectory in candidate order, deepest seed first.
    std::vector<std::size_t> order = chosen;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sites[a].candidate != sites[b].candidate) return sites[a].candidate < sites[b].candidate;
        return sites[a].depth > sites[b].depth;
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Site& s = sites[order[i]];
        if (plan.trajectories.empty() || i == 0 || sites[order[i - 1]].candidate != s.candidate) {
            Trajectory t;
            t.pose = cands[s.candidate].pose;
            t.pose.depth = s.depth;
            t.col = cands[s.candidate].col;
            t.row = cands[s.candidate].row;
            t.tilt = cands[s.candidate].tilt;
            plan.trajectories.push_back(t);
        }
        plan.trajectories.back().seed_depths.push_back(s.depth);
    }
    const auto seeds = plan.seeds();
    plan.metrics = metrics_from_samples(samples, seeds, params);
    return plan;
}

}  // namespace prosper
