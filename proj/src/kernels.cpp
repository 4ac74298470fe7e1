#include "prosper/kernels.hpp"

#include <algorithm>
#include <limits>

namespace prosper::kernels {

namespace {

double face_segment_distance(const Vec3& a, const Vec3& b, const TriMesh& m, std::size_t f,
                             bool& crossed)
{
    const Face& face = m.faces[f];
    const Vec3& v0 = m.vertices[face[0]];
    const Vec3& v1 = m.vertices[face[1]];
    const Vec3& v2 = m.vertices[face[2]];
    if (segment_triangle_intersection(a, b, v0, v1, v2)) {
        crossed = true;
        return 0.0;
    }
    return segment_triangle_distance(a, b, v0, v1, v2);
}

SurfacePoint closest_on_mesh(const Vec3& p, const TriMesh& m) { return closest_point_on_mesh(p, m); }

CandidateGain gain_for_row(std::span<const float> row, std::span<const double> current,
                           double threshold, std::span<const std::uint32_t> active)
{
    CandidateGain g;
    for (const std::uint32_t s : active) {
        const double before = current[s];
        if (before >= threshold) continue;
        const double after = before + static_cast<double>(row[s]);
        if (after >= threshold) {
            ++g.covered;
            g.deficit += threshold - before;
        } else {
            g.deficit += after - before;
        }
    }
    return g;
}

}  // namespace

// --- serial reference ---------------------------------------------------------

namespace serial {

Clearance segment_clearance(const Vec3& a, const Vec3& b, const TriMesh& m)
{
    Clearance out;
    out.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < m.faces.size(); ++f) {
        bool crossed = false;
        out.min_distance = std::min(out.min_distance, face_segment_distance(a, b, m, f, crossed));
        out.intersects = out.intersects || crossed;
    }
    out.intersects = out.intersects || out.min_distance <= 0.0;
    return out;
}

std::vector<SurfacePoint> closest_points(std::span<const Vec3> queries, const TriMesh& m)
{
    std::vector<SurfacePoint> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = closest_on_mesh(queries[i], m);
    return out;
}

std::vector<double> dose_at_points(std::span<const Vec3> points, std::span<const Seed> seeds,
                                   const DoseParams& params)
{
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = dose_at(points[i], seeds, params);
    return out;
}

DoseMatrix dose_matrix(std::span<const Seed> sources, std::span<const Vec3> samples,
                       const DoseParams& params)
{
    DoseMatrix m{sources.size(), samples.size(), std::vector<float>(sources.size() * samples.size())};
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            m.values[r * m.cols + c] = static_cast<float>(point_source_dose(
                (samples[c] - sources[r].position).norm(), sources[r].strength, params));
        }
    }
    return m;
}

std::vector<CandidateGain> candidate_gains(const DoseMatrix& m, std::span<const double> current,
                                           double threshold, std::span<const std::uint32_t> active)
{
    std::vector<CandidateGain> out(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) out[r] = gain_for_row(m.row(r), current, threshold, active);
    return out;
}

}  // namespace serial

// --- OpenMP -------------------------------------------------------------------

namespace parallel {

Clearance segment_clearance(const Vec3& a, const Vec3& b, const TriMesh& m)
{
    const auto n = static_cast<std::int64_t>(m.faces.size());
    double best = std::numeric_limits<double>::infinity();
    int crossed_any = 0;
#pragma omp parallel for reduction(min : best) reduction(max : crossed_any) schedule(static)
    for (std::int64_t f = 0; f < n; ++f) {
        bool crossed = false;
        best = std::min(best, face_segment_distance(a, b, m, static_cast<std::size_t>(f), crossed));
        if (crossed) crossed_any = 1;
    }
    return {best, crossed_any != 0 || best <= 0.0};
}

std::vector<SurfacePoint> closest_points(std::span<const Vec3> queries, const TriMesh& m)
{
    std::vector<SurfacePoint> out(queries.size());
    const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) out[i] = closest_on_mesh(queries[i], m);
    return out;
}

std::vector<double> dose_at_points(std::span<const Vec3> points, std::span<const Seed> seeds,
                                   const DoseParams& params)
{
    std::vector<double> out(points.size());
    const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = dose_at(points[i], seeds, params);
    return out;
}

DoseMatrix dose_matrix(std::span<const Seed> sources, std::span<const Vec3> samples,
                       const DoseParams& params)
{
    DoseMatrix m{sources.size(), samples.size(), std::vector<float>(sources.size() * samples.size())};
    const auto rows = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            m.values[r * m.cols + c] = static_cast<float>(point_source_dose(
                (samples[c] - sources[r].position).norm(), sources[r].strength, params));
        }
    }
    return m;
}

std::vector<CandidateGain> candidate_gains(const DoseMatrix& m, std::span<const double> current,
                                           double threshold, std::span<const std::uint32_t> active)
{
    std::vector<CandidateGain> out(m.rows);
    const auto rows = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) out[r] = gain_for_row(m.row(r), current, threshold, active);
    return out;
}

}  // namespace parallel

}  // namespace prosper::kernels
