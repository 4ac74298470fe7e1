#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference implementation the tests compare against, `parallel` is the
// OpenMP version used by the engine. Both produce bit-identical results
// (each output element is computed by exactly one thread, in the same order).

#include <cstdint>
#include <span>
#include <vector>

#include "prosper/dose_model.hpp"
#include "prosper/geom.hpp"

namespace prosper::kernels {

/// Dense candidate-by-sample dose table, row-major, single precision.
struct DoseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;

    std::span<const float> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

/// Gains of adding each row's dose to `current`, counted over the `active`
/// sample indices only (samples already at threshold contribute nothing).
struct CandidateGain {
    std::int64_t covered = 0;  ///< samples newly reaching the threshold
    double deficit = 0.0;      ///< reduction of sum(max(threshold - dose, 0))
};

namespace serial {

Clearance segment_clearance(const Vec3& a, const Vec3& b, const TriMesh& m);
std::vector<SurfacePoint> closest_points(std::span<const Vec3> queries, const TriMesh& m);
std::vector<double> dose_at_points(std::span<const Vec3> points, std::span<const Seed> seeds,
                                   const DoseParams& params);
DoseMatrix dose_matrix(std::span<const Seed> sources, std::span<const Vec3> samples,
                       const DoseParams& params);
std::vector<CandidateGain> candidate_gains(const DoseMatrix& m, std::span<const double> current,
                                           double threshold, std::span<const std::uint32_t> active);

}  // namespace serial

namespace parallel {

Clearance segment_clearance(const Vec3& a, const Vec3& b, const TriMesh& m);
std::vector<SurfacePoint> closest_points(std::span<const Vec3> queries, const TriMesh& m);
std::vector<double> dose_at_points(std::span<const Vec3> points, std::span<const Seed> seeds,
                                   const DoseParams& params);
DoseMatrix dose_matrix(std::span<const Seed> sources, std::span<const Vec3> samples,
                       const DoseParams& params);
std::vector<CandidateGain> candidate_gains(const DoseMatrix& m, std::span<const double> current,
                                           double threshold, std::span<const std::uint32_t> active);

}  // namespace parallel

}  // namespace prosper::kernels
