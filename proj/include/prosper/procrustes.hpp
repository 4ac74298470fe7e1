#pragma once

#include <span>

#include "prosper/geom.hpp"

namespace prosper {

/// Least-squares absolute orientation between corresponded point sets:
/// centroid demeaning, SVD of the cross-covariance, determinant sign fix so
/// the rotation is always proper. Returns T minimizing sum |to_i - T from_i|^2.
RigidTransform fit_rigid(std::span<const Vec3> from, std::span<const Vec3> to);

/// Same with an isotropic scale (Umeyama).
SimilarityTransform fit_similarity(std::span<const Vec3> from, std::span<const Vec3> to);

/// Singular values of the centered point cloud, descending.
Vec3 spread_singular_values(std::span<const Vec3> points);

}  // namespace prosper
