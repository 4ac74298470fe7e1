#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prosper/geom.hpp"

namespace prosper {

/// PCA point-distribution model over a fixed mesh topology.
struct ShapeModel {
    std::vector<Vec3> mean;            ///< n vertices, model frame, mm
    Eigen::MatrixXd modes;             ///< 3n x k, orthonormal columns, (x0,y0,z0,x1,...)
    Eigen::VectorXd variances;         ///< k, descending, mm^2
    std::vector<Face> faces;
    double retained_fraction = 1.0;    ///< variance kept / total variance
    std::size_t training_count = 0;

    std::size_t mode_count() const { return static_cast<std::size_t>(variances.size()); }
    TriMesh mean_mesh() const { return {mean, faces}; }
    std::vector<std::string> violations() const;
};

struct ShapeCoefficients {
    Eigen::VectorXd b;
};

struct ShapeBuildOptions {
    double retained_variance = 0.98;
    int max_procrustes_iterations = 100;
};

/// Generalized Procrustes alignment (similarity) then PCA of the aligned
/// vertex vectors. Throws TooFewShapes or TopologyMismatch.
ShapeModel build_model(std::span<const TriMesh> training, const ShapeBuildOptions& options = {});

/// pose o (mean + sum b_i mode_i). Missing trailing coefficients are zero.
TriMesh synthesize(const ShapeModel& model, const ShapeCoefficients& coeffs,
                   const SimilarityTransform& pose = SimilarityTransform::identity());

/// Orthogonal projection of model-frame vertices onto the modes.
ShapeCoefficients project(const ShapeModel& model, std::span<const Vec3> vertices);

struct FitOptions {
    double beta = 1.0;             ///< weight of the Mahalanobis prior
    int max_iterations = 100;
    double tolerance_mm = 1e-4;    ///< stop once rms improves by less than this
    double plausibility_sigmas = 3.0;
};

struct FitResult {
    SimilarityTransform pose;
    ShapeCoefficients coeffs;
    double rms = 0.0;
    int iterations = 0;
    std::vector<double> objective_trace;  ///< data + prior, one entry per iteration
    std::vector<double> rms_trace;
};

/// Alternating similarity / coefficient fit of the model surface to sparse
/// points. Throws TooFewPoints (< 6) or CoplanarPoints.
FitResult fit_to_points(const ShapeModel& model, std::span<const Vec3> points,
                        const FitOptions& options = {});

/// RMS of the distances from each vertex to the surface of `to`.
double surface_distance_rms(std::span<const Vec3> vertices, const TriMesh& to);

/// Symmetric vertex-to-surface RMS between two meshes.
double surface_to_surface_rms(const TriMesh& a, const TriMesh& b);

// --- bundled synthetic atlas ------------------------------------------------

/// Parameters of the synthetic prostate-like family: an ellipsoid (x lateral,
/// y along the needle axis with the apex at -y, z anterior) with apex taper
/// and an anterior bend.
struct ProstateShapeParams {
    Vec3 semi_axes{21.0, 18.0, 16.0};
    double apex_taper = 0.15;  ///< relative narrowing of x and z at the apex
    double bend_mm = 2.0;      ///< anterior displacement at both poles
};

/// Deforms an icosphere (subdivision 3) into a prostate-like closed mesh centered at the origin.
TriMesh prostate_like_mesh(const ProstateShapeParams& params, int subdivisions = 3);

/// Twenty randomized instances with a fixed seed; vertexwise corresponded.
std::vector<TriMesh> bundled_training_family(std::size_t count = 20, std::uint64_t seed = 2010);

/// Model built from the bundled family (cached after the first call).
const ShapeModel& bundled_shape_model();

}  // namespace prosper
