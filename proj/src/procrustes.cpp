#include "prosper/procrustes.hpp"

#include <Eigen/SVD>

#include "prosper/error.hpp"

namespace prosper {

namespace {

struct CenteredCovariance {
    Vec3 from_centroid = Vec3::Zero();
    Vec3 to_centroid = Vec3::Zero();
    Mat3 cross = Mat3::Zero();  ///< sum (to - c_to)(from - c_from)^T
    double from_spread = 0.0;   ///< sum |from - c_from|^2
};

CenteredCovariance centered(std::span<const Vec3> from, std::span<const Vec3> to)
{
    if (from.size() != to.size() || from.empty()) {
        throw Error(Errc::InvalidArgument, "point sets must be non-empty and equally sized");
    }
    CenteredCovariance c;
    for (std::size_t i = 0; i < from.size(); ++i) {
        c.from_centroid += from[i];
        c.to_centroid += to[i];
    }
    c.from_centroid /= static_cast<double>(from.size());
    c.to_centroid /= static_cast<double>(to.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        const Vec3 a = from[i] - c.from_centroid;
        const Vec3 b = to[i] - c.to_centroid;
        c.cross += b * a.transpose();
        c.from_spread += a.squaredNorm();
    }
    return c;
}

Mat3 proper_rotation(const Mat3& cross, Vec3* singular = nullptr, double* trace_ds = nullptr)
{
    Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
    if (singular) *singular = svd.singularValues();
    if (trace_ds) *trace_ds = (d.diagonal().array() * svd.singularValues().array()).sum();
    return svd.matrixU() * d * svd.matrixV().transpose();
}

}  // namespace

RigidTransform fit_rigid(std::span<const Vec3> from, std::span<const Vec3> to)
{
    const auto c = centered(from, to);
    const Mat3 r = proper_rotation(c.cross);
    return RigidTransform::from_matrix(r, c.to_centroid - r * c.from_centroid);
}

SimilarityTransform fit_similarity(std::span<const Vec3> from, std::span<const Vec3> to)
{
    const auto c = centered(from, to);
    double trace_ds = 0.0;
    const Mat3 r = proper_rotation(c.cross, nullptr, &trace_ds);
    SimilarityTransform out;
    out.scale = c.from_spread > 0.0 ? trace_ds / c.from_spread : 1.0;
    if (!(out.scale > 0.0)) out.scale = 1.0;
    out.rigid = RigidTransform::from_matrix(r, c.to_centroid - out.scale * (r * c.from_centroid));
    return out;
}

Vec3 spread_singular_values(std::span<const Vec3> points)
{
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(std::max<std::size_t>(points.size(), 1));
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) cov += (p - mean) * (p - mean).transpose();
    Eigen::JacobiSVD<Mat3> svd(cov);
    return svd.singularValues().cwiseSqrt();
}

}  // namespace prosper
