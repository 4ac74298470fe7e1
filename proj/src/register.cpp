#include "prosper/register.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "prosper/error.hpp"
#include "prosper/kernels.hpp"
#include "prosper/procrustes.hpp"

namespace prosper {

namespace {

Vec3 centroid(std::span<const Vec3> pts)
{
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

Mat3 principal_axes(std::span<const Vec3> pts)
{
    const Vec3 c = centroid(pts);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Mat3 axes;
    for (int k = 0; k < 3; ++k) axes.col(k) = eig.eigenvectors().col(2 - k);
    return axes;
}

double mean_sq_distance(std::span<const Vec3> pts, const TriMesh& target)
{
    const auto hits = kernels::serial::closest_points(pts, target);
    double s = 0.0;
    for (const auto& h : hits) s += h.distance * h.distance;
    return s / static_cast<double>(hits.size());
}

std::vector<Vec3> rows_to_points(const Eigen::MatrixX3d& x)
{
    std::vector<Vec3> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = x.row(i).transpose();
    return out;
}

void check_closed(const TriMesh& m, const char* which)
{
    const auto problems = mesh_violations(m);
    if (!problems.empty()) {
        throw Error(Errc::NonClosedMesh, std::string(which) + " mesh: " + problems.front(), which);
    }
}

/// Inverse of the interpolation system [[K P] [P^T 0]].
Eigen::MatrixXd tps_system_inverse(const Eigen::MatrixX3d& c)
{
    const Eigen::Index m = c.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m + 4, m + 4);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) l(i, j) = (c.row(i) - c.row(j)).norm();
        l(i, m) = 1.0;
        l.block<1, 3>(i, m + 1) = c.row(i);
    }
    l.bottomLeftCorner(4, m) = l.topRightCorner(m, 4).transpose();
    return l.fullPivLu().inverse();
}

}  // namespace

Eigen::Matrix<double, 3, 4> DeformationField::identity_affine()
{
    Eigen::Matrix<double, 3, 4> a = Eigen::Matrix<double, 3, 4>::Zero();
    a.leftCols<3>().setIdentity();
    return a;
}

std::vector<std::string> DeformationField::violations() const
{
    std::vector<std::string> out;
    if (control_points.rows() != tps_weights.rows()) {
        out.emplace_back("control_points and tps_weights must have the same row count");
    }
    if (!control_points.allFinite() || !tps_weights.allFinite() || !affine_part.allFinite()) {
        out.emplace_back("field contains non-finite values");
    }
    return out;
}

Vec3 apply_field(const DeformationField& field, const Vec3& p)
{
    Vec3 out = field.affine_part.leftCols<3>() * p + field.affine_part.col(3);
    for (Eigen::Index j = 0; j < field.control_points.rows(); ++j) {
        const double r = (p - field.control_points.row(j).transpose()).norm();
        out += r * field.tps_weights.row(j).transpose();
    }
    return out;
}

std::vector<Vec3> map_points(const DeformationField& field, std::span<const Vec3> points)
{
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(apply_field(field, p));
    return out;
}

TriMesh apply_field(const DeformationField& field, const TriMesh& mesh)
{
    return {map_points(field, mesh.vertices), mesh.faces};
}

DeformationField interpolating_field(const Eigen::MatrixX3d& control_points,
                                     const Eigen::MatrixX3d& targets)
{
    if (control_points.rows() != targets.rows()) {
        throw Error(Errc::InvalidArgument, "control point and target counts differ");
    }
    const Eigen::Index m = control_points.rows();
    const Eigen::MatrixXd inv = tps_system_inverse(control_points);
    DeformationField f;
    f.control_points = control_points;
    f.tps_weights = inv.topLeftCorner(m, m) * targets;
    const Eigen::Matrix<double, 4, 3> poly = inv.bottomLeftCorner(4, m) * targets;
    f.affine_part.leftCols<3>() = poly.bottomRows<3>().transpose();
    f.affine_part.col(3) = poly.row(0).transpose();
    return f;
}

std::vector<std::string> RegistrationParams::violations() const
{
    std::vector<std::string> out;
    if (!(lambda_bend >= 0.0)) out.emplace_back("lambda_bend must be >= 0");
    if (!(lambda_vol >= 0.0)) out.emplace_back("lambda_vol must be >= 0");
    if (max_iters < 1) out.emplace_back("max_iters must be >= 1");
    if (!(tol_mm > 0.0)) out.emplace_back("tol_mm must be > 0");
    if (n_control < 4) out.emplace_back("n_control must be >= 4");
    return out;
}

std::vector<std::size_t> farthest_point_samples(std::span<const Vec3> points, std::size_t count)
{
    std::vector<std::size_t> picked;
    if (points.empty() || count == 0) return picked;
    count = std::min(count, points.size());
    std::vector<double> d(points.size(), std::numeric_limits<double>::infinity());
    std::size_t next = 0;
    while (picked.size() < count) {
        picked.push_back(next);
        std::size_t best = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d[i] = std::min(d[i], (points[i] - points[next]).squaredNorm());
            if (d[i] > d[best]) best = i;
        }
        next = best;
    }
    return picked;
}

RigidTransform rigid_prealign(const TriMesh& source, const TriMesh& target, int icp_iterations)
{
    const Vec3 cs = centroid(source.vertices);
    const Vec3 ct = centroid(target.vertices);
    const Mat3 as = principal_axes(source.vertices);
    const Mat3 at = principal_axes(target.vertices);

    RigidTransform best;
    double best_err = std::numeric_limits<double>::infinity();
    std::vector<Vec3> moved(source.vertices.size());
    for (int signs = 0; signs < 8; ++signs) {
        const Vec3 d((signs & 1) ? -1.0 : 1.0, (signs & 2) ? -1.0 : 1.0, (signs & 4) ? -1.0 : 1.0);
        const Mat3 r = at * d.asDiagonal() * as.transpose();
        if (r.determinant() < 0.0) continue;
        const RigidTransform t = RigidTransform::from_matrix(r, ct - r * cs);
        for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = t.apply(source.vertices[i]);
        const double err = mean_sq_distance(moved, target);
        if (err < best_err) {
            best_err = err;
            best = t;
        }
    }

    double previous = best_err;
    for (int it = 0; it < icp_iterations; ++it) {
        for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = best.apply(source.vertices[i]);
        const auto hits = kernels::serial::closest_points(moved, target);
        std::vector<Vec3> to(hits.size());
        for (std::size_t i = 0; i < hits.size(); ++i) to[i] = hits[i].point;
        const RigidTransform step = fit_rigid(moved, to);
        const RigidTransform candidate = step * best;
        for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = candidate.apply(source.vertices[i]);
        const double err = mean_sq_distance(moved, target);
        if (!(err < previous)) break;
        best = candidate;
        if (previous - err < 1e-14) break;
        previous = err;
    }
    return best;
}

RegistrationResult elastic_register(const TriMesh& source, const TriMesh& target,
                                    const RegistrationParams& params)
{
    if (const auto v = params.violations(); !v.empty()) throw Error(Errc::InvalidArgument, v.front());
    check_closed(source, "source");
    check_closed(target, "target");
    const double vs = signed_volume(source);
    const double vt = signed_volume(target);
    const double ratio = vs / vt;
    if (ratio < 0.5 || ratio > 2.0) {
        throw Error(Errc::VolumeRatioOutOfRange,
                    "source/target volume ratio " + std::to_string(ratio) + " outside [0.5, 2]");
    }

    RegistrationResult result;
    result.prealignment = rigid_prealign(source, target);

    const std::size_t n = source.vertices.size();
    const auto idx = farthest_point_samples(source.vertices, static_cast<std::size_t>(params.n_control));
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixX3d ctrl(m, 3);
    for (Eigen::Index j = 0; j < m; ++j) ctrl.row(j) = source.vertices[idx[j]].transpose();

    // phi(v) = b(v)^T D where D are the control-point targets.
    const Eigen::MatrixXd inv = tps_system_inverse(ctrl);
    const Eigen::MatrixXd l11 = inv.topLeftCorner(m, m);
    const Eigen::MatrixXd l21 = inv.bottomLeftCorner(4, m);
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), m);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::RowVectorXd k(m);
        for (Eigen::Index j = 0; j < m; ++j) k(j) = (source.vertices[i] - ctrl.row(j).transpose()).norm();
        Eigen::RowVector4d p(1.0, source.vertices[i].x(), source.vertices[i].y(), source.vertices[i].z());
        basis.row(static_cast<Eigen::Index>(i)) = k * l11 + p * l21;
    }
    // Bending energy is -trace(D^T L11 D) for this kernel.
    const Eigen::MatrixXd bend = -0.5 * (l11 + l11.transpose());
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::MatrixXd normal = inv_n * basis.transpose() * basis + params.lambda_bend * bend;
    const Eigen::LDLT<Eigen::MatrixXd> solver(normal);

    Eigen::MatrixX3d d(m, 3);
    for (Eigen::Index j = 0; j < m; ++j) {
        d.row(j) = result.prealignment.apply(ctrl.row(j).transpose()).transpose();
    }

    TriMesh deformed{{}, source.faces};
    auto objective = [&](const Eigen::MatrixX3d& dd, const Eigen::MatrixX3d& corr, double* data_out) {
        const Eigen::MatrixX3d x = basis * dd;
        deformed.vertices = rows_to_points(x);
        const double data = inv_n * (x - corr).squaredNorm();
        const double vol = signed_volume(deformed) / vt - 1.0;
        if (data_out) *data_out = data;
        return data + params.lambda_bend * (dd.transpose() * bend * dd).trace() +
               params.lambda_vol * vol * vol;
    };

    Eigen::MatrixX3d corr(static_cast<Eigen::Index>(n), 3);
    double previous_rms = std::numeric_limits<double>::infinity();
    for (int it = 0; it < params.max_iters; ++it) {
        const Eigen::MatrixX3d x = basis * d;
        deformed.vertices = rows_to_points(x);
        const auto hits = kernels::serial::closest_points(deformed.vertices, target);
        for (std::size_t i = 0; i < n; ++i) corr.row(static_cast<Eigen::Index>(i)) = hits[i].point.transpose();
        double data = 0.0;
        const double current = objective(d, corr, &data);
        const double rms = std::sqrt(data);
        result.objective_trace.push_back(current);
        result.rms_trace.push_back(rms);
        result.iterations = it + 1;
        if (std::abs(previous_rms - rms) < params.tol_mm) {
            result.converged = true;
            break;
        }
        previous_rms = rms;

        // Linearized volume residual: a + <h, D>.
        deformed.vertices = rows_to_points(x);
        const auto grad = volume_gradient(deformed);
        Eigen::MatrixX3d g(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) g.row(static_cast<Eigen::Index>(i)) = grad[i].transpose();
        const Eigen::MatrixX3d h = basis.transpose() * g / vt;
        const double a = signed_volume(deformed) / vt - 1.0 - (h.array() * d.array()).sum();

        const Eigen::MatrixX3d dr = solver.solve(inv_n * basis.transpose() * corr);
        const Eigen::MatrixX3d e = solver.solve(h);
        const double lv = params.lambda_vol;
        const double he = (h.array() * e.array()).sum();
        const double s = ((h.array() * dr.array()).sum() - lv * a * he) / (1.0 + lv * he);
        const Eigen::MatrixX3d proposal = dr - lv * (a + s) * e;

        bool moved = false;
        for (double step = 1.0; step > 1e-4; step *= 0.5) {
            const Eigen::MatrixX3d trial = d + step * (proposal - d);
            if (objective(trial, corr, nullptr) <= current) {
                d = trial;
                moved = true;
                break;
            }
        }
        if (!moved) {
            result.converged = true;
            break;
        }
    }

    result.field = interpolating_field(ctrl, d);
    const Eigen::MatrixX3d x = basis * d;
    deformed.vertices = rows_to_points(x);
    result.surface_rms = std::sqrt(mean_sq_distance(deformed.vertices, target));
    result.volume_error = signed_volume(deformed) / vt - 1.0;
    return result;
}

}  // namespace prosper
