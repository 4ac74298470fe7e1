#include "prosper/shape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "prosper/error.hpp"
#include "prosper/kernels.hpp"
#include "prosper/procrustes.hpp"

namespace prosper {

namespace {

Eigen::VectorXd flatten(std::span<const Vec3> pts)
{
    Eigen::VectorXd v(3 * pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) v.segment<3>(3 * i) = pts[i];
    return v;
}

std::vector<Vec3> unflatten(const Eigen::VectorXd& v)
{
    std::vector<Vec3> pts(v.size() / 3);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = v.segment<3>(3 * i);
    return pts;
}

Vec3 centroid(std::span<const Vec3> pts)
{
    Vec3 c = Vec3::Zero();
    for (const auto& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

double centroid_size(std::span<const Vec3> pts)
{
    const Vec3 c = centroid(pts);
    double s = 0.0;
    for (const auto& p : pts) s += (p - c).squaredNorm();
    return std::sqrt(s);
}

std::vector<Vec3> apply_all(const SimilarityTransform& t, std::span<const Vec3> pts)
{
    std::vector<Vec3> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = t.apply(pts[i]);
    return out;
}

/// Principal axes (columns, descending variance) of a point set.
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

double rms_radius(std::span<const Vec3> pts)
{
    return centroid_size(pts) / std::sqrt(static_cast<double>(pts.size()));
}

struct FitState {
    SimilarityTransform pose;
    Eigen::VectorXd b;
};

struct Correspondence {
    std::vector<SurfacePoint> hits;  ///< model-frame closest points
    double data = 0.0;               ///< world-frame sum of squared residuals
};

Correspondence correspond(const ShapeModel& model, const FitState& s, std::span<const Vec3> points)
{
    const TriMesh instance = synthesize(model, {s.b});
    const SimilarityTransform inv = s.pose.inverse();
    std::vector<Vec3> local(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) local[j] = inv.apply(points[j]);
    Correspondence c;
    c.hits = kernels::parallel::closest_points(local, instance);
    for (const auto& h : c.hits) c.data += (s.pose.scale * h.distance) * (s.pose.scale * h.distance);
    return c;
}

double prior(const ShapeModel& model, const Eigen::VectorXd& b, double beta)
{
    double p = 0.0;
    for (Eigen::Index i = 0; i < b.size(); ++i) p += b[i] * b[i] / model.variances[i];
    return beta * p;
}

/// Joint point-to-plane Gauss-Newton step on (pose, b), accepted only if the
/// true closest-point objective decreases.
bool polish(const ShapeModel& model, std::span<const Vec3> points, FitState& state,
            Correspondence& corr, const FitOptions& opt)
{
    const auto k = static_cast<Eigen::Index>(model.mode_count());
    const Eigen::Index dof = 7 + k;
    const TriMesh instance = synthesize(model, {state.b});
    const Mat3 rot = state.pose.rigid.rotation_matrix();
    const double s = state.pose.scale;
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(dof, dof);
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(dof);
    for (std::size_t j = 0; j < points.size(); ++j) {
        const auto& h = corr.hits[j];
        const Face& f = model.faces[h.face];
        const Vec3& a = instance.vertices[f[0]];
        const Vec3 normal_local = (instance.vertices[f[1]] - a).cross(instance.vertices[f[2]] - a);
        if (normal_local.norm() == 0.0) continue;
        const Vec3 n = rot * normal_local.normalized();
        const Vec3 rm = rot * h.point;
        const Vec3 x = s * rm + state.pose.rigid.translation;
        Eigen::RowVectorXd row(dof);
        row.segment<3>(0) = n.transpose();
        row.segment<3>(3) = (s * rm).cross(n).transpose();
        row(6) = s * n.dot(rm);
        for (Eigen::Index i = 0; i < k; ++i) {
            Vec3 mode = Vec3::Zero();
            for (int c = 0; c < 3; ++c) mode += h.barycentric[c] * model.modes.block<3, 1>(3 * f[c], i);
            row(7 + i) = s * n.dot(rot * mode);
        }
        const double r = n.dot(x - points[j]);
        jtj += row.transpose() * row;
        jtr += row.transpose() * r;
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        const double w = opt.beta / model.variances[i];
        jtj(7 + i, 7 + i) += w;
        jtr(7 + i) += w * state.b[i];
    }
    jtj.diagonal().array() += 1e-9 * (1.0 + jtj.diagonal().array());
    const Eigen::VectorXd delta = -jtj.ldlt().solve(jtr);
    if (!delta.allFinite()) return false;

    const double current = corr.data + prior(model, state.b, opt.beta);
    for (double step = 1.0; step > 1e-3; step *= 0.5) {
        const Eigen::VectorXd d = step * delta;
        FitState trial = state;
        const Vec3 w = d.segment<3>(3);
        const Mat3 dr = w.norm() > 0.0
                            ? Mat3(Eigen::AngleAxisd(w.norm(), w.normalized()))
                            : Mat3::Identity();
        trial.pose.scale = s * std::exp(d(6));
        trial.pose.rigid = RigidTransform::from_matrix(dr * rot, state.pose.rigid.translation + d.segment<3>(0));
        if (k > 0) trial.b = state.b + d.tail(k);
        Correspondence c = correspond(model, trial, points);
        if (c.data + prior(model, trial.b, opt.beta) < current) {
            state = std::move(trial);
            corr = std::move(c);
            return true;
        }
    }
    return false;
}

FitResult run_fit(const ShapeModel& model, std::span<const Vec3> points, FitState state,
                  const FitOptions& opt)
{
    const std::size_t k = model.mode_count();
    FitResult result;
    const double n = static_cast<double>(points.size());
    double previous_rms = std::numeric_limits<double>::infinity();
    Correspondence corr = correspond(model, state, points);

    for (int it = 0; it < opt.max_iterations; ++it) {
        const double rms = std::sqrt(corr.data / n);
        result.objective_trace.push_back(corr.data + prior(model, state.b, opt.beta));
        result.rms_trace.push_back(rms);
        result.iterations = it + 1;
        if (previous_rms - rms < opt.tolerance_mm && it > 0) break;
        previous_rms = rms;

        // (a) similarity of the current closest points onto the user points.
        std::vector<Vec3> model_pts(points.size());
        for (std::size_t j = 0; j < points.size(); ++j) model_pts[j] = corr.hits[j].point;
        state.pose = fit_similarity(model_pts, points);

        // (b) regularized linear solve for the coefficients with frozen
        // barycentric correspondences.
        if (k > 0) {
            const Mat3 sr = state.pose.scale * state.pose.rigid.rotation_matrix();
            Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(k, k);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
            for (std::size_t j = 0; j < points.size(); ++j) {
                const auto& h = corr.hits[j];
                const Face& f = model.faces[h.face];
                Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, k);
                Vec3 base = Vec3::Zero();
                for (int c = 0; c < 3; ++c) {
                    const double w = h.barycentric[c];
                    a += w * model.modes.middleRows(3 * f[c], 3);
                    base += w * model.mean[f[c]];
                }
                const Eigen::MatrixXd m = sr * a;
                const Vec3 offset = sr * base + state.pose.rigid.translation - points[j];
                normal += m.transpose() * m;
                rhs -= m.transpose() * offset;
            }
            for (std::size_t i = 0; i < k; ++i) normal(i, i) += opt.beta / model.variances[i];
            state.b = normal.ldlt().solve(rhs);
        }
        corr = correspond(model, state, points);
        polish(model, points, state, corr, opt);
    }

    for (std::size_t i = 0; i < k; ++i) {
        const double bound = opt.plausibility_sigmas * std::sqrt(model.variances[i]);
        state.b[i] = std::clamp(state.b[i], -bound, bound);
    }
    corr = correspond(model, state, points);
    result.pose = state.pose;
    result.coeffs.b = state.b;
    result.rms = std::sqrt(corr.data / n);
    return result;
}

}  // namespace

std::vector<std::string> ShapeModel::violations() const
{
    std::vector<std::string> out;
    const auto k = variances.size();
    if (modes.rows() != static_cast<Eigen::Index>(3 * mean.size()) || modes.cols() != k) {
        out.emplace_back("modes must be 3n x k");
        return out;
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(variances[i] > 0.0)) out.emplace_back("variances must be positive");
        if (i > 0 && variances[i] > variances[i - 1]) out.emplace_back("variances must be descending");
    }
    if (k > 0) {
        const Eigen::MatrixXd gram = modes.transpose() * modes;
        const double off = (gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
        if (off > 1e-9) out.emplace_back("modes are not orthonormal");
    }
    for (auto& v : mesh_violations(mean_mesh())) out.push_back("mean mesh: " + v);
    return out;
}

ShapeModel build_model(std::span<const TriMesh> training, const ShapeBuildOptions& options)
{
    if (training.size() < 2) {
        throw Error(Errc::TooFewShapes, "need at least 2 training shapes");
    }
    const TriMesh& ref = training.front();
    for (std::size_t i = 1; i < training.size(); ++i) {
        if (training[i].vertices.size() != ref.vertices.size() || training[i].faces != ref.faces) {
            throw Error(Errc::TopologyMismatch,
                        "training shape " + std::to_string(i) + " does not share the reference topology");
        }
    }
    const std::size_t n = ref.vertices.size();
    const std::size_t count = training.size();

    double mean_size = 0.0;
    for (const auto& m : training) mean_size += centroid_size(m.vertices);
    mean_size /= static_cast<double>(count);

    // Generalized Procrustes: gauge fixed by the first shape (centered, rescaled
    // to the mean centroid size of the training set).
    std::vector<std::vector<Vec3>> aligned(count);
    std::vector<Vec3> mean(n);
    {
        const Vec3 c = centroid(ref.vertices);
        const double s = mean_size / centroid_size(ref.vertices);
        for (std::size_t v = 0; v < n; ++v) mean[v] = s * (ref.vertices[v] - c);
    }
    const std::vector<Vec3> gauge = mean;
    for (int it = 0; it < options.max_procrustes_iterations; ++it) {
        for (std::size_t i = 0; i < count; ++i) {
            aligned[i] = apply_all(fit_similarity(training[i].vertices, mean), training[i].vertices);
        }
        std::vector<Vec3> next(n, Vec3::Zero());
        for (const auto& a : aligned) {
            for (std::size_t v = 0; v < n; ++v) next[v] += a[v];
        }
        for (auto& v : next) v /= static_cast<double>(count);
        // Re-fix the gauge: rigid onto the reference pose, rescale to mean size.
        const RigidTransform g = fit_rigid(next, gauge);
        const double s = mean_size / centroid_size(next);
        const Vec3 c = centroid(next);
        double change = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            const Vec3 p = g.apply(c + s * (next[v] - c));
            change = std::max(change, (p - mean[v]).norm());
            mean[v] = p;
        }
        if (change < 1e-10) break;
    }
    for (std::size_t i = 0; i < count; ++i) {
        aligned[i] = apply_all(fit_similarity(training[i].vertices, mean), training[i].vertices);
    }
    // Model mean is the average of the final aligned shapes.
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(3 * n);
    for (const auto& a : aligned) mu += flatten(a);
    mu /= static_cast<double>(count);

    Eigen::MatrixXd x(count, 3 * n);
    for (std::size_t i = 0; i < count; ++i) x.row(i) = (flatten(aligned[i]) - mu).transpose();

    // PCA through the small Gram matrix.
    const double denom = static_cast<double>(count - 1);
    const Eigen::MatrixXd gram = x * x.transpose() / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd evals = eig.eigenvalues().reverse();
    const Eigen::MatrixXd evecs = eig.eigenvectors().rowwise().reverse();

    double scale_ref = 0.0;
    for (std::size_t v = 0; v < n; ++v) scale_ref += mu.segment<3>(3 * v).squaredNorm();
    const double eps = 1e-12 * std::max(scale_ref, 1.0);
    double total = 0.0;
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (evals[i] > eps) total += evals[i];
    }
    std::size_t keep = 0;
    double acc = 0.0;
    while (keep < static_cast<std::size_t>(evals.size()) && evals[keep] > eps &&
           acc < options.retained_variance * total) {
        acc += evals[keep];
        ++keep;
    }

    ShapeModel model;
    model.mean = unflatten(mu);
    model.faces = ref.faces;
    model.training_count = count;
    model.variances = evals.head(keep);
    model.modes.resize(3 * n, keep);
    for (std::size_t i = 0; i < keep; ++i) {
        Eigen::VectorXd mode = x.transpose() * evecs.col(i);
        model.modes.col(i) = mode.normalized();
    }
    if (keep > 0) {
        // Clean up round-off so the columns are orthonormal to machine precision.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(model.modes);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(3 * n, keep);
        for (std::size_t i = 0; i < keep; ++i) {
            if (q.col(i).dot(model.modes.col(i)) < 0.0) q.col(i) = -q.col(i);
        }
        model.modes = q;
    }
    model.retained_fraction = total > 0.0 ? acc / total : 1.0;
    return model;
}

TriMesh synthesize(const ShapeModel& model, const ShapeCoefficients& coeffs,
                   const SimilarityTransform& pose)
{
    const auto k = static_cast<Eigen::Index>(model.mode_count());
    if (coeffs.b.size() > k) {
        throw Error(Errc::CoefficientCountMismatch, std::to_string(coeffs.b.size()) +
                                                        " coefficients for a model with " +
                                                        std::to_string(k) + " modes");
    }
    TriMesh out;
    out.faces = model.faces;
    out.vertices = model.mean;
    if (coeffs.b.size() > 0) {
        const Eigen::VectorXd offset = model.modes.leftCols(coeffs.b.size()) * coeffs.b;
        for (std::size_t v = 0; v < out.vertices.size(); ++v) out.vertices[v] += offset.segment<3>(3 * v);
    }
    for (auto& v : out.vertices) v = pose.apply(v);
    return out;
}

ShapeCoefficients project(const ShapeModel& model, std::span<const Vec3> vertices)
{
    if (vertices.size() != model.mean.size()) {
        throw Error(Errc::TopologyMismatch, "vertex count differs from the model");
    }
    return {model.modes.transpose() * (flatten(vertices) - flatten(model.mean))};
}

FitResult fit_to_points(const ShapeModel& model, std::span<const Vec3> points, const FitOptions& options)
{
    if (points.size() < 6) {
        throw Error(Errc::TooFewPoints, "shape fitting needs at least 6 points, got " +
                                            std::to_string(points.size()));
    }
    const Vec3 spread = spread_singular_values(points);
    if (spread[2] <= 1e-6 * spread[0]) throw Error(Errc::CoplanarPoints, "user points are coplanar");

    // Starts from the principal frames of the points and the mean shape. All
    // four proper sign choices are tried, which keeps the fit equivariant under
    // rigid motion of the input.
    const Mat3 point_axes = principal_axes(points);
    const Mat3 mean_axes = principal_axes(model.mean);
    const double scale = rms_radius(points) / rms_radius(model.mean);
    const Vec3 point_center = centroid(points);
    const Vec3 mean_center = centroid(model.mean);

    FitResult best;
    double best_objective = std::numeric_limits<double>::infinity();
    for (int signs = 0; signs < 8; ++signs) {
        const Vec3 d((signs & 1) ? -1.0 : 1.0, (signs & 2) ? -1.0 : 1.0, (signs & 4) ? -1.0 : 1.0);
        const Mat3 r = point_axes * d.asDiagonal() * mean_axes.transpose();
        if (r.determinant() < 0.0) continue;
        FitState start;
        start.pose.scale = scale;
        start.pose.rigid = RigidTransform::from_matrix(r, point_center - scale * (r * mean_center));
        start.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.mode_count()));
        FitResult candidate = run_fit(model, points, start, options);
        const double objective = candidate.rms * candidate.rms * points.size() +
                                 prior(model, candidate.coeffs.b, options.beta);
        if (objective < best_objective - 1e-12) {
            best_objective = objective;
            best = std::move(candidate);
        }
    }
    return best;
}

double surface_distance_rms(std::span<const Vec3> vertices, const TriMesh& to)
{
    if (vertices.empty()) return 0.0;
    const auto hits = kernels::parallel::closest_points(vertices, to);
    double s = 0.0;
    for (const auto& h : hits) s += h.distance * h.distance;
    return std::sqrt(s / static_cast<double>(hits.size()));
}

double surface_to_surface_rms(const TriMesh& a, const TriMesh& b)
{
    const double ab = surface_distance_rms(a.vertices, b);
    const double ba = surface_distance_rms(b.vertices, a);
    const double na = static_cast<double>(a.vertices.size());
    const double nb = static_cast<double>(b.vertices.size());
    return std::sqrt((ab * ab * na + ba * ba * nb) / (na + nb));
}

TriMesh prostate_like_mesh(const ProstateShapeParams& params, int subdivisions)
{
    TriMesh m = make_icosphere(1.0, subdivisions);
    for (auto& v : m.vertices) {
        const double taper = 1.0 + params.apex_taper * v.y();  // narrower toward -y
        Vec3 p(params.semi_axes.x() * v.x() * taper, params.semi_axes.y() * v.y(),
               params.semi_axes.z() * v.z() * taper);
        p.z() += params.bend_mm * (v.y() * v.y() - 1.0 / 3.0);
        v = p;
    }
    return m;
}

std::vector<TriMesh> bundled_training_family(std::size_t count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<TriMesh> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        ProstateShapeParams p;
        const double size = 1.0 + 0.12 * unit(rng);
        p.semi_axes = Vec3(21.0 * (1.0 + 0.10 * unit(rng)), 18.0 * (1.0 + 0.10 * unit(rng)),
                           16.0 * (1.0 + 0.10 * unit(rng))) *
                      size;
        p.apex_taper = 0.15 + 0.10 * unit(rng);
        p.bend_mm = 2.0 + 1.5 * unit(rng);
        out.push_back(prostate_like_mesh(p));
    }
    return out;
}

const ShapeModel& bundled_shape_model()
{
    static const ShapeModel model = [] {
        const auto family = bundled_training_family();
        return build_model(family);
    }();
    return model;
}

}  // namespace prosper
