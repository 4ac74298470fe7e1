#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "prosper/error.hpp"
#include "prosper/geom.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace prosper;
using prosper::testing::random_rigid;

using namespace prosper::testing;

namespace {

TriMesh unit_cube() { return make_box(Vec3::Zero(), Vec3::Ones()); }


}  // namespace

TEST_CASE("apply_transform basics")
{
    CHECK((apply_transform(RigidTransform::identity(), Vec3(1, 2, 3)) - Vec3(1, 2, 3)).norm() == 0.0);
    const auto rz = RigidTransform::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
    CHECK((apply_transform(rz, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-15);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto t = random_rigid(rng);
        const Vec3 p = prosper::testing::random_point(rng, 200.0);
        CHECK((t.inverse().apply(t.apply(p)) - p).norm() < 1e-9);
        const SimilarityTransform s{0.5 + i * 0.02, t};
        CHECK((s.inverse().apply(s.apply(p)) - p).norm() < 1e-9);
    }
}

TEST_CASE("transform group laws on 1000 random transforms")
{
    std::mt19937_64 rng(11);
    const Vec3 probes[] = {Vec3(0, 0, 0), Vec3(50, -20, 10), Vec3(-80, 90, 120)};
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_rigid(rng), b = random_rigid(rng), c = random_rigid(rng);
        for (const auto& p : probes) {
            CHECK(((a * a.inverse()).apply(p) - p).norm() < 1e-9);
            CHECK((((a * b) * c).apply(p) - (a * (b * c)).apply(p)).norm() < 1e-9);
        }
        // isometry
        const Vec3 p = probes[1], q = probes[2];
        CHECK(std::abs((a.apply(p) - a.apply(q)).norm() - (p - q).norm()) < 1e-9);
        CHECK(a.valid());
    }
}

TEST_CASE("mesh_volume")
{
    CHECK(mesh_volume(unit_cube()) == doctest::Approx(1.0).epsilon(1e-15));

    SUBCASE("icosphere against Monte-Carlo oracle")
    {
        const TriMesh sphere = make_icosphere(10.0, 4);
        const double v = mesh_volume(sphere);
        const double analytic = 4.0 / 3.0 * std::numbers::pi * 1000.0;
        CHECK(std::abs(v - analytic) / analytic < 0.01);
        const double mc = monte_carlo_volume(sphere, 40000, 25, 99);  // 10^6 samples
        CHECK(std::abs(v - mc) / mc < 0.01);
    }
    SUBCASE("open mesh is rejected")
    {
        TriMesh open = make_icosphere(10.0, 1);
        open.faces.pop_back();
        CHECK_THROWS_AS(mesh_volume(open), Error);
        try {
            mesh_volume(open);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::OpenMesh);
        }
    }
    SUBCASE("inverted orientation is rejected")
    {
        TriMesh inv = unit_cube();
        for (auto& f : inv.faces) std::swap(f[1], f[2]);
        try {
            mesh_volume(inv);
            FAIL("expected InvertedOrientation");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::InvertedOrientation);
        }
    }
    SUBCASE("degenerate face is reported")
    {
        TriMesh m = unit_cube();
        m.vertices.push_back(m.vertices[0]);
        m.faces.push_back({0, 8, 1});
        CHECK_FALSE(mesh_violations(m).empty());
    }
    SUBCASE("rigid invariance and similarity scaling")
    {
        const TriMesh sphere = make_icosphere(12.0, 3, Vec3(3, 4, 5));
        const double v0 = mesh_volume(sphere);
        std::mt19937_64 rng(3);
        for (int i = 0; i < 20; ++i) {
            const auto t = random_rigid(rng);
            CHECK(std::abs(mesh_volume(transformed(sphere, t)) - v0) / v0 < 1e-6);
            const double s = 0.6 + 0.1 * i;
            CHECK(mesh_volume(transformed(sphere, SimilarityTransform{s, t})) ==
                  doctest::Approx(v0 * s * s * s).epsilon(1e-9));
        }
    }
}

TEST_CASE("scale_to_volume_factor")
{
    const TriMesh sphere = make_icosphere(10.0, 3, Vec3(1, -2, 3));
    const TriMesh same = scale_to_volume_factor(sphere, 1.0);
    for (std::size_t i = 0; i < sphere.vertices.size(); ++i) CHECK(same.vertices[i] == sphere.vertices[i]);

    const TriMesh grown = scale_to_volume_factor(sphere, 1.2);
    const Vec3 c = sphere.vertex_centroid();
    const double linear = (grown.vertices[0] - c).norm() / (sphere.vertices[0] - c).norm();
    CHECK(linear == doctest::Approx(1.062659).epsilon(1e-6));
    CHECK(std::abs(mesh_volume(grown) / mesh_volume(sphere) - 1.2) < 1e-9);
    CHECK(std::abs(mesh_volume(scale_to_volume_factor(sphere, 2.0)) / mesh_volume(sphere) - 2.0) < 1e-9);

    for (double bad : {0.5, 0.3, 2.01, -1.0}) {
        try {
            scale_to_volume_factor(sphere, bad);
            FAIL("expected FactorOutOfRange");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::FactorOutOfRange);
        }
    }
}

TEST_CASE("segment_mesh_clearance")
{
    const TriMesh cube = unit_cube();
    SUBCASE("far field")
    {
        const auto c = segment_mesh_clearance(Vec3(101, -5, 0.5), Vec3(101, 5, 0.5), cube);
        CHECK_FALSE(c.intersects);
        CHECK(c.min_distance == doctest::Approx(100.0));
    }
    SUBCASE("through the center")
    {
        const auto c = segment_mesh_clearance(Vec3(0.5, -3, 0.5), Vec3(0.5, 3, 0.5), cube);
        CHECK(c.intersects);
        CHECK(c.min_distance == 0.0);
    }
    SUBCASE("degenerate segment")
    {
        try {
            segment_mesh_clearance(Vec3(1, 1, 1), Vec3(1, 1, 1), cube);
            FAIL("expected DegenerateSegment");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::DegenerateSegment);
        }
    }
    SUBCASE("200 random segments against the brute-force oracle")
    {
        const TriMesh sphere = make_icosphere(10.0, 2);
        std::mt19937_64 rng(2024);
        int crossing = 0;
        for (int i = 0; i < 200; ++i) {
            const Vec3 a = prosper::testing::random_point(rng, 16.0);
            const Vec3 b = prosper::testing::random_point(rng, 16.0);
            const auto c = segment_mesh_clearance(a, b, sphere);
            const double oracle = brute_force_clearance(a, b, sphere);
            CHECK(std::abs(c.min_distance - oracle) < 1e-9);
            CHECK(c.intersects == (oracle < 1e-9));
            crossing += c.intersects ? 1 : 0;
            // symmetric and never negative
            const auto r = segment_mesh_clearance(b, a, sphere);
            CHECK(r.min_distance == doctest::Approx(c.min_distance).epsilon(1e-12));
            CHECK(c.min_distance >= 0.0);
        }
        CHECK(crossing > 20);
        CHECK(crossing < 190);
    }
}

TEST_CASE("inside queries")
{
    const TriMesh sphere = make_icosphere(10.0, 3);
    CHECK(point_in_mesh(Vec3(0, 0, 0), sphere));
    CHECK(point_in_mesh(Vec3(9.0, 0, 0), sphere));
    CHECK_FALSE(point_in_mesh(Vec3(10.5, 0, 0), sphere));
    const double len = segment_inside_length(Vec3(-20, 0.1, 0.2), Vec3(20, 0.1, 0.2), sphere);
    CHECK(len == doctest::Approx(2.0 * std::sqrt(100.0 - 0.05)).epsilon(0.01));
    CHECK(segment_inside_length(Vec3(0, 0, 0), Vec3(5, 0, 0), sphere) == doctest::Approx(5.0));
    CHECK(segment_inside_length(Vec3(20, 0, 0), Vec3(30, 0, 0), sphere) == 0.0);
}

TEST_CASE("closest point on triangle regions")
{
    const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
    Vec3 bary;
    CHECK((closest_point_on_triangle(Vec3(0.2, 0.2, 5), a, b, c, &bary) - Vec3(0.2, 0.2, 0)).norm() < 1e-15);
    CHECK(bary.sum() == doctest::Approx(1.0));
    CHECK((closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c) - a).norm() < 1e-15);
    CHECK((closest_point_on_triangle(Vec3(1, 1, 0), a, b, c) - Vec3(0.5, 0.5, 0)).norm() < 1e-15);
}
