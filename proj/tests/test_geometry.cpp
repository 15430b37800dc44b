#include "objprop/geometry.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

using namespace objprop;

namespace {

const Intrinsics kVga{525.0, 525.0, 319.5, 239.5, 640, 480};

Mat3 random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    return q.normalized().toRotationMatrix();
}

}  // namespace

TEST_CASE("intrinsics validation")
{
    CHECK(kVga.valid());
    Intrinsics bad = kVga;
    bad.fx = 0.0;
    CHECK_FALSE(bad.valid());
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = kVga;
    bad.width = 0;
    CHECK_FALSE(bad.valid());
}

TEST_CASE("project and backproject are inverse")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uu(0.0, 639.0), vv(0.0, 479.0), zz(0.3, 8.0);
    for (int i = 0; i < 2000; ++i) {
        Pose pose{random_rotation(rng), Vec3(zz(rng), -zz(rng), zz(rng))};
        const Vec2 px(uu(rng), vv(rng));
        const double z = zz(rng);
        const auto world = backproject(kVga, pose, px, z);
        REQUIRE(world);
        const auto back = project_with_depth(kVga, pose, *world);
        REQUIRE(back);
        CHECK((back->pixel - px).norm() < 1e-9);
        CHECK(std::abs(back->depth - z) < 1e-9);
    }
}

TEST_CASE("pinhole projection matches the closed form")
{
    const Pose pose = Pose::identity();
    const auto px = project(kVga, pose, Vec3(0.2, -0.1, 2.0));
    REQUIRE(px);
    CHECK(px->x() == doctest::Approx(525.0 * 0.1 + 319.5));
    CHECK(px->y() == doctest::Approx(-525.0 * 0.05 + 239.5));
    CHECK_FALSE(project(kVga, pose, Vec3(0.0, 0.0, -1.0)));
    CHECK_FALSE(project(kVga, pose, Vec3(0.0, 0.0, 0.0)));
}

TEST_CASE("backproject rejects missing and invalid depth")
{
    const Pose pose = Pose::identity();
    CHECK_FALSE(backproject(kVga, pose, Vec2(10, 10), 0.0));
    CHECK_FALSE(backproject(kVga, pose, Vec2(10, 10), -1.0));
    CHECK_FALSE(backproject(kVga, pose, Vec2(10, 10), std::nan("")));
    CHECK_FALSE(backproject(kVga, pose, Vec2(10, 10), INFINITY));
}

TEST_CASE("pose conventions")
{
    std::mt19937_64 rng(5);
    const Mat3 rcw = random_rotation(rng);
    const Vec3 center(1.0, 2.0, -0.5);
    const Pose pose = Pose::from_camera_to_world(rcw, center);
    CHECK((pose.camera_center() - center).norm() < 1e-12);
    CHECK(pose.to_camera(center).norm() < 1e-12);
    const Vec3 x(0.3, -0.7, 4.0);
    CHECK((pose.to_world(pose.to_camera(x)) - x).norm() < 1e-12);
    CHECK(pose.valid());
    Pose skewed = pose;
    skewed.R(0, 0) += 0.01;
    CHECK_FALSE(skewed.valid());
}

TEST_CASE("warp with identical poses keeps the pixel")
{
    const Pose pose = Pose::identity();
    const auto w = warp_pixel(kVga, pose, pose, Vec2(100, 200), 1.5);
    REQUIRE(w);
    CHECK(w->u == 100);
    CHECK(w->v == 200);
    CHECK(w->depth == doctest::Approx(1.5));
}

TEST_CASE("warp rounds half away from zero and drops out-of-view pixels")
{
    const Intrinsics K{128.0, 128.0, 0.0, 0.0, 50, 50};
    const Pose prev = Pose::identity();
    // A translation of 1/256 m shifts points by exactly half a pixel at 1 m.
    Pose cur;
    cur.t = Vec3(1.0 / 256.0, 0.0, 0.0);
    auto w = warp_pixel(K, prev, cur, Vec2(10, 10), 1.0);
    REQUIRE(w);
    CHECK(w->u == 11);
    CHECK(w->v == 10);
    cur.t = Vec3(1.0, 0.0, 0.0);
    CHECK_FALSE(warp_pixel(K, prev, cur, Vec2(10, 10), 1.0));
    CHECK_FALSE(warp_pixel(K, prev, prev, Vec2(10, 10), 0.0));
}

TEST_CASE("rotation_to_gravity maps normals onto the up axis")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Vec3> normals = {kWorldUp, -kWorldUp, Vec3::UnitX(), Vec3(0, 1, 1e-13).normalized()};
    for (int i = 0; i < 500; ++i)
        normals.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
    for (const Vec3& n : normals) {
        const Mat3 R = rotation_to_gravity(n);
        CHECK((R * n - kWorldUp).norm() < 1e-9);
        CHECK((R.transpose() * R - Mat3::Identity()).norm() < 1e-9);
        CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK((rotation_to_gravity(kWorldUp) - Mat3::Identity()).norm() < 1e-12);
}

TEST_CASE("skew matrix reproduces the cross product")
{
    const Vec3 a(1, -2, 3), b(0.5, 4, -1);
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-12);
}

TEST_CASE("downsampled intrinsics sample every factor-th pixel")
{
    const Intrinsics half = kVga.downsampled(2);
    CHECK(half.width == 320);
    CHECK(half.height == 240);
    const Pose pose = Pose::identity();
    const Vec3 x(0.3, 0.2, 2.0);
    const auto full = project(kVga, pose, x);
    const auto small = project(half, pose, x);
    CHECK((*full / 2.0 - *small).norm() < 1e-12);
    CHECK(kVga.downsampled(1) == kVga);
    CHECK_THROWS(kVga.downsampled(0));
}

TEST_CASE("backproject_depth marks missing pixels invalid")
{
    const Intrinsics K{10.0, 10.0, 1.5, 1.5, 4, 4};
    DepthImage depth(4, 4, 2.0f);
    depth(1, 2) = 0.0f;
    const PointImage pts = backproject_depth(K, Pose::identity(), depth);
    CHECK_FALSE(pts.is_valid(1, 2));
    CHECK(pts.is_valid(0, 0));
    CHECK((pts.points(3, 0) - Vec3(0.3, -0.3, 2.0)).norm() < 1e-12);
}
