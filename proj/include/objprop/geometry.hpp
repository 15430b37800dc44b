#pragma once

#include "objprop/image.hpp"

#include <Eigen/Core>

#include <optional>

namespace objprop {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics, no distortion.
struct Intrinsics
{
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;

    bool valid() const;
    void validate() const;  // throws std::invalid_argument

    /// Intrinsics of the image downsampled by an integer factor. Pixel (u, v)
    /// of the small image samples pixel (factor*u, factor*v) of the original.
    Intrinsics downsampled(int factor) const;

    bool operator==(const Intrinsics&) const = default;
};

/// World-to-camera rigid transform: x_cam = R * x_world + t.
struct Pose
{
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    static Pose identity() { return {}; }

    /// Builds the world-to-camera pose from a camera-to-world rotation and the
    /// camera center in world coordinates (the trajectory-file convention).
    static Pose from_camera_to_world(const Mat3& rotation_cw, const Vec3& center);

    Vec3 camera_center() const { return -R.transpose() * t; }
    Vec3 to_camera(const Vec3& world) const { return R * world + t; }
    Vec3 to_world(const Vec3& camera) const { return R.transpose() * (camera - t); }

    bool valid(double tolerance = 1e-9) const;
};

/// Continuous pixel of a world point, or nullopt when the point is not in
/// front of the camera. No image-bounds check.
std::optional<Vec2> project(const Intrinsics& K, const Pose& pose, const Vec3& world);

struct ProjectedPoint
{
    Vec2 pixel;
    double depth;  // camera-frame z
};
std::optional<ProjectedPoint> project_with_depth(const Intrinsics& K, const Pose& pose, const Vec3& world);

/// World point seen at pixel `pixel` with camera-frame depth `depth`.
/// nullopt for missing (0), negative or non-finite depth.
std::optional<Vec3> backproject(const Intrinsics& K, const Pose& pose, const Vec2& pixel, double depth);

struct WarpedPixel
{
    int u = 0;
    int v = 0;
    double depth = 0.0;  // depth of the warped point in the current camera frame
};

/// Moves a previous-frame pixel with known depth into the current frame and
/// rounds it to the nearest pixel (ties away from zero). nullopt when the
/// depth is invalid, the point is behind the current camera, or it lands
/// outside the image.
std::optional<WarpedPixel> warp_pixel(const Intrinsics& K,
                                      const Pose& previous,
                                      const Pose& current,
                                      const Vec2& pixel,
                                      double depth);

Mat3 skew(const Vec3& v);

/// Rotation taking the unit vector `normal` onto the world up axis (0, 1, 0).
Mat3 rotation_to_gravity(const Vec3& normal);

inline const Vec3 kWorldUp{0.0, 1.0, 0.0};

/// Per-pixel world points of one depth frame.
struct PointImage
{
    Image<Vec3> points;
    Image<unsigned char> valid;

    int width() const { return points.width(); }
    int height() const { return points.height(); }
    bool is_valid(int u, int v) const { return valid(u, v) != 0; }
};

PointImage backproject_depth(const Intrinsics& K, const Pose& pose, const DepthImage& depth);

}  // namespace objprop
