#include "objprop/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace objprop {

bool Intrinsics::valid() const
{
    return std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0 && width > 0 && height > 0 &&
           cx >= 0.0 && cy >= 0.0 && cx < width && cy < height;
}

void Intrinsics::validate() const
{
    if (!valid())
        throw std::invalid_argument("invalid intrinsics: fx=" + std::to_string(fx) + " fy=" + std::to_string(fy) +
                                    " cx=" + std::to_string(cx) + " cy=" + std::to_string(cy) +
                                    " size=" + std::to_string(width) + "x" + std::to_string(height));
}

Intrinsics Intrinsics::downsampled(int factor) const
{
    if (factor < 1)
        throw std::invalid_argument("downsample factor must be >= 1");
    if (factor == 1)
        return *this;
    Intrinsics out;
    out.fx = fx / factor;
    out.fy = fy / factor;
    out.cx = cx / factor;
    out.cy = cy / factor;
    out.width = width / factor;
    out.height = height / factor;
    return out;
}

Pose Pose::from_camera_to_world(const Mat3& rotation_cw, const Vec3& center)
{
    Pose pose;
    pose.R = rotation_cw.transpose();
    pose.t = -pose.R * center;
    return pose;
}

bool Pose::valid(double tolerance) const
{
    if (!R.allFinite() || !t.allFinite())
        return false;
    const double orthogonality = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    return orthogonality <= tolerance && std::abs(R.determinant() - 1.0) <= tolerance;
}

std::optional<ProjectedPoint> project_with_depth(const Intrinsics& K, const Pose& pose, const Vec3& world)
{
    const Vec3 cam = pose.to_camera(world);
    if (!(cam.z() > 0.0) || !cam.allFinite())
        return std::nullopt;
    return ProjectedPoint{Vec2(K.fx * cam.x() / cam.z() + K.cx, K.fy * cam.y() / cam.z() + K.cy), cam.z()};
}

std::optional<Vec2> project(const Intrinsics& K, const Pose& pose, const Vec3& world)
{
    if (auto p = project_with_depth(K, pose, world))
        return p->pixel;
    return std::nullopt;
}

std::optional<Vec3> backproject(const Intrinsics& K, const Pose& pose, const Vec2& pixel, double depth)
{
    if (!(depth > 0.0) || !std::isfinite(depth))
        return std::nullopt;
    const Vec3 cam(depth / K.fx * (pixel.x() - K.cx), depth / K.fy * (pixel.y() - K.cy), depth);
    return pose.to_world(cam);
}

std::optional<WarpedPixel> warp_pixel(const Intrinsics& K,
                                      const Pose& previous,
                                      const Pose& current,
                                      const Vec2& pixel,
                                      double depth)
{
    const auto world = backproject(K, previous, pixel, depth);
    if (!world)
        return std::nullopt;
    const auto projected = project_with_depth(K, current, *world);
    if (!projected)
        return std::nullopt;
    const double u = std::round(projected->pixel.x());
    const double v = std::round(projected->pixel.y());
    if (u < 0.0 || v < 0.0 || u >= K.width || v >= K.height)
        return std::nullopt;
    return WarpedPixel{static_cast<int>(u), static_cast<int>(v), projected->depth};
}

Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

Mat3 rotation_to_gravity(const Vec3& normal)
{
    const Vec3 v = normal.cross(kWorldUp);
    const double s = v.norm();
    const double c = normal.dot(kWorldUp);
    if (s < 1e-12) {
        if (c > 0.0)
            return Mat3::Identity();
        // Antiparallel: half turn about x.
        return Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
    }
    const Mat3 vx = skew(v);
    // (1 - c) / s^2 == 1 / (1 + c) for unit normals; the second form is
    // better conditioned near the aligned case.
    const double k = c >= 0.0 ? 1.0 / (1.0 + c) : (1.0 - c) / (s * s);
    return Mat3::Identity() + vx + k * vx * vx;
}

PointImage backproject_depth(const Intrinsics& K, const Pose& pose, const DepthImage& depth)
{
    PointImage out{Image<Vec3>(depth.width(), depth.height(), Vec3::Zero()),
                   Image<unsigned char>(depth.width(), depth.height(), 0)};
    const Mat3 Rt = pose.R.transpose();
    const Vec3 offset = -Rt * pose.t;
    for (int v = 0; v < depth.height(); ++v) {
        for (int u = 0; u < depth.width(); ++u) {
            const double z = depth(u, v);
            if (!(z > 0.0) || !std::isfinite(z))
                continue;
            const Vec3 cam(z / K.fx * (u - K.cx), z / K.fy * (v - K.cy), z);
            out.points(u, v) = Rt * cam + offset;
            out.valid(u, v) = 1;
        }
    }
    return out;
}

}  // namespace objprop
