#pragma once

#include "objprop/fusion.hpp"
#include "objprop/geometry.hpp"
#include "objprop/plane.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace objprop {

/// Minimum number of observations a point needs after `total_frames`
/// frames: min(count, ceil(fraction * total_frames)), at least 1.
int frequency_floor(int total_frames, int count = 5, double fraction = 0.05);

std::vector<std::size_t> frequency_filter(const GlobalHeatmap3D& global,
                                          int total_frames,
                                          int count = 5,
                                          double fraction = 0.05);

inline double pseudo_average_confidence(double confidence, int frequency, double tau)
{
    return confidence / (frequency + tau);
}

struct RankedPoint
{
    std::size_t index = 0;
    double score = 0.0;
};

/// Keeps the candidates whose pseudo-average confidence c / (f + tau) is at
/// least eps, in candidate order.
std::vector<RankedPoint> rank_points(const GlobalHeatmap3D& global,
                                     std::span<const std::size_t> candidates,
                                     double tau,
                                     double eps);

struct PlaneGroup
{
    Plane representative;
    std::vector<std::size_t> members;  // indices into the track
    double heat = 0.0;
};

/// Groups keyframe planes that agree within `angle_deg` / `offset` (sign
/// canonicalized), in track order. Each representative is the normalized
/// mean of its members' parameter vectors.
std::vector<PlaneGroup> group_planes(std::span<const PlaneTrackEntry> track, double angle_deg, double offset);

enum class PlaneRemovalStatus
{
    Applied,
    EmptyTrack,
};

struct PlaneRemovalResult
{
    std::vector<RankedPoint> kept;
    std::optional<Plane> support;  // representative of the hottest group
    std::vector<PlaneGroup> groups;
    PlaneRemovalStatus status = PlaneRemovalStatus::Applied;
    std::size_t removed = 0;
};

/// Groups the tracked planes, picks the group with the most accumulated heat
/// as the support plane and drops ranked points within eps_p of it.
PlaneRemovalResult final_plane_removal(const GlobalHeatmap3D& global,
                                       std::span<const RankedPoint> ranked,
                                       std::span<const PlaneTrackEntry> track,
                                       double eps_p,
                                       double group_angle_deg = 10.0,
                                       double group_offset = 0.05);

inline constexpr int kNoise = -1;

struct DbscanResult
{
    std::vector<int> labels;  // cluster id per point, kNoise for noise
    int cluster_count = 0;
};

/// DBSCAN with a uniform-grid neighbor index. A point is core when at least
/// min_pts points (itself included) lie within eps. Points are visited in
/// index order, so labels are deterministic.
DbscanResult dbscan(std::span<const Vec3> points, double eps, int min_pts);

/// Box aligned with the gravity frame p_g = rotation * p_world.
struct Box3D
{
    Mat3 rotation = Mat3::Identity();
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
    long cluster_size = 0;

    double volume() const;
    Vec3 extent() const { return (max - min).cwiseMax(0.0); }
    std::array<Vec3, 8> world_corners() const;
    bool contains(const Vec3& world, double tolerance = 0.0) const;
};

/// Tight box of the points after rotating the support normal onto world up.
Box3D fit_box(std::span<const Vec3> points, const Vec3& support_normal);
Box3D fit_box_rotated(std::span<const Vec3> points, const Mat3& rotation);

/// Overlap volume of two boxes in the first box's frame (exact when both
/// share the rotation; otherwise the second box is replaced by its bounding
/// box in that frame).
double overlap_volume(const Box3D& a, const Box3D& b);

struct ClusterBox
{
    Box3D box;
    std::vector<Vec3> points;
};

/// Repeatedly merges any two boxes with strictly positive overlap volume
/// into the box of their joint points until no pair intersects.
std::vector<ClusterBox> merge_boxes(std::vector<ClusterBox> boxes);

std::vector<ClusterBox> volume_filter(std::vector<ClusterBox> boxes, double min_volume);

}  // namespace objprop
