#pragma once

#include "objprop/geometry.hpp"
#include "objprop/image.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace objprop {

/// Plane n.x + b = 0 with |n| = 1.
struct Plane
{
    Vec3 normal = Vec3::UnitY();
    double offset = 0.0;

    double signed_distance(const Vec3& x) const { return normal.dot(x) + offset; }
    bool is_inlier(const Vec3& x, double eps) const { return std::abs(signed_distance(x)) < eps; }

    /// Same plane with the sign chosen so the normal points up (n.y > 0);
    /// for vertical planes the first non-zero component is made positive.
    Plane canonical() const;
};

/// Plane through three points, nullopt when they are (numerically) collinear.
std::optional<Plane> fit_plane_3pts(const Vec3& a, const Vec3& b, const Vec3& c);

/// Total least squares plane (smallest principal axis). nullopt for fewer than
/// three points or a degenerate spread.
std::optional<Plane> fit_plane_least_squares(std::span<const Vec3> points);

std::vector<std::size_t> plane_inliers(const Plane& plane, std::span<const Vec3> points, double eps);

/// Angle between the planes' normals in degrees, ignoring orientation.
double plane_angle_deg(const Plane& a, const Plane& b);

/// Two planes are distinct when their normals differ by more than
/// `angle_deg` or their offsets by more than `offset` (after aligning signs).
bool planes_distinct(const Plane& a, const Plane& b, double angle_deg, double offset);

struct RansacParams
{
    int iterations = 10000;
    double eps_p = 0.005;
    int top_k = 5;
    int window = 11;            // sample triples come from one window x window patch
    int score_stride = 2;       // hypotheses are scored on every stride-th pixel
    int refine_iterations = 3;  // least-squares polishing, kept while the truncated squared distance drops
    double distinct_angle_deg = 10.0;
    double distinct_offset = 0.05;
    int threads = 1;
};

struct PlaneCandidate
{
    Plane plane;
    std::vector<std::size_t> inliers;  // linear pixel indices
    double heat = 0.0;                 // sum of the heatmap over inliers
};

/// Heatmap-aware RANSAC: returns up to top_k pairwise distinct planes ordered
/// by decreasing inlier count, each with its full-resolution inlier set and
/// accumulated heat. At most max(50, 10 * top_k) hypotheses are refined.
/// Deterministic for a given seed and independent of the
/// thread count. Empty if the frame has fewer than three valid pixels.
std::vector<PlaneCandidate> ransac_top_planes(const PointImage& frame,
                                              const Heatmap2D& heat,
                                              const RansacParams& params,
                                              std::uint64_t seed);

/// Index of the candidate with the most heat; ties go to more inliers, then
/// to the lower index. nullopt for an empty list.
std::optional<std::size_t> select_support_plane(std::span<const PlaneCandidate> candidates);

/// Zeroes the heat of every pixel whose point is an inlier of `plane`.
Heatmap2D suppress_plane(const Heatmap2D& heat, const Plane& plane, const PointImage& frame, double eps_p);

struct PlaneTrackEntry
{
    int frame = 0;
    Plane plane;
    double heat = 0.0;
    long inlier_count = 0;
};

/// Keeps the supporting plane across frames. Planes are stored in world
/// coordinates, so between keyframes the stored plane applies to the current
/// view through the frame's world points.
class PlaneTracker
{
public:
    PlaneTracker() = default;
    PlaneTracker(RansacParams params, int keyframe_interval, std::uint64_t seed);

    bool is_keyframe(int frame_index) const;

    /// Re-estimates the plane on keyframes (and on any frame while no plane is
    /// known yet) and returns the plane to suppress in this frame.
    std::optional<Plane> update(int frame_index, const PointImage& frame, const Heatmap2D& heat);

    const std::vector<PlaneTrackEntry>& entries() const { return entries_; }
    std::optional<Plane> current() const;

    // State restore for resumable runs.
    void restore(std::vector<PlaneTrackEntry> entries) { entries_ = std::move(entries); }

private:
    RansacParams params_;
    int interval_ = 10;
    std::uint64_t seed_ = 0;
    std::vector<PlaneTrackEntry> entries_;
};

}  // namespace objprop
