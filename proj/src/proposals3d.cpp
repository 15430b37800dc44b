#include "objprop/proposals3d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

namespace objprop {

int frequency_floor(int total_frames, int count, double fraction)
{
    const int by_fraction = static_cast<int>(std::ceil(fraction * std::max(total_frames, 0) - 1e-12));
    return std::max(1, std::min(count, by_fraction));
}

std::vector<std::size_t> frequency_filter(const GlobalHeatmap3D& global, int total_frames, int count, double fraction)
{
    const int floor = frequency_floor(total_frames, count, fraction);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < global.points.size(); ++i)
        if (global.points[i].frequency >= floor)
            out.push_back(i);
    return out;
}

std::vector<RankedPoint> rank_points(const GlobalHeatmap3D& global,
                                     std::span<const std::size_t> candidates,
                                     double tau,
                                     double eps)
{
    std::vector<RankedPoint> out;
    for (std::size_t i : candidates) {
        const auto& p = global.points[i];
        const double score = pseudo_average_confidence(p.confidence, p.frequency, tau);
        if (score >= eps)
            out.push_back({i, score});
    }
    return out;
}

namespace {

Plane mean_plane(std::span<const PlaneTrackEntry> track, const std::vector<std::size_t>& members)
{
    Eigen::Vector4d sum = Eigen::Vector4d::Zero();
    for (std::size_t m : members) {
        const Plane p = track[m].plane.canonical();
        sum += Eigen::Vector4d(p.normal.x(), p.normal.y(), p.normal.z(), p.offset);
    }
    const double norm = sum.head<3>().norm();
    return Plane{sum.head<3>() / norm, sum(3) / norm};
}

}  // namespace

std::vector<PlaneGroup> group_planes(std::span<const PlaneTrackEntry> track, double angle_deg, double offset)
{
    std::vector<PlaneGroup> groups;
    for (std::size_t i = 0; i < track.size(); ++i) {
        const Plane plane = track[i].plane.canonical();
        auto it = std::find_if(groups.begin(), groups.end(), [&](const PlaneGroup& g) {
            return !planes_distinct(g.representative, plane, angle_deg, offset);
        });
        if (it == groups.end()) {
            groups.push_back({plane, {i}, track[i].heat});
            continue;
        }
        it->members.push_back(i);
        it->heat += track[i].heat;
        it->representative = mean_plane(track, it->members);
    }
    return groups;
}

PlaneRemovalResult final_plane_removal(const GlobalHeatmap3D& global,
                                       std::span<const RankedPoint> ranked,
                                       std::span<const PlaneTrackEntry> track,
                                       double eps_p,
                                       double group_angle_deg,
                                       double group_offset)
{
    PlaneRemovalResult result;
    if (track.empty()) {
        result.status = PlaneRemovalStatus::EmptyTrack;
        result.kept.assign(ranked.begin(), ranked.end());
        return result;
    }
    result.groups = group_planes(track, group_angle_deg, group_offset);
    const auto hottest = std::max_element(result.groups.begin(), result.groups.end(),
                                          [](const PlaneGroup& a, const PlaneGroup& b) { return a.heat < b.heat; });
    result.support = hottest->representative;
    for (const RankedPoint& r : ranked) {
        if (result.support->is_inlier(global.points[r.index].position, eps_p))
            ++result.removed;
        else
            result.kept.push_back(r);
    }
    return result;
}

namespace {

struct CellKey
{
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellHash
{
    std::size_t operator()(const CellKey& k) const
    {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B185EBCA87ULL;
        h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

class Grid
{
public:
    Grid(std::span<const Vec3> points, double cell) : points_(points), inv_(1.0 / cell)
    {
        for (std::size_t i = 0; i < points.size(); ++i)
            cells_[key(points[i])].push_back(i);
    }

    void neighbors(std::size_t i, double eps, std::vector<std::size_t>& out) const
    {
        out.clear();
        const Vec3& p = points_[i];
        const CellKey c = key(p);
        const double eps2 = eps * eps;
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == cells_.end())
                        continue;
                    for (std::size_t j : it->second)
                        if ((points_[j] - p).squaredNorm() <= eps2)
                            out.push_back(j);
                }
    }

private:
    CellKey key(const Vec3& p) const
    {
        return {static_cast<std::int64_t>(std::floor(p.x() * inv_)), static_cast<std::int64_t>(std::floor(p.y() * inv_)),
                static_cast<std::int64_t>(std::floor(p.z() * inv_))};
    }

    std::span<const Vec3> points_;
    double inv_;
    std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

constexpr int kUnvisited = -2;

}  // namespace

DbscanResult dbscan(std::span<const Vec3> points, double eps, int min_pts)
{
    DbscanResult result;
    result.labels.assign(points.size(), kUnvisited);
    if (points.empty())
        return result;
    const Grid grid(points, eps);
    std::vector<std::size_t> nbrs;
    std::vector<std::size_t> seeds;
    int cluster = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (result.labels[i] != kUnvisited)
            continue;
        grid.neighbors(i, eps, nbrs);
        if (static_cast<int>(nbrs.size()) < min_pts) {
            result.labels[i] = kNoise;
            continue;
        }
        result.labels[i] = cluster;
        seeds.assign(nbrs.begin(), nbrs.end());
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const std::size_t j = seeds[s];
            if (result.labels[j] == kNoise)
                result.labels[j] = cluster;  // border point
            if (result.labels[j] != kUnvisited)
                continue;
            result.labels[j] = cluster;
            grid.neighbors(j, eps, nbrs);
            if (static_cast<int>(nbrs.size()) < min_pts)
                continue;
            for (std::size_t k : nbrs)
                if (result.labels[k] == kUnvisited || result.labels[k] == kNoise)
                    seeds.push_back(k);
        }
        ++cluster;
    }
    result.cluster_count = cluster;
    return result;
}

double Box3D::volume() const
{
    const Vec3 e = extent();
    return e.x() * e.y() * e.z();
}

std::array<Vec3, 8> Box3D::world_corners() const
{
    std::array<Vec3, 8> out;
    const Mat3 back = rotation.transpose();
    for (int i = 0; i < 8; ++i) {
        const Vec3 g((i & 1) ? max.x() : min.x(), (i & 2) ? max.y() : min.y(), (i & 4) ? max.z() : min.z());
        out[static_cast<std::size_t>(i)] = back * g;
    }
    return out;
}

bool Box3D::contains(const Vec3& world, double tolerance) const
{
    const Vec3 g = rotation * world;
    return (g.array() >= min.array() - tolerance).all() && (g.array() <= max.array() + tolerance).all();
}

Box3D fit_box_rotated(std::span<const Vec3> points, const Mat3& rotation)
{
    Box3D box;
    box.rotation = rotation;
    box.cluster_size = static_cast<long>(points.size());
    if (points.empty())
        return box;
    box.min = Vec3::Constant(std::numeric_limits<double>::infinity());
    box.max = -box.min;
    for (const Vec3& p : points) {
        const Vec3 g = rotation * p;
        box.min = box.min.cwiseMin(g);
        box.max = box.max.cwiseMax(g);
    }
    return box;
}

Box3D fit_box(std::span<const Vec3> points, const Vec3& support_normal)
{
    return fit_box_rotated(points, rotation_to_gravity(support_normal.normalized()));
}

double overlap_volume(const Box3D& a, const Box3D& b)
{
    Vec3 bmin = b.min;
    Vec3 bmax = b.max;
    if (!a.rotation.isApprox(b.rotation, 1e-12)) {
        bmin = Vec3::Constant(std::numeric_limits<double>::infinity());
        bmax = -bmin;
        for (const Vec3& c : b.world_corners()) {
            const Vec3 g = a.rotation * c;
            bmin = bmin.cwiseMin(g);
            bmax = bmax.cwiseMax(g);
        }
    }
    const Vec3 lo = a.min.cwiseMax(bmin);
    const Vec3 hi = a.max.cwiseMin(bmax);
    const Vec3 d = (hi - lo).cwiseMax(0.0);
    return d.x() * d.y() * d.z();
}

std::vector<ClusterBox> merge_boxes(std::vector<ClusterBox> boxes)
{
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < boxes.size() && !merged; ++j) {
                if (!(overlap_volume(boxes[i].box, boxes[j].box) > 0.0))
                    continue;
                auto& into = boxes[i].points;
                into.insert(into.end(), boxes[j].points.begin(), boxes[j].points.end());
                boxes[i].box = fit_box_rotated(into, boxes[i].box.rotation);
                boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                merged = true;
            }
        }
    }
    return boxes;
}

std::vector<ClusterBox> volume_filter(std::vector<ClusterBox> boxes, double min_volume)
{
    std::erase_if(boxes, [&](const ClusterBox& b) { return !(b.box.volume() >= min_volume); });
    return boxes;
}

}  // namespace objprop
