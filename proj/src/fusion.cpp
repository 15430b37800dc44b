#include "objprop/fusion.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace objprop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool valid_depth(float z) { return z > 0.0f && std::isfinite(z); }

Vec3 pixel_to_world(const Intrinsics& K, const Pose& pose, int u, int v, double z)
{
    return pose.to_world(Vec3(z / K.fx * (u - K.cx), z / K.fy * (v - K.cy), z));
}

}  // namespace

IndexMap init_global(GlobalHeatmap3D& global, const Intrinsics& K, const FrameData& frame, const Heatmap2D& heat)
{
    global = GlobalHeatmap3D{};
    IndexMap map(frame.depth.width(), frame.depth.height(), kNoPoint);
    for (int v = 0; v < frame.depth.height(); ++v) {
        for (int u = 0; u < frame.depth.width(); ++u) {
            const float z = frame.depth(u, v);
            if (!valid_depth(z))
                continue;
            map(u, v) = static_cast<std::int32_t>(global.points.size());
            global.points.push_back({pixel_to_world(K, frame.pose, u, v, z), frame.color(u, v), heat(u, v), 1});
        }
    }
    global.frame_count = 1;
    return map;
}

Image<std::int32_t> warp_match(const Intrinsics& K,
                               const FrameData& previous,
                               const FrameData& current,
                               const MatchParams& params)
{
    const int width = current.depth.width();
    const int height = current.depth.height();
    Image<std::int32_t> match(width, height, -1);
    Image<double> best_depth(width, height, std::numeric_limits<double>::infinity());

    const double eps_i2 = params.eps_intensity * params.eps_intensity;
    for (int v = 0; v < previous.depth.height(); ++v) {
        for (int u = 0; u < previous.depth.width(); ++u) {
            const float z = previous.depth(u, v);
            if (!valid_depth(z))
                continue;
            const auto warped = warp_pixel(K, previous.pose, current.pose, Vec2(u, v), z);
            if (!warped)
                continue;
            const float z_cur = current.depth(warped->u, warped->v);
            if (!valid_depth(z_cur) || std::abs(z_cur - warped->depth) > params.eps_depth)
                continue;
            const Color diff = current.color(warped->u, warped->v) - previous.color(u, v);
            if (static_cast<double>(diff.squaredNorm()) > eps_i2)
                continue;
            // Row-major traversal: on equal depth the earlier (lower index) pixel stays.
            double& best = best_depth(warped->u, warped->v);
            if (warped->depth < best) {
                best = warped->depth;
                match(warped->u, warped->v) = static_cast<std::int32_t>(previous.depth.index(u, v));
            }
        }
    }
    return match;
}

IndexMap register_frame(GlobalHeatmap3D& global,
                        const Intrinsics& K,
                        const FrameData& previous,
                        const IndexMap& previous_map,
                        const FrameData& current,
                        const Heatmap2D& heat,
                        const MatchParams& params,
                        RegisterTiming* timing)
{
    auto start = Clock::now();
    const Image<std::int32_t> match = warp_match(K, previous, current, params);
    RegisterTiming t;
    t.match_seconds = seconds_since(start);

    // Pass 1: confidence and frequency. New points get an index here and
    // their position in pass 2.
    start = Clock::now();
    const int width = current.depth.width();
    const int height = current.depth.height();
    IndexMap map(width, height, kNoPoint);
    std::vector<unsigned char> matched(map.size(), 0);
    for (std::size_t i = 0; i < map.size(); ++i) {
        if (!valid_depth(current.depth[i]))
            continue;
        const std::int32_t prev_pixel = match[i];
        const std::int32_t inherited = prev_pixel >= 0 ? previous_map[static_cast<std::size_t>(prev_pixel)] : kNoPoint;
        if (inherited != kNoPoint) {
            GlobalPoint& point = global.points[static_cast<std::size_t>(inherited)];
            point.confidence += heat[i];
            point.frequency += 1;
            map[i] = inherited;
            matched[i] = 1;
        } else {
            map[i] = static_cast<std::int32_t>(global.points.size());
            global.points.push_back({Vec3::Zero(), Color::Zero(), heat[i], 1});
        }
    }
    t.confidence_frequency_seconds = seconds_since(start);

    // Pass 2: location and color.
    start = Clock::now();
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            const std::size_t i = map.index(u, v);
            if (map[i] == kNoPoint)
                continue;
            GlobalPoint& point = global.points[static_cast<std::size_t>(map[i])];
            const Vec3 observed = pixel_to_world(K, current.pose, u, v, current.depth[i]);
            const Color& color = current.color[i];
            if (matched[i]) {
                const double f = point.frequency;
                point.position = ((f - 1.0) * point.position + observed) / f;
                point.color = ((static_cast<float>(f) - 1.0f) * point.color + color) / static_cast<float>(f);
            } else {
                point.position = observed;
                point.color = color;
            }
        }
    }
    t.location_color_seconds = seconds_since(start);

    global.frame_count += 1;
    if (timing)
        *timing = t;
    return map;
}

}  // namespace objprop
