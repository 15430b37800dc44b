#pragma once

#include "objprop/geometry.hpp"
#include "objprop/image.hpp"

#include <cstdint>
#include <vector>

namespace objprop {

/// One fused point of the global heatmap: position, color, accumulated
/// confidence and the number of frames it was observed in.
struct GlobalPoint
{
    Vec3 position = Vec3::Zero();
    Color color = Color::Zero();
    double confidence = 0.0;
    int frequency = 1;
};

struct GlobalHeatmap3D
{
    std::vector<GlobalPoint> points;  // indices are stable for the whole run
    int frame_count = 0;
};

/// Per-pixel index into GlobalHeatmap3D::points, kNoPoint where the pixel has
/// no point (missing depth).
using IndexMap = Image<std::int32_t>;
inline constexpr std::int32_t kNoPoint = -1;

/// Depth, color and pose of one registered frame.
struct FrameData
{
    DepthImage depth;
    ColorImage color;
    Pose pose;
};

struct MatchParams
{
    double eps_intensity = 0.05;
    double eps_depth = 0.01;
};

/// Creates the global heatmap from the first frame: one point per valid depth
/// pixel with frequency 1 and the pixel's heat as confidence.
IndexMap init_global(GlobalHeatmap3D& global, const Intrinsics& K, const FrameData& frame, const Heatmap2D& heat);

/// Warps every valid previous pixel into the current frame and returns, per
/// current pixel, the linear index of the matched previous pixel (or -1).
/// A match needs color distance <= eps_intensity and depth difference
/// <= eps_depth; of several matches the one with the smallest warped depth
/// wins (ties: lowest previous index).
Image<std::int32_t> warp_match(const Intrinsics& K,
                               const FrameData& previous,
                               const FrameData& current,
                               const MatchParams& params);

struct RegisterTiming
{
    double match_seconds = 0.0;
    double confidence_frequency_seconds = 0.0;
    double location_color_seconds = 0.0;
};

/// Fuses the current frame into the global heatmap and returns its index map.
/// Matched pixels add their heat and one observation to the inherited point
/// and pull its position and color toward the new observation with a
/// frequency-weighted running mean; unmatched valid pixels become new points.
IndexMap register_frame(GlobalHeatmap3D& global,
                        const Intrinsics& K,
                        const FrameData& previous,
                        const IndexMap& previous_map,
                        const FrameData& current,
                        const Heatmap2D& heat,
                        const MatchParams& params,
                        RegisterTiming* timing = nullptr);

}  // namespace objprop
