#pragma once

#include "objprop/geometry.hpp"
#include "objprop/image.hpp"

#include <optional>
#include <span>
#include <vector>

namespace objprop {

/// One 2D objectness proposal: top-left corner, size and confidence.
/// Covers the half-open pixel window [x, x + w) x [y, y + h).
struct Proposal2D
{
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
    double confidence = 0.0;

    bool operator==(const Proposal2D&) const = default;
};

/// Clips a proposal to the image. nullopt if nothing of it is left.
std::optional<Proposal2D> clip_to_image(const Proposal2D& proposal, int width, int height);

/// Sum of proposal confidences covering each pixel, via a 2D difference
/// image and one prefix-sum pass (constant work per proposal).
/// Proposals are clipped to the image first.
Heatmap2D baseline_heatmap(std::span<const Proposal2D> proposals, int width, int height);

struct ProposalDepthStats
{
    double z_min = 0.0;
    double z_max = 0.0;
    double z_mu = 0.0;
    double delta_z = 0.0;
    long valid_count = 0;
};

struct PercentileClamp
{
    double low = 0.01;
    double high = 0.99;
};

/// Depth range over the valid pixels of a (clipped) proposal window.
/// With a clamp, z_min/z_max are the given percentiles instead of the extremes.
ProposalDepthStats depth_stats(const Proposal2D& proposal,
                               const DepthImage& depth,
                               const std::optional<PercentileClamp>& clamp = std::nullopt);

/// Background test of a single pixel: deeper than the window midpoint while
/// the window spans more than eps_delta in depth.
inline bool is_background(double pixel_depth, const ProposalDepthStats& stats, double eps_delta)
{
    return pixel_depth > stats.z_mu && stats.delta_z > eps_delta;
}

/// Foreground mask over the proposal window (w x h, indexed from the
/// window's top-left). 1 keeps the pixel, 0 masks it as background.
/// Missing-depth pixels are kept.
Image<unsigned char> soft_filter(const Proposal2D& proposal,
                                 const DepthImage& depth,
                                 const ProposalDepthStats& stats,
                                 double eps_delta);

/// Depth statistics over the pixels that survive the soft filter.
ProposalDepthStats foreground_stats(const Proposal2D& proposal,
                                    const DepthImage& depth,
                                    const ProposalDepthStats& window_stats,
                                    double eps_delta);

/// Size-based accept/reject. Rejects when there is no depth, or when both
/// metric extents are below eps_min, or both are above eps_max.
bool hard_filter(const Proposal2D& proposal,
                 const ProposalDepthStats& foreground,
                 const Intrinsics& K,
                 double eps_min,
                 double eps_max);

struct FilterParams
{
    double eps_delta = 0.5;
    double eps_min = 0.02;
    double eps_max = 1.0;
    std::optional<PercentileClamp> clamp;
};

struct FilterSummary
{
    long total = 0;
    long rejected = 0;          // hard filter
    long masked = 0;            // accepted with background masking
    long fully_accepted = 0;    // accepted without masking
    long outside_image = 0;     // nothing left after clipping
};

/// Depth-weighted heatmap: like the baseline heatmap but every proposal is
/// gated by the hard filter and its window is masked by the soft filter.
Heatmap2D weighted_heatmap(std::span<const Proposal2D> proposals,
                           const DepthImage& depth,
                           const Intrinsics& K,
                           const FilterParams& params,
                           FilterSummary* summary = nullptr);

double proposal_iou(const Proposal2D& a, const Proposal2D& b);

/// Greedy NMS by descending confidence, for display only. Drops any proposal
/// whose IoU with an already kept one exceeds `overlap`.
std::vector<Proposal2D> nms_debug(std::span<const Proposal2D> proposals, double overlap = 0.10);

}  // namespace objprop
