#include "objprop/proposals2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace objprop {

namespace {

bool valid_depth(float z) { return z > 0.0f && std::isfinite(z); }

ProposalDepthStats finish_stats(double z_min, double z_max, long count)
{
    ProposalDepthStats stats;
    stats.valid_count = count;
    if (count == 0)
        return stats;
    stats.z_min = z_min;
    stats.z_max = z_max;
    stats.z_mu = 0.5 * (z_min + z_max);
    stats.delta_z = z_max - z_min;
    return stats;
}

double percentile(std::vector<float>& values, double q)
{
    const auto k = static_cast<std::size_t>(std::lround(q * static_cast<double>(values.size() - 1)));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

void accumulate_rectangle(Image<double>& diff, const Proposal2D& p)
{
    diff(p.x, p.y) += p.confidence;
    diff(p.x + p.w, p.y) -= p.confidence;
    diff(p.x, p.y + p.h) -= p.confidence;
    diff(p.x + p.w, p.y + p.h) += p.confidence;
}

// In-place 2D prefix sum of a (W+1)x(H+1) difference image, cropped to WxH.
Heatmap2D integrate(const Image<double>& diff, int width, int height)
{
    Heatmap2D out(width, height, 0.0);
    std::vector<double> column(static_cast<std::size_t>(width), 0.0);
    for (int v = 0; v < height; ++v) {
        double row = 0.0;
        for (int u = 0; u < width; ++u) {
            row += diff(u, v);
            column[u] += row;
            out(u, v) = column[u];
        }
    }
    return out;
}

}  // namespace

std::optional<Proposal2D> clip_to_image(const Proposal2D& p, int width, int height)
{
    const long x0 = std::max<long>(p.x, 0);
    const long y0 = std::max<long>(p.y, 0);
    const long x1 = std::min<long>(static_cast<long>(p.x) + p.w, width);
    const long y1 = std::min<long>(static_cast<long>(p.y) + p.h, height);
    if (p.w <= 0 || p.h <= 0 || x1 <= x0 || y1 <= y0)
        return std::nullopt;
    return Proposal2D{static_cast<int>(x0), static_cast<int>(y0), static_cast<int>(x1 - x0),
                      static_cast<int>(y1 - y0), p.confidence};
}

Heatmap2D baseline_heatmap(std::span<const Proposal2D> proposals, int width, int height)
{
    Image<double> diff(width + 1, height + 1, 0.0);
    for (const auto& raw : proposals) {
        if (const auto p = clip_to_image(raw, width, height))
            accumulate_rectangle(diff, *p);
    }
    Heatmap2D out = integrate(diff, width, height);
    // Cancellation in the prefix sum can leave residues like -1e-17.
    for (auto& value : out.pixels())
        value = std::max(value, 0.0);
    return out;
}

ProposalDepthStats depth_stats(const Proposal2D& raw,
                               const DepthImage& depth,
                               const std::optional<PercentileClamp>& clamp)
{
    const auto clipped = clip_to_image(raw, depth.width(), depth.height());
    if (!clipped)
        return {};
    const Proposal2D& p = *clipped;

    if (clamp) {
        std::vector<float> values;
        values.reserve(static_cast<std::size_t>(p.w) * p.h);
        for (int v = p.y; v < p.y + p.h; ++v)
            for (int u = p.x; u < p.x + p.w; ++u)
                if (valid_depth(depth(u, v)))
                    values.push_back(depth(u, v));
        if (values.empty())
            return {};
        const long count = static_cast<long>(values.size());
        const double lo = percentile(values, clamp->low);
        const double hi = percentile(values, clamp->high);
        return finish_stats(lo, hi, count);
    }

    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    long count = 0;
    for (int v = p.y; v < p.y + p.h; ++v) {
        for (int u = p.x; u < p.x + p.w; ++u) {
            const float z = depth(u, v);
            if (!valid_depth(z))
                continue;
            z_min = std::min<double>(z_min, z);
            z_max = std::max<double>(z_max, z);
            ++count;
        }
    }
    return finish_stats(z_min, z_max, count);
}

Image<unsigned char> soft_filter(const Proposal2D& raw,
                                 const DepthImage& depth,
                                 const ProposalDepthStats& stats,
                                 double eps_delta)
{
    const auto clipped = clip_to_image(raw, depth.width(), depth.height());
    if (!clipped)
        return {};
    const Proposal2D& p = *clipped;
    Image<unsigned char> mask(p.w, p.h, 1);
    if (!(stats.delta_z > eps_delta))
        return mask;
    for (int v = 0; v < p.h; ++v) {
        for (int u = 0; u < p.w; ++u) {
            const float z = depth(p.x + u, p.y + v);
            if (valid_depth(z) && is_background(z, stats, eps_delta))
                mask(u, v) = 0;
        }
    }
    return mask;
}

ProposalDepthStats foreground_stats(const Proposal2D& raw,
                                    const DepthImage& depth,
                                    const ProposalDepthStats& window_stats,
                                    double eps_delta)
{
    if (!(window_stats.delta_z > eps_delta))
        return window_stats;
    const auto clipped = clip_to_image(raw, depth.width(), depth.height());
    if (!clipped)
        return {};
    const Proposal2D& p = *clipped;
    double z_min = std::numeric_limits<double>::infinity();
    double z_max = -std::numeric_limits<double>::infinity();
    long count = 0;
    for (int v = p.y; v < p.y + p.h; ++v) {
        for (int u = p.x; u < p.x + p.w; ++u) {
            const float z = depth(u, v);
            if (!valid_depth(z) || is_background(z, window_stats, eps_delta))
                continue;
            z_min = std::min<double>(z_min, z);
            z_max = std::max<double>(z_max, z);
            ++count;
        }
    }
    return finish_stats(z_min, z_max, count);
}

bool hard_filter(const Proposal2D& proposal,
                 const ProposalDepthStats& foreground,
                 const Intrinsics& K,
                 double eps_min,
                 double eps_max)
{
    if (foreground.valid_count == 0)
        return false;
    const double extent_x = proposal.w * foreground.z_mu / K.fx;
    const double extent_y = proposal.h * foreground.z_mu / K.fy;
    if (extent_x < eps_min && extent_y < eps_min)
        return false;
    if (extent_x > eps_max && extent_y > eps_max)
        return false;
    return true;
}

Heatmap2D weighted_heatmap(std::span<const Proposal2D> proposals,
                           const DepthImage& depth,
                           const Intrinsics& K,
                           const FilterParams& params,
                           FilterSummary* summary)
{
    const int width = depth.width();
    const int height = depth.height();
    Image<double> diff(width + 1, height + 1, 0.0);
    Heatmap2D direct(width, height, 0.0);
    FilterSummary counts;

    for (const auto& raw : proposals) {
        ++counts.total;
        const auto clipped = clip_to_image(raw, width, height);
        if (!clipped) {
            ++counts.outside_image;
            continue;
        }
        const Proposal2D& p = *clipped;
        const ProposalDepthStats window = depth_stats(p, depth, params.clamp);
        const ProposalDepthStats foreground = foreground_stats(p, depth, window, params.eps_delta);
        if (!hard_filter(p, foreground, K, params.eps_min, params.eps_max)) {
            ++counts.rejected;
            continue;
        }
        if (!(window.delta_z > params.eps_delta)) {
            ++counts.fully_accepted;
            accumulate_rectangle(diff, p);
            continue;
        }
        ++counts.masked;
        for (int v = p.y; v < p.y + p.h; ++v) {
            for (int u = p.x; u < p.x + p.w; ++u) {
                const float z = depth(u, v);
                if (valid_depth(z) && is_background(z, window, params.eps_delta))
                    continue;
                direct(u, v) += p.confidence;
            }
        }
    }

    Heatmap2D out = integrate(diff, width, height);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::max(out[i] + direct[i], 0.0);
    if (summary)
        *summary = counts;
    return out;
}

double proposal_iou(const Proposal2D& a, const Proposal2D& b)
{
    const long ix = std::max(0L, std::min<long>(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const long iy = std::max(0L, std::min<long>(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = static_cast<double>(ix) * static_cast<double>(iy);
    const double uni = static_cast<double>(a.w) * a.h + static_cast<double>(b.w) * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Proposal2D> nms_debug(std::span<const Proposal2D> proposals, double overlap)
{
    std::vector<std::size_t> order(proposals.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return proposals[a].confidence > proposals[b].confidence;
    });
    std::vector<Proposal2D> kept;
    for (std::size_t i : order) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Proposal2D& k) {
            return proposal_iou(k, proposals[i]) > overlap;
        });
        if (!suppressed)
            kept.push_back(proposals[i]);
    }
    return kept;
}

}  // namespace objprop
