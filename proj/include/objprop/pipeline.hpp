#pragma once

#include "objprop/config.hpp"
#include "objprop/dataio.hpp"
#include "objprop/fusion.hpp"
#include "objprop/plane.hpp"
#include "objprop/proposals2d.hpp"
#include "objprop/proposals3d.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace objprop {

/// Wall time of the per-frame stages, in seconds.
struct FrameTiming
{
    int frame = 0;
    long proposals = 0;
    long accepted = 0;
    bool keyframe = false;
    double proposal_filtering = 0.0;
    double plane_removal = 0.0;
    double fusion_match = 0.0;
    double fusion_confidence_frequency = 0.0;
    double fusion_location_color = 0.0;
    double total = 0.0;
};

std::string timing_csv_header();
std::string timing_csv_row(const FrameTiming& timing);

/// Intermediate images of one frame, at the working resolution.
struct FrameDebug
{
    Heatmap2D baseline;    // plain confidence sum
    Heatmap2D weighted;    // after soft and hard filtering
    Heatmap2D suppressed;  // weighted, supporting plane zeroed
    std::optional<Plane> plane;
    FilterSummary summary;
    std::vector<Proposal2D> proposals;
    ColorImage color;
};

struct PipelineResult
{
    int frames = 0;
    std::vector<std::size_t> candidates;  // passed the frequency floor
    std::vector<RankedPoint> ranked;
    PlaneRemovalResult removal;
    std::vector<Vec3> cluster_points;  // positions of removal.kept
    DbscanResult clusters;
    Vec3 support_normal = kWorldUp;
    std::vector<ClusterBox> boxes;  // merged and volume filtered

    std::vector<Box3D> box_list() const;
};

/// Frames are downsampled to the working resolution: nearest neighbor for
/// depth, block average for color, proposal boxes scaled to cover the same
/// area.
FrameRecord downsample_frame(const FrameRecord& frame, int factor);

/// Online driver. Each processed frame updates the global heatmap using only
/// the frames seen so far; finalize() can run at any point.
class Pipeline
{
public:
    /// `intrinsics` are those of the input frames (before downsampling).
    Pipeline(PipelineConfig config, const Intrinsics& intrinsics);

    FrameTiming process(const FrameRecord& frame, FrameDebug* debug = nullptr);

    PipelineResult finalize() const;

    const PipelineConfig& config() const { return config_; }
    const Intrinsics& working_intrinsics() const { return K_; }
    int frames_processed() const { return frames_; }
    const GlobalHeatmap3D& global() const { return global_; }
    const PlaneTracker& tracker() const { return tracker_; }

    /// Serialized state after the last processed frame. `cursor` is stored
    /// verbatim so a driver can resume reading where it stopped.
    std::string save_state(std::uint64_t cursor = 0) const;
    /// Restores a state written by save_state with the same configuration and
    /// intrinsics. Returns the stored cursor.
    std::uint64_t load_state(const std::string& bytes);

private:
    PipelineConfig config_;
    Intrinsics input_K_;
    Intrinsics K_;
    PlaneTracker tracker_;
    GlobalHeatmap3D global_;
    FrameData previous_;
    IndexMap previous_map_;
    int frames_ = 0;
};

}  // namespace objprop
