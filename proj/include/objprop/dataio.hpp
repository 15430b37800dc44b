#pragma once

#include "objprop/geometry.hpp"
#include "objprop/metrics.hpp"
#include "objprop/png_io.hpp"
#include "objprop/proposals2d.hpp"
#include "objprop/proposals3d.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace objprop {

/// Input data errors (malformed files, schema violations). I/O failures are
/// reported as std::runtime_error.
class ParseError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct CameraFile
{
    Intrinsics intrinsics;
    double depth_scale = 5000.0;  // stored depth units per meter
};

/// Key/value text file with fx, fy, cx, cy, width, height and depth_scale.
CameraFile read_camera_file(const std::filesystem::path& path);
void write_camera_file(const std::filesystem::path& path, const CameraFile& camera);

struct StampedPose
{
    double timestamp = 0.0;
    Pose pose;  // world-to-camera
};

/// Trajectory file, one "timestamp tx ty tz qx qy qz qw" line per pose
/// (camera-to-world, '#' comments allowed). Quaternions are normalized.
std::vector<StampedPose> read_trajectory(const std::filesystem::path& path);
void write_trajectory(const std::filesystem::path& path, std::span<const StampedPose> poses);

struct FrameEntry
{
    double timestamp = 0.0;
    std::string color;  // relative to the manifest directory
    std::string depth;
};

struct GroundTruthPaths
{
    std::string boxes;       // ground-truth boxes JSON
    std::string points;      // labeled point cloud PLY
    std::string boxes2d_dir; // per-frame 2D boxes CSV (label,x,y,w,h)
};

struct SequenceManifest
{
    std::filesystem::path root;  // directory of the manifest file
    std::string camera = "camera.txt";
    std::string trajectory = "trajectory.txt";
    std::string proposals_dir = "proposals";
    double pose_tolerance = 0.02;  // seconds
    std::vector<FrameEntry> frames;
    std::optional<GroundTruthPaths> ground_truth;

    std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
    std::filesystem::path proposals_path(int frame_index) const;
    std::filesystem::path boxes2d_path(int frame_index) const;
};

SequenceManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const SequenceManifest& manifest);

struct ProposalReadStats
{
    long rows = 0;
    long clipped = 0;
    long outside = 0;  // dropped, nothing left after clipping
};

/// Proposals CSV, columns x,y,w,h,c with an optional header row. Boxes are
/// clipped to the image; non-numeric rows and non-positive sizes are errors.
std::vector<Proposal2D> read_proposals(const std::filesystem::path& path,
                                       int width,
                                       int height,
                                       ProposalReadStats* stats = nullptr);
std::vector<Proposal2D> parse_proposals(std::istream& in,
                                        const std::string& source,
                                        int width,
                                        int height,
                                        ProposalReadStats* stats = nullptr);
void write_proposals(const std::filesystem::path& path, std::span<const Proposal2D> proposals);

struct FrameRecord
{
    int index = 0;
    double timestamp = 0.0;
    ColorImage color;
    DepthImage depth;  // meters, 0 = missing
    Pose pose;
    std::vector<Proposal2D> proposals;
};

/// Streams the frames of a sequence in timestamp order. Frames whose nearest
/// pose is farther than the manifest tolerance are skipped with a warning.
class SequenceReader
{
public:
    explicit SequenceReader(const std::filesystem::path& manifest_path);
    explicit SequenceReader(SequenceManifest manifest);

    const SequenceManifest& manifest() const { return manifest_; }
    const CameraFile& camera() const { return camera_; }
    std::size_t frame_total() const { return manifest_.frames.size(); }

    /// Next frame, or nullopt at the end of the sequence.
    std::optional<FrameRecord> next();

    /// Makes next() continue at manifest index `index`.
    void seek(std::size_t index) { cursor_ = std::min(index, manifest_.frames.size()); }
    std::size_t position() const { return cursor_; }

    /// Loads one frame by manifest index; throws if its pose is missing.
    FrameRecord load(int index) const;

    /// Pose of a manifest frame, nullopt when no pose is within tolerance.
    std::optional<Pose> frame_pose(int index) const;

    int skipped() const { return skipped_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    long clipped_proposals() const { return clipped_; }

private:
    std::optional<Pose> pose_at(double timestamp) const;

    SequenceManifest manifest_;
    CameraFile camera_;
    std::vector<StampedPose> trajectory_;
    std::size_t cursor_ = 0;
    int skipped_ = 0;
    mutable long clipped_ = 0;
    std::vector<std::string> warnings_;
};

DepthImage depth_from_raw(const Image<std::uint16_t>& raw, double depth_scale);
Image<std::uint16_t> depth_to_raw(const DepthImage& depth, double depth_scale);
ColorImage color_from_rgb8(const Image<Rgb8>& rgb);
Image<Rgb8> color_to_rgb8(const ColorImage& color);

/// Boxes JSON: an array of objects with "rotation" (row-major 3x3), "min",
/// "max", "corners" (8 world points) and "cluster_size".
std::string boxes_to_json(std::span<const Box3D> boxes);
std::vector<Box3D> boxes_from_json(const std::string& text);
void write_boxes(const std::filesystem::path& path, std::span<const Box3D> boxes);
std::vector<Box3D> read_boxes(const std::filesystem::path& path);

struct GroundTruthBox
{
    int label = 0;
    Box3D box;
};
void write_ground_truth_boxes(const std::filesystem::path& path, std::span<const GroundTruthBox> boxes);
std::vector<GroundTruthBox> read_ground_truth_boxes(const std::filesystem::path& path);

struct LabeledBox2D
{
    int label = 0;
    EvalBox2D box;
};
void write_boxes2d(const std::filesystem::path& path, std::span<const LabeledBox2D> boxes);
std::vector<LabeledBox2D> read_boxes2d(const std::filesystem::path& path);

/// Point cloud with optional extra per-vertex properties.
struct PlyCloud
{
    std::vector<Vec3> positions;
    std::vector<Rgb8> colors;  // empty or one per point
    std::vector<std::pair<std::string, std::vector<int>>> int_properties;
    std::vector<std::pair<std::string, std::vector<float>>> float_properties;

    const std::vector<int>* int_property(const std::string& name) const;
    const std::vector<float>* float_property(const std::string& name) const;
};

/// Binary little-endian PLY: float x,y,z, uchar red,green,blue, then extras.
void write_ply(const std::filesystem::path& path, const PlyCloud& cloud);
PlyCloud read_ply(const std::filesystem::path& path);

/// Heat colormap: 0 maps to dark blue, 1 to the hottest red.
Rgb8 heat_color(double t);
Rgb8 label_color(int label);

std::vector<LabeledPoint> labeled_points_from_ply(const PlyCloud& cloud);

}  // namespace objprop
