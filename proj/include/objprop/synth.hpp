#pragma once

#include "objprop/dataio.hpp"
#include "objprop/geometry.hpp"
#include "objprop/image.hpp"
#include "objprop/metrics.hpp"
#include "objprop/proposals2d.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace objprop {

// Pixel labels of rendered frames. Objects are numbered from 1.
inline constexpr int kEmptyLabel = 0;
inline constexpr int kFloorLabel = -1;
inline constexpr int kTableLabel = -2;

struct SynthObject
{
    enum class Shape
    {
        Box,
        Sphere,
    };

    Shape shape = Shape::Box;
    double x = 0.0;  // position on the table top (world x, z)
    double z = 0.0;
    Vec3 size{0.1, 0.1, 0.1};  // box extents along world x, y, z
    double radius = 0.05;      // sphere
    int color_id = 0;
};

struct SceneSpec
{
    std::uint64_t seed = 1;
    Intrinsics intrinsics{262.5, 262.5, 159.5, 119.5, 320, 240};
    double depth_scale = 5000.0;

    // World is y-up; the floor is the plane y = floor_height, limited to a
    // square of half-size floor_extent around the table.
    double floor_height = 0.0;
    double floor_extent = 3.0;

    double table_x = 0.0;
    double table_z = 0.0;
    double table_width = 1.2;  // along x
    double table_depth = 0.8;  // along z
    double table_height = 0.75;
    double table_thickness = 0.04;

    std::vector<SynthObject> objects;

    // "orbit" circles the table center; "pan" stands still and tilts from
    // the floor in front of the camera up to the table.
    std::string trajectory = "orbit";
    int frame_count = 60;
    double fps = 30.0;
    double orbit_radius = 1.0;
    double camera_height = 1.35;
    double start_deg = 0.0;
    double span_deg = 270.0;
    double pan_floor_distance = 1.2;  // distance of the first floor target behind the camera-table axis
    double pan_fraction = 0.5;        // share of frames spent tilting up
    double pose_noise_deg = 0.0;
    double pose_noise_m = 0.0;

    double depth_sigma = 0.0015;
    double missing_probability = 0.01;
    double max_range = 8.0;

    // Proposal model. Object proposals are jittered copies of the visible
    // objects' boxes; distractors are uniform random boxes whose
    // confidences decay geometrically with their rank.
    double jitter_px = 2.0;
    int proposals_per_object = 5;
    int distractor_count = 50;
    int total_proposals = 0;  // when > 0, distractors fill up to this count
    double object_conf_min = 0.6;
    double object_conf_max = 1.0;
    double distractor_conf_max = 0.1;
    double distractor_conf_min = 0.005;
    int distractor_decay_count = 50;  // rank at which distractor_conf_min is reached
    double distractor_min_size = 0.05;  // fraction of the image side
    double distractor_max_size = 0.5;
    double distractor_max_iou = 1.0;  // distractors overlapping an object box more are resampled
    int min_visible_pixels = 50;

    double gt_point_spacing = 0.005;

    void validate() const;  // throws ConfigError
    double table_top() const { return table_height; }
};

/// Built-in scenes: "tabletop" (3 to 6 random objects, orbit) and "pan".
SceneSpec scene_preset(const std::string& name, std::uint64_t seed);

/// Places `count` random boxes and spheres on the table, at least
/// `separation` apart and away from the table edges.
std::vector<SynthObject> random_objects(const SceneSpec& spec, int count, std::uint64_t seed, double separation = 0.08);

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);
SceneSpec read_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const SceneSpec& spec);

/// Sets one field addressed by its JSON name; nested fields use dots
/// ("depth_sigma", "intrinsics.fx", "objects.0.x"). Values are parsed as JSON
/// and fall back to plain strings.
void set_scene_value(SceneSpec& spec, const std::string& key, const std::string& value);

/// World-to-camera pose of a camera at `eye` looking at `target`, image
/// rows pointing down in the world where possible.
Pose look_at(const Vec3& eye, const Vec3& target);

/// Exact world-to-camera pose of frame `index` (before pose noise).
Pose scene_pose(const SceneSpec& spec, int index);

struct RenderedView
{
    DepthImage depth;
    ColorImage color;
    LabelImage labels;
};

/// Ray-traces the scene from `pose`. Labels come from the noiseless hits;
/// depth noise and dropouts are drawn from `noise_seed` when enabled.
RenderedView render_view(const SceneSpec& spec, const Pose& pose, std::uint64_t noise_seed, bool with_noise = true);

Color object_color(int color_id);
inline const Color kFloorColor{0.55f, 0.55f, 0.50f};
inline const Color kTableColor{0.55f, 0.35f, 0.20f};

struct RenderedFrame
{
    FrameRecord record;  // proposals filled by emit_proposals
    LabelImage labels;
    Pose true_pose;  // pose used for rendering; record.pose may carry pose noise
};

RenderedFrame render_frame(const SceneSpec& spec, int index);

/// Tight half-open boxes of the objects with at least min_visible_pixels pixels.
std::vector<LabeledBox2D> visible_object_boxes(const LabelImage& labels, int min_visible_pixels);

/// Object proposals and distractors for one frame, sorted by decreasing
/// confidence. Deterministic in (spec.seed, frame index).
std::vector<Proposal2D> emit_proposals(const SceneSpec& spec, int index, std::span<const LabeledBox2D> objects);

struct SceneGroundTruth
{
    std::vector<GroundTruthBox> boxes;
    std::vector<LabeledPoint> points;
};

Box3D object_box(const SceneSpec& spec, const SynthObject& object);

/// Gravity-aligned object boxes and a labeled cloud sampled from the visible
/// surfaces (contact faces between objects and table are left out).
SceneGroundTruth emit_ground_truth(const SceneSpec& spec);

/// Writes a full sequence (manifest, images, trajectory, proposals, ground
/// truth) into `out_dir`. Returns the manifest path.
std::filesystem::path write_sequence(const SceneSpec& spec, const std::filesystem::path& out_dir);

}  // namespace objprop
