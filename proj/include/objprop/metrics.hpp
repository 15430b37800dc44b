#pragma once

#include "objprop/geometry.hpp"
#include "objprop/proposals3d.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace objprop {

/// Half-open pixel box [x, x + w) x [y, y + h).
struct EvalBox2D
{
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const EvalBox2D&) const = default;
};

double iou2d(const EvalBox2D& a, const EvalBox2D& b);

/// Volume IoU of two gravity-frame boxes (see overlap_volume for boxes with
/// different rotations).
double iou3d(const Box3D& a, const Box3D& b);

/// Best-overlap tables of one scene: for every ground truth its best IoU
/// against the outputs, for every output its best IoU against the ground truths.
struct SceneOverlaps
{
    std::vector<double> per_ground_truth;
    std::vector<double> per_output;
};

SceneOverlaps scene_overlaps(std::span<const EvalBox2D> ground_truth, std::span<const EvalBox2D> outputs);
SceneOverlaps scene_overlaps(std::span<const Box3D> ground_truth, std::span<const Box3D> outputs);

struct RateResult
{
    double value = 0.0;
    int scenes_used = 0;
    int scenes_skipped = 0;  // scenes without ground truth (DR) or outputs (SR)
};

/// Fraction of ground truths with best IoU >= threshold, averaged over ground
/// truths within a scene, then over scenes.
RateResult detection_rate(std::span<const SceneOverlaps> scenes, double threshold = 0.5);

/// Fraction of outputs whose best IoU against any ground truth is >= threshold,
/// averaged over outputs within a scene, then over scenes.
RateResult success_rate(std::span<const SceneOverlaps> scenes, double threshold = 0.5);

/// Mean best IoU per ground truth (IoU) and per output (IoU_o), scene averaged.
RateResult mean_iou(std::span<const SceneOverlaps> scenes);
RateResult mean_iou_outputs(std::span<const SceneOverlaps> scenes);

struct LabeledPoint
{
    Vec3 position = Vec3::Zero();
    int label = 0;           // synthetic scenes: object id >= 1, other labels <= 0
    bool of_interest = false;
};

struct PointPrecisionRecall
{
    long true_positives = 0;
    long false_positives = 0;
    long positives = 0;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_defined = false;  // false when no labeled point is inside any box
    bool recall_defined = false;     // false when there are no points of interest
};

/// Point-level precision/recall: a labeled point counts once if it lies
/// inside at least one box.
PointPrecisionRecall point_pr(std::span<const LabeledPoint> points, std::span<const Box3D> boxes);

/// Harmonic mean of precision and recall (same units as the inputs); 0 when both are 0.
double f_measure(double precision, double recall);

/// Tight pixel box around the in-view projections of a box's member points.
std::optional<EvalBox2D> project_box_to_2d(std::span<const Vec3> points, const Intrinsics& K, const Pose& pose);

struct EvalSceneRow
{
    std::string name;
    int ground_truths = 0;
    int outputs = 0;
    double iou = 0.0;
    double iou_o = 0.0;
    double detection_rate = 0.0;
    double success_rate = 0.0;
};

struct EvalReport
{
    std::string mode;  // "2d", "3d" or "points"
    std::vector<EvalSceneRow> scenes;
    RateResult iou;
    RateResult iou_o;
    RateResult detection_rate;
    RateResult success_rate;
    std::optional<PointPrecisionRecall> points;
    std::vector<std::string> warnings;

    std::string to_json() const;
    std::string to_text() const;
};

/// Aggregates per-scene overlaps into a report.
EvalReport make_report(std::string mode, std::span<const std::string> names, std::span<const SceneOverlaps> scenes);

}  // namespace objprop
