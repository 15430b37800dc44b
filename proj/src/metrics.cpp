#include "objprop/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace objprop {

double iou2d(const EvalBox2D& a, const EvalBox2D& b)
{
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double iou3d(const Box3D& a, const Box3D& b)
{
    const double inter = overlap_volume(a, b);
    const double uni = a.volume() + b.volume() - inter;
    return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

namespace {

template <typename Box, typename Iou>
SceneOverlaps overlaps(std::span<const Box> gt, std::span<const Box> out, Iou iou)
{
    SceneOverlaps s;
    s.per_ground_truth.assign(gt.size(), 0.0);
    s.per_output.assign(out.size(), 0.0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double v = iou(gt[i], out[j]);
            s.per_ground_truth[i] = std::max(s.per_ground_truth[i], v);
            s.per_output[j] = std::max(s.per_output[j], v);
        }
    }
    return s;
}

template <typename Select, typename Score>
RateResult scene_average(std::span<const SceneOverlaps> scenes, Select select, Score score)
{
    RateResult r;
    double sum = 0.0;
    for (const auto& scene : scenes) {
        const std::vector<double>& values = select(scene);
        if (values.empty()) {
            ++r.scenes_skipped;
            continue;
        }
        double s = 0.0;
        for (double v : values)
            s += score(v);
        sum += s / static_cast<double>(values.size());
        ++r.scenes_used;
    }
    r.value = r.scenes_used > 0 ? sum / r.scenes_used : 0.0;
    return r;
}

const std::vector<double>& by_gt(const SceneOverlaps& s) { return s.per_ground_truth; }
const std::vector<double>& by_output(const SceneOverlaps& s) { return s.per_output; }

}  // namespace

SceneOverlaps scene_overlaps(std::span<const EvalBox2D> ground_truth, std::span<const EvalBox2D> outputs)
{
    return overlaps(ground_truth, outputs, [](const EvalBox2D& a, const EvalBox2D& b) { return iou2d(a, b); });
}

SceneOverlaps scene_overlaps(std::span<const Box3D> ground_truth, std::span<const Box3D> outputs)
{
    return overlaps(ground_truth, outputs, [](const Box3D& a, const Box3D& b) { return iou3d(a, b); });
}

RateResult detection_rate(std::span<const SceneOverlaps> scenes, double threshold)
{
    return scene_average(scenes, by_gt, [&](double v) { return v >= threshold ? 1.0 : 0.0; });
}

RateResult success_rate(std::span<const SceneOverlaps> scenes, double threshold)
{
    return scene_average(scenes, by_output, [&](double v) { return v >= threshold ? 1.0 : 0.0; });
}

RateResult mean_iou(std::span<const SceneOverlaps> scenes)
{
    return scene_average(scenes, by_gt, [](double v) { return v; });
}

RateResult mean_iou_outputs(std::span<const SceneOverlaps> scenes)
{
    return scene_average(scenes, by_output, [](double v) { return v; });
}

PointPrecisionRecall point_pr(std::span<const LabeledPoint> points, std::span<const Box3D> boxes)
{
    PointPrecisionRecall r;
    for (const auto& p : points) {
        if (p.of_interest)
            ++r.positives;
        const bool inside =
            std::any_of(boxes.begin(), boxes.end(), [&](const Box3D& b) { return b.contains(p.position); });
        if (!inside)
            continue;
        if (p.of_interest)
            ++r.true_positives;
        else
            ++r.false_positives;
    }
    const long claimed = r.true_positives + r.false_positives;
    r.precision_defined = claimed > 0;
    r.precision = claimed > 0 ? static_cast<double>(r.true_positives) / static_cast<double>(claimed) : 0.0;
    r.recall_defined = r.positives > 0;
    r.recall = r.positives > 0 ? static_cast<double>(r.true_positives) / static_cast<double>(r.positives) : 0.0;
    return r;
}

double f_measure(double precision, double recall)
{
    const double sum = precision + recall;
    return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

std::optional<EvalBox2D> project_box_to_2d(std::span<const Vec3> points, const Intrinsics& K, const Pose& pose)
{
    long u0 = 0, v0 = 0, u1 = -1, v1 = -1;
    bool any = false;
    for (const Vec3& p : points) {
        const auto px = project(K, pose, p);
        if (!px)
            continue;
        const long u = std::lround(px->x());
        const long v = std::lround(px->y());
        if (u < 0 || v < 0 || u >= K.width || v >= K.height)
            continue;
        if (!any) {
            u0 = u1 = u;
            v0 = v1 = v;
            any = true;
            continue;
        }
        u0 = std::min(u0, u);
        u1 = std::max(u1, u);
        v0 = std::min(v0, v);
        v1 = std::max(v1, v);
    }
    if (!any)
        return std::nullopt;
    return EvalBox2D{static_cast<double>(u0), static_cast<double>(v0), static_cast<double>(u1 - u0 + 1),
                     static_cast<double>(v1 - v0 + 1)};
}

EvalReport make_report(std::string mode, std::span<const std::string> names, std::span<const SceneOverlaps> scenes)
{
    EvalReport report;
    report.mode = std::move(mode);
    for (std::size_t k = 0; k < scenes.size(); ++k) {
        const auto one = scenes.subspan(k, 1);
        EvalSceneRow row;
        row.name = k < names.size() ? names[k] : "scene_" + std::to_string(k);
        row.ground_truths = static_cast<int>(scenes[k].per_ground_truth.size());
        row.outputs = static_cast<int>(scenes[k].per_output.size());
        row.iou = mean_iou(one).value;
        row.iou_o = mean_iou_outputs(one).value;
        row.detection_rate = detection_rate(one).value;
        row.success_rate = success_rate(one).value;
        if (row.ground_truths == 0)
            report.warnings.push_back(row.name + ": no ground truth, skipped for DR");
        if (row.outputs == 0)
            report.warnings.push_back(row.name + ": no outputs, skipped for SR");
        report.scenes.push_back(row);
    }
    report.iou = mean_iou(scenes);
    report.iou_o = mean_iou_outputs(scenes);
    report.detection_rate = detection_rate(scenes);
    report.success_rate = success_rate(scenes);
    return report;
}

std::string EvalReport::to_json() const
{
    nlohmann::ordered_json j;
    j["mode"] = mode;
    auto rate = [](const RateResult& r) {
        return nlohmann::ordered_json{{"value", r.value}, {"scenes_used", r.scenes_used},
                                      {"scenes_skipped", r.scenes_skipped}};
    };
    j["aggregate"] = {{"iou", rate(iou)}, {"iou_o", rate(iou_o)}, {"detection_rate", rate(detection_rate)},
                      {"success_rate", rate(success_rate)}};
    j["scenes"] = nlohmann::ordered_json::array();
    for (const auto& s : scenes) {
        j["scenes"].push_back({{"name", s.name}, {"ground_truths", s.ground_truths}, {"outputs", s.outputs},
                               {"iou", s.iou}, {"iou_o", s.iou_o}, {"detection_rate", s.detection_rate},
                               {"success_rate", s.success_rate}});
    }
    if (points) {
        const double ap = points->precision * 100.0;
        const double ar = points->recall * 100.0;
        j["points"] = {{"true_positives", points->true_positives},
                       {"false_positives", points->false_positives},
                       {"positives", points->positives},
                       {"precision", points->precision},
                       {"recall", points->recall},
                       {"precision_defined", points->precision_defined},
                       {"recall_defined", points->recall_defined},
                       {"f_measure", f_measure(ap, ar) / 100.0}};
    }
    j["warnings"] = warnings;
    return j.dump(2);
}

std::string EvalReport::to_text() const
{
    std::ostringstream os;
    char line[256];
    if (!scenes.empty()) {
        std::snprintf(line, sizeof line, "%-20s %6s %6s %6s %6s %6s %6s\n", "scene", "#gt", "#out", "IoU", "IoU_o",
                      "SR", "DR");
        os << "mode: " << mode << "\n" << line;
        for (const auto& s : scenes) {
            std::snprintf(line, sizeof line, "%-20s %6d %6d %6.2f %6.2f %6.2f %6.2f\n", s.name.c_str(),
                          s.ground_truths, s.outputs, s.iou, s.iou_o, s.success_rate, s.detection_rate);
            os << line;
        }
        std::snprintf(line, sizeof line, "%-20s %6s %6s %6.2f %6.2f %6.2f %6.2f\n", "average", "", "", iou.value,
                      iou_o.value, success_rate.value, detection_rate.value);
        os << line;
    }
    if (points) {
        const double ap = points->precision * 100.0;
        const double ar = points->recall * 100.0;
        std::snprintf(line, sizeof line, "%-20s %8s %8s %10s\n%-20s %8.2f %8.2f %10.2f\n", "method", "AP", "AR",
                      "F-measure", "ours", ap, ar, f_measure(ap, ar));
        os << line;
    }
    for (const auto& w : warnings)
        os << "warning: " << w << "\n";
    return os.str();
}

}  // namespace objprop
