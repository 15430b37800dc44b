#include "objprop/commands.hpp"
#include "objprop/png_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace objprop {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_file(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Index of the output box holding each cluster point, -1 for noise and for
// clusters dropped by the volume filter.
std::vector<int> point_box_labels(const PipelineResult& result)
{
    std::vector<int> cluster_to_box(static_cast<std::size_t>(result.clusters.cluster_count), -1);
    std::vector<std::vector<std::size_t>> members(cluster_to_box.size());
    for (std::size_t i = 0; i < result.cluster_points.size(); ++i)
        if (result.clusters.labels[i] != kNoise)
            members[static_cast<std::size_t>(result.clusters.labels[i])].push_back(i);
    for (std::size_t c = 0; c < members.size(); ++c) {
        for (std::size_t b = 0; b < result.boxes.size(); ++b) {
            const Box3D& box = result.boxes[b].box;
            const bool inside = std::all_of(members[c].begin(), members[c].end(), [&](std::size_t i) {
                return box.contains(result.cluster_points[i], 1e-9);
            });
            if (inside) {
                cluster_to_box[c] = static_cast<int>(b);
                break;
            }
        }
    }
    std::vector<int> out(result.cluster_points.size(), -1);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (result.clusters.labels[i] != kNoise)
            out[i] = cluster_to_box[static_cast<std::size_t>(result.clusters.labels[i])];
    return out;
}

void write_outputs(const Pipeline& pipeline, const PipelineResult& result, const fs::path& out_dir)
{
    const auto boxes = result.box_list();
    write_boxes(out_dir / "boxes.json", boxes);

    const GlobalHeatmap3D& global = pipeline.global();
    PlyCloud cloud;
    std::vector<float> confidence;
    std::vector<int> frequency;
    for (const auto& p : global.points) {
        cloud.positions.push_back(p.position);
        Rgb8 c;
        for (int k = 0; k < 3; ++k)
            c[static_cast<std::size_t>(k)] =
                static_cast<std::uint8_t>(std::clamp(std::lround(p.color[k] * 255.0f), 0L, 255L));
        cloud.colors.push_back(c);
        confidence.push_back(static_cast<float>(p.confidence));
        frequency.push_back(p.frequency);
    }
    cloud.float_properties.push_back({"confidence", std::move(confidence)});
    cloud.int_properties.push_back({"frequency", std::move(frequency)});
    write_ply(out_dir / "global_cloud.ply", cloud);

    PlyCloud ranked;
    double max_score = 0.0;
    for (const auto& r : result.removal.kept)
        max_score = std::max(max_score, r.score);
    std::vector<float> scores;
    for (const auto& r : result.removal.kept) {
        ranked.positions.push_back(global.points[r.index].position);
        ranked.colors.push_back(heat_color(max_score > 0.0 ? r.score / max_score : 0.0));
        scores.push_back(static_cast<float>(r.score));
    }
    ranked.float_properties.push_back({"score", std::move(scores)});
    write_ply(out_dir / "ranked.ply", ranked);

    PlyCloud clusters;
    std::vector<int> labels = point_box_labels(result);
    for (std::size_t i = 0; i < result.cluster_points.size(); ++i) {
        clusters.positions.push_back(result.cluster_points[i]);
        clusters.colors.push_back(label_color(labels[i]));
    }
    clusters.int_properties.push_back({"cluster", std::move(labels)});
    write_ply(out_dir / "clusters.ply", clusters);
}

ordered_json plane_json(const std::optional<Plane>& plane)
{
    if (!plane)
        return nullptr;
    return {{"normal", {plane->normal.x(), plane->normal.y(), plane->normal.z()}}, {"offset", plane->offset}};
}


}  // namespace

RunSummary cmd_run(const PipelineConfig& config, const RunOptions& options)
{
    config.validate();
    SequenceReader reader(options.manifest);
    Pipeline pipeline(config, reader.camera().intrinsics);
    RunSummary summary;
    if (!options.resume_state.empty()) {
        const std::uint64_t cursor = pipeline.load_state(read_file(options.resume_state));
        reader.seek(static_cast<std::size_t>(cursor));
    }
    fs::create_directories(options.out_dir);

    std::ostringstream timing_csv;
    timing_csv << timing_csv_header() << "\n";
    double total_seconds = 0.0;
    int processed_now = 0;
    while (options.stop_after < 0 || processed_now < options.stop_after) {
        const std::size_t index = reader.position();
        if (index < reader.frame_total() && !fs::exists(reader.manifest().proposals_path(static_cast<int>(index))))
            summary.warnings.push_back("frame " + std::to_string(index) + ": no proposals file, using none");
        auto frame = reader.next();
        if (!frame)
            break;
        const FrameTiming timing = pipeline.process(*frame);
        timing_csv << timing_csv_row(timing) << "\n";
        total_seconds += timing.total;
        ++processed_now;
        if (options.verbose)
            std::cerr << "frame " << frame->index << ": " << timing.total << " s, " << pipeline.global().points.size()
                      << " points\n";
    }
    for (const auto& w : reader.warnings())
        summary.warnings.push_back(w);
    if (reader.clipped_proposals() > 0)
        summary.warnings.push_back(std::to_string(reader.clipped_proposals()) + " proposals clipped to the image");

    if (!options.save_state.empty())
        write_file(options.save_state, pipeline.save_state(reader.position()));

    const PipelineResult result = pipeline.finalize();
    write_outputs(pipeline, result, options.out_dir);
    write_file(options.out_dir / "timing.csv", timing_csv.str());

    summary.frames_processed = pipeline.frames_processed();
    summary.frames_skipped = reader.skipped();
    summary.global_points = static_cast<long>(pipeline.global().points.size());
    summary.boxes = static_cast<int>(result.boxes.size());
    summary.mean_frame_seconds = processed_now > 0 ? total_seconds / processed_now : 0.0;

    ordered_json j;
    j["frames_processed"] = summary.frames_processed;
    j["frames_skipped"] = summary.frames_skipped;
    j["global_points"] = summary.global_points;
    j["candidates"] = result.candidates.size();
    j["ranked"] = result.ranked.size();
    j["plane_removed"] = result.removal.removed;
    j["support_plane"] = plane_json(result.removal.support);
    j["clusters"] = result.clusters.cluster_count;
    j["boxes"] = summary.boxes;
    j["mean_frame_seconds"] = summary.mean_frame_seconds;
    j["warnings"] = summary.warnings;
    write_file(options.out_dir / "summary.json", j.dump(2) + "\n");
    return summary;
}

EvalReport cmd_eval(const EvalOptions& options)
{
    const std::string& mode = options.mode;
    if (mode != "2d" && mode != "3d" && mode != "points" && mode != "proposals")
        throw std::invalid_argument("unknown eval mode '" + mode + "'");
    const SequenceManifest manifest = read_manifest(options.manifest);
    if (!manifest.ground_truth)
        throw ParseError(options.manifest.string() + ": manifest has no ground truth");
    const GroundTruthPaths& gt = *manifest.ground_truth;

    std::vector<std::string> names;
    std::vector<SceneOverlaps> scenes;
    std::vector<std::string> warnings;
    std::optional<PointPrecisionRecall> points;

    if (mode == "3d" || mode == "points") {
        const auto boxes = read_boxes(options.boxes);
        std::vector<Box3D> truth;
        for (const auto& g : read_ground_truth_boxes(manifest.resolve(gt.boxes)))
            truth.push_back(g.box);
        names.push_back(options.manifest.parent_path().filename().string());
        scenes.push_back(scene_overlaps(truth, boxes));
        if (mode == "points") {
            const auto labeled = labeled_points_from_ply(read_ply(manifest.resolve(gt.points)));
            points = point_pr(labeled, boxes);
        }
    } else {
        SequenceReader reader(manifest);
        const Intrinsics& K = reader.camera().intrinsics;
        std::vector<std::vector<Vec3>> box_points;
        if (mode == "2d") {
            const auto boxes = read_boxes(options.boxes);
            box_points.resize(boxes.size());
            fs::path clusters = options.clusters;
            if (clusters.empty())
                clusters = options.boxes.parent_path() / "clusters.ply";
            if (fs::exists(clusters)) {
                const PlyCloud cloud = read_ply(clusters);
                const auto* labels = cloud.int_property("cluster");
                if (!labels)
                    throw ParseError(clusters.string() + ": no 'cluster' property");
                for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
                    const int l = (*labels)[i];
                    if (l >= 0 && static_cast<std::size_t>(l) < box_points.size())
                        box_points[static_cast<std::size_t>(l)].push_back(cloud.positions[i]);
                }
            } else {
                warnings.push_back("no clusters file, projecting box corners");
            }
            for (std::size_t b = 0; b < boxes.size(); ++b)
                if (box_points[b].empty()) {
                    const auto corners = boxes[b].world_corners();
                    box_points[b].assign(corners.begin(), corners.end());
                }
        }
        for (int f = 0; f < static_cast<int>(manifest.frames.size()); ++f) {
            const auto pose = reader.frame_pose(f);
            if (!pose) {
                warnings.push_back("frame " + std::to_string(f) + ": no pose, skipped");
                continue;
            }
            std::vector<EvalBox2D> truth;
            for (const auto& b : read_boxes2d(manifest.boxes2d_path(f)))
                truth.push_back(b.box);
            std::vector<EvalBox2D> outputs;
            if (mode == "2d") {
                for (const auto& pts : box_points)
                    if (const auto b = project_box_to_2d(pts, K, *pose))
                        outputs.push_back(*b);
            } else {
                auto proposals = read_proposals(manifest.proposals_path(f), K.width, K.height);
                std::stable_sort(proposals.begin(), proposals.end(),
                                 [](const Proposal2D& a, const Proposal2D& b) { return a.confidence > b.confidence; });
                if (options.top > 0 && static_cast<int>(proposals.size()) > options.top)
                    proposals.resize(static_cast<std::size_t>(options.top));
                for (const auto& p : proposals)
                    outputs.push_back({double(p.x), double(p.y), double(p.w), double(p.h)});
            }
            names.push_back("frame " + std::to_string(f));
            scenes.push_back(scene_overlaps(truth, outputs));
        }
    }

    EvalReport report = make_report(mode, names, scenes);
    report.points = points;
    report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        write_file(options.out_dir / ("eval_" + mode + ".json"), report.to_json() + "\n");
        write_file(options.out_dir / ("eval_" + mode + ".txt"), report.to_text());
    }
    return report;
}

fs::path cmd_synth(const SceneSpec& spec, const fs::path& out_dir)
{
    spec.validate();
    return write_sequence(spec, out_dir);
}

void cmd_debug_heatmap(const PipelineConfig& config, const fs::path& manifest, int frame, const fs::path& out_dir)
{
    config.validate();
    SequenceReader reader(manifest);
    if (frame < 0 || static_cast<std::size_t>(frame) >= reader.frame_total())
        throw std::invalid_argument("frame " + std::to_string(frame) + " is not in the sequence");
    if (!reader.frame_pose(frame))
        throw ParseError("frame " + std::to_string(frame) + " has no pose within tolerance");
    Pipeline pipeline(config, reader.camera().intrinsics);
    FrameDebug debug;
    while (auto record = reader.next()) {
        if (record->index == frame) {
            pipeline.process(*record, &debug);
            break;
        }
        pipeline.process(*record);
    }

    fs::create_directories(out_dir);
    double scale = 0.0;
    for (double h : debug.baseline.pixels())
        scale = std::max(scale, h);
    for (double h : debug.weighted.pixels())
        scale = std::max(scale, h);
    auto dump = [&](const Heatmap2D& heat, const char* name) {
        Image<std::uint16_t> img(heat.width(), heat.height(), 0);
        for (std::size_t i = 0; i < heat.size(); ++i)
            img[i] = scale > 0.0 ? static_cast<std::uint16_t>(std::lround(heat[i] / scale * 65535.0)) : 0;
        write_png_gray16(out_dir / name, img);
    };
    dump(debug.baseline, "baseline.png");
    dump(debug.weighted, "weighted.png");
    dump(debug.suppressed, "suppressed.png");

    double smax = 0.0;
    for (double h : debug.suppressed.pixels())
        smax = std::max(smax, h);
    Image<Rgb8> overlay = color_to_rgb8(debug.color);
    for (std::size_t i = 0; i < overlay.size(); ++i) {
        if (!(debug.suppressed[i] > 0.0) || !(smax > 0.0))
            continue;
        const Rgb8 hc = heat_color(debug.suppressed[i] / smax);
        for (std::size_t c = 0; c < 3; ++c)
            overlay[i][c] = static_cast<std::uint8_t>((overlay[i][c] + hc[c]) / 2);
    }
    const auto kept = nms_debug(debug.proposals);
    for (std::size_t k = 0; k < std::min<std::size_t>(kept.size(), 10); ++k) {
        const Proposal2D& p = kept[k];
        for (int u = p.x; u < p.x + p.w; ++u) {
            overlay(u, p.y) = {255, 255, 255};
            overlay(u, p.y + p.h - 1) = {255, 255, 255};
        }
        for (int v = p.y; v < p.y + p.h; ++v) {
            overlay(p.x, v) = {255, 255, 255};
            overlay(p.x + p.w - 1, v) = {255, 255, 255};
        }
    }
    write_png_rgb8(out_dir / "overlay.png", overlay);

    ordered_json j;
    j["frame"] = frame;
    j["scale"] = scale;
    j["pixel_value_meaning"] = "heat = value / 65535 * scale";
    j["plane"] = plane_json(debug.plane);
    j["proposals"] = debug.summary.total;
    j["rejected"] = debug.summary.rejected;
    j["masked"] = debug.summary.masked;
    j["fully_accepted"] = debug.summary.fully_accepted;
    j["outside_image"] = debug.summary.outside_image;
    write_file(out_dir / "heatmaps.json", j.dump(2) + "\n");
}

}  // namespace objprop
