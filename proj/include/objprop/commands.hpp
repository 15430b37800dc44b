#pragma once

#include "objprop/config.hpp"
#include "objprop/metrics.hpp"
#include "objprop/pipeline.hpp"
#include "objprop/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace objprop {

struct RunOptions
{
    std::filesystem::path manifest;
    std::filesystem::path out_dir;
    int stop_after = -1;  // frames to process in this invocation, -1 for all
    std::filesystem::path save_state;
    std::filesystem::path resume_state;
    bool verbose = false;
};

struct RunSummary
{
    int frames_processed = 0;  // including frames restored from a saved state
    int frames_skipped = 0;
    long global_points = 0;
    int boxes = 0;
    double mean_frame_seconds = 0.0;
    std::vector<std::string> warnings;
};

/// Runs the pipeline over a sequence and writes boxes.json, global_cloud.ply,
/// ranked.ply, clusters.ply, timing.csv and summary.json into out_dir.
RunSummary cmd_run(const PipelineConfig& config, const RunOptions& options);

struct EvalOptions
{
    std::filesystem::path boxes;     // boxes JSON (unused in "proposals" mode)
    std::filesystem::path manifest;  // sequence with ground truth
    std::string mode = "3d";         // 2d, 3d, points or proposals
    std::filesystem::path clusters;  // clusters PLY for 2d mode; default next to the boxes
    std::filesystem::path out_dir;   // report files, optional
    int top = 0;                     // proposals mode: top-N raw proposals per frame (0 = all)
};

/// 2d projects every box (its cluster points if available, else its corners)
/// into each frame and compares against the per-frame 2D ground truth;
/// proposals compares the top raw proposals instead; 3d compares boxes with
/// the ground-truth boxes; points computes point-level precision and recall.
EvalReport cmd_eval(const EvalOptions& options);

/// Writes a synthetic sequence; returns the manifest path.
std::filesystem::path cmd_synth(const SceneSpec& spec, const std::filesystem::path& out_dir);

/// Runs frames 0..frame and dumps the heatmaps of the last one as 16-bit
/// PNGs sharing one scale (baseline.png, weighted.png, suppressed.png), an
/// overlay.png and heatmaps.json with the scale.
void cmd_debug_heatmap(const PipelineConfig& config,
                       const std::filesystem::path& manifest,
                       int frame,
                       const std::filesystem::path& out_dir);

}  // namespace objprop
