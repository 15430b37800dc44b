#include "objprop/pipeline.hpp"

#include "objprop/commands.hpp"
#include "objprop/synth.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace objprop;

namespace {

SceneSpec small_scene(int frames)
{
    SceneSpec spec = scene_preset("tabletop", 3);
    spec.frame_count = frames;
    return spec;
}

PipelineConfig fast_config()
{
    PipelineConfig c;
    c.ransac_iterations = 2000;
    return c;
}

}  // namespace

TEST_CASE("downsampling: nearest depth, block color, covering proposals")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    FrameRecord f;
    f.depth = DepthImage(9, 7);
    f.color = ColorImage(9, 7);
    for (std::size_t i = 0; i < f.depth.size(); ++i) {
        f.depth[i] = u(rng) + 0.5f;
        f.color[i] = Color(u(rng), u(rng), u(rng));
    }
    f.proposals = {{1, 2, 3, 3, 0.5}, {8, 6, 1, 1, 0.25}, {0, 0, 9, 7, 1.0}};
    const FrameRecord d = downsample_frame(f, 2);
    REQUIRE(d.depth.width() == 4);
    REQUIRE(d.depth.height() == 3);
    for (int v = 0; v < 3; ++v)
        for (int x = 0; x < 4; ++x) {
            CHECK(d.depth(x, v) == f.depth(2 * x, 2 * v));
            const Color mean =
                (f.color(2 * x, 2 * v) + f.color(2 * x + 1, 2 * v) + f.color(2 * x, 2 * v + 1) + f.color(2 * x + 1, 2 * v + 1)) / 4.0f;
            CHECK((d.color(x, v) - mean).norm() < 1e-6f);
        }
    // [1, 4) x [2, 5) covers small pixels [0, 2) x [1, 3); the corner box falls off the cropped image.
    REQUIRE(d.proposals.size() == 2);
    CHECK(d.proposals[0] == Proposal2D{0, 1, 2, 2, 0.5});
    CHECK(d.proposals[1] == Proposal2D{0, 0, 4, 3, 1.0});
    CHECK(downsample_frame(f, 1).depth == f.depth);
}

TEST_CASE("empty proposals give no boxes")
{
    const SceneSpec spec = small_scene(12);
    Pipeline pipeline(fast_config(), spec.intrinsics);
    for (int i = 0; i < spec.frame_count; ++i) {
        FrameRecord r = render_frame(spec, i).record;
        r.proposals.clear();
        pipeline.process(r);
    }
    const PipelineResult result = pipeline.finalize();
    CHECK(result.frames == 12);
    CHECK(result.ranked.empty());
    CHECK(result.boxes.empty());
}

TEST_CASE("finalize before any frame")
{
    Pipeline pipeline(fast_config(), SceneSpec{}.intrinsics);
    CHECK(pipeline.finalize().boxes.empty());
}

TEST_CASE("saved state continues identically")
{
    const SceneSpec spec = small_scene(14);
    std::vector<FrameRecord> frames;
    for (int i = 0; i < spec.frame_count; ++i)
        frames.push_back(render_frame(spec, i).record);

    Pipeline full(fast_config(), spec.intrinsics);
    std::string midway;
    for (int i = 0; i < spec.frame_count; ++i) {
        full.process(frames[static_cast<std::size_t>(i)]);
        if (i == 5)
            midway = full.save_state(6);
    }

    Pipeline resumed(fast_config(), spec.intrinsics);
    CHECK(resumed.load_state(midway) == 6);
    CHECK(resumed.frames_processed() == 6);
    for (std::size_t i = 6; i < frames.size(); ++i)
        resumed.process(frames[i]);
    CHECK(resumed.save_state(99) == full.save_state(99));
    CHECK(boxes_to_json(resumed.finalize().box_list()) == boxes_to_json(full.finalize().box_list()));

    Pipeline other(fast_config(), Intrinsics{100, 100, 50, 50, 100, 100});
    CHECK_THROWS(other.load_state(midway));
    CHECK_THROWS(resumed.load_state("garbage"));
}

TEST_CASE("debug heatmaps: filtering only removes heat and the plane is cleared")
{
    const SceneSpec spec = small_scene(3);
    Pipeline pipeline(fast_config(), spec.intrinsics);
    for (int i = 0; i < 3; ++i) {
        const FrameRecord r = render_frame(spec, i).record;
        FrameDebug debug;
        const FrameTiming t = pipeline.process(r, &debug);
        CHECK(t.frame == i);
        CHECK(t.proposals == static_cast<long>(r.proposals.size()));
        CHECK(t.total >= t.proposal_filtering);
        for (std::size_t k = 0; k < debug.baseline.size(); ++k) {
            CHECK(debug.weighted[k] <= debug.baseline[k] + 1e-9);
            CHECK(debug.suppressed[k] <= debug.weighted[k] + 1e-12);
        }
        REQUIRE(debug.plane);
        const PointImage pts = backproject_depth(pipeline.working_intrinsics(), r.pose, r.depth);
        long plane_pixels = 0;
        for (int v = 0; v < pts.height(); ++v)
            for (int u = 0; u < pts.width(); ++u)
                if (pts.is_valid(u, v) && debug.plane->is_inlier(pts.points(u, v), pipeline.config().eps_p)) {
                    CHECK(debug.suppressed(u, v) == 0.0);
                    ++plane_pixels;
                }
        CHECK(plane_pixels > 1000);
    }
}

TEST_CASE("downsampling by two is faster")
{
    const SceneSpec spec = small_scene(6);
    std::vector<FrameRecord> frames;
    for (int i = 0; i < spec.frame_count; ++i)
        frames.push_back(render_frame(spec, i).record);
    auto mean_time = [&](int factor) {
        PipelineConfig c = fast_config();
        c.downsample = factor;
        Pipeline p(c, spec.intrinsics);
        double sum = 0.0;
        for (const auto& f : frames)
            sum += p.process(f).total;
        return sum / static_cast<double>(frames.size());
    };
    mean_time(1);  // warm-up
    CHECK(mean_time(2) < mean_time(1));
}

TEST_CASE("timing CSV columns")
{
    const std::string header = timing_csv_header();
    for (const char* col : {"proposal_filtering", "plane_removal", "fusion_confidence_frequency",
                            "fusion_location_color", "total"})
        CHECK(header.find(col) != std::string::npos);
    FrameTiming t;
    t.frame = 3;
    const std::string row = timing_csv_row(t);
    CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
}

TEST_CASE("run, eval and debug commands on a short sequence")
{
    objprop::test::TempDir dir;
    const SceneSpec spec = small_scene(12);
    const auto manifest = cmd_synth(spec, dir / "seq");
    RunOptions run;
    run.manifest = manifest;
    run.out_dir = dir / "out";
    const RunSummary summary = cmd_run(fast_config(), run);
    CHECK(summary.frames_processed == 12);
    for (const char* name : {"boxes.json", "global_cloud.ply", "ranked.ply", "clusters.ply", "timing.csv", "summary.json"})
        CHECK(std::filesystem::exists(dir / "out" / name));
    CHECK(read_boxes(dir / "out" / "boxes.json").size() == static_cast<std::size_t>(summary.boxes));
    const PlyCloud clusters = read_ply(dir / "out" / "clusters.ply");
    CHECK(clusters.int_property("cluster"));

    for (const char* mode : {"3d", "2d", "points", "proposals"}) {
        EvalOptions eval;
        eval.boxes = dir / "out" / "boxes.json";
        eval.manifest = manifest;
        eval.mode = mode;
        eval.out_dir = dir / "eval";
        eval.top = 10;
        const EvalReport report = cmd_eval(eval);
        CHECK(report.mode == mode);
        CHECK(std::filesystem::exists(dir / "eval" / (std::string("eval_") + mode + ".json")));
    }

    cmd_debug_heatmap(fast_config(), manifest, 2, dir / "dbg");
    for (const char* name : {"baseline.png", "weighted.png", "suppressed.png", "overlay.png", "heatmaps.json"})
        CHECK(std::filesystem::exists(dir / "dbg" / name));
    const auto base = read_png_gray16(dir / "dbg" / "baseline.png");
    const auto weighted = read_png_gray16(dir / "dbg" / "weighted.png");
    const auto suppressed = read_png_gray16(dir / "dbg" / "suppressed.png");
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(weighted[i] <= base[i]);
        CHECK(suppressed[i] <= weighted[i]);
    }
    CHECK_THROWS(cmd_debug_heatmap(fast_config(), manifest, 99, dir / "dbg2"));
}
