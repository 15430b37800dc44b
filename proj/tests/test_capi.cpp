#include "objprop/objprop.h"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

namespace {

std::string cli() { return std::getenv("OBJPROP_CLI") ? std::getenv("OBJPROP_CLI") : "objprop"; }

int run_cli(const std::string& args)
{
    const std::string command = "\"" + cli() + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(command.c_str());
    if (status == -1 || !WIFEXITED(status))
        return -1;
    return WEXITSTATUS(status);
}

struct Sequence
{
    objprop::test::TempDir dir;
    std::string manifest;
};

// Short synthetic sequence written through the C API.
void make_sequence(Sequence& seq, int frames)
{
    objprop_scene* scene = nullptr;
    REQUIRE(objprop_scene_create("tabletop", 3, &scene) == OBJPROP_OK);
    REQUIRE(objprop_scene_set(scene, "frame_count", std::to_string(frames).c_str()) == OBJPROP_OK);
    REQUIRE(objprop_cmd_synth(scene, (seq.dir / "seq").c_str()) == OBJPROP_OK);
    objprop_scene_destroy(scene);
    seq.manifest = (seq.dir / "seq" / "manifest.json").string();
}

}  // namespace

TEST_CASE("status strings and version")
{
    CHECK(std::string(objprop_version()).size() > 0);
    CHECK(std::string(objprop_status_string(OBJPROP_OK)) != "");
    CHECK(std::string(objprop_status_string(OBJPROP_ERR_PARSE)) != std::string(objprop_status_string(OBJPROP_ERR_IO)));
}

TEST_CASE("config handle")
{
    objprop_config* config = nullptr;
    REQUIRE(objprop_config_create(&config) == OBJPROP_OK);
    char buf[64];
    size_t needed = 0;
    REQUIRE(objprop_config_get(config, "tau", buf, sizeof buf, &needed) == OBJPROP_OK);
    CHECK(std::string(buf) == "10");
    CHECK(needed == 3);
    CHECK(objprop_config_get(config, "tau", buf, 1, &needed) == OBJPROP_ERR_INVALID_ARGUMENT);
    CHECK(needed == 3);
    CHECK(objprop_config_get(config, "tau", nullptr, 0, &needed) == OBJPROP_OK);

    CHECK(objprop_config_set(config, "tau", "4") == OBJPROP_OK);
    CHECK(objprop_config_set(config, "bogus", "4") == OBJPROP_ERR_INVALID_CONFIG);
    CHECK(std::string(objprop_last_error()).find("bogus") != std::string::npos);
    CHECK(objprop_config_set(config, "eps_min", "5") == OBJPROP_OK);  // set does not validate
    CHECK(objprop_config_validate(config) == OBJPROP_ERR_INVALID_CONFIG);
    CHECK(objprop_config_set(config, "eps_min", "0.02") == OBJPROP_OK);
    CHECK(objprop_config_validate(config) == OBJPROP_OK);

    objprop::test::TempDir dir;
    const std::string path = (dir / "c.cfg").string();
    CHECK(objprop_config_save(config, path.c_str()) == OBJPROP_OK);
    objprop_config* loaded = nullptr;
    REQUIRE(objprop_config_create(&loaded) == OBJPROP_OK);
    CHECK(objprop_config_load(loaded, path.c_str()) == OBJPROP_OK);
    REQUIRE(objprop_config_get(loaded, "tau", buf, sizeof buf, &needed) == OBJPROP_OK);
    CHECK(std::string(buf) == "4");
    CHECK(objprop_config_load(loaded, (dir / "missing.cfg").c_str()) != OBJPROP_OK);

    CHECK(objprop_config_key_count() > 20);
    CHECK(objprop_config_key_name(0) != nullptr);
    CHECK(objprop_config_key_help(0) != nullptr);
    CHECK(objprop_config_key_name(100000) == nullptr);

    CHECK(objprop_config_create(nullptr) == OBJPROP_ERR_INVALID_ARGUMENT);
    CHECK(objprop_config_set(nullptr, "tau", "1") == OBJPROP_ERR_INVALID_ARGUMENT);
    objprop_config_destroy(loaded);
    objprop_config_destroy(config);
    objprop_config_destroy(nullptr);
}

TEST_CASE("pipeline handle")
{
    objprop_config* config = nullptr;
    REQUIRE(objprop_config_create(&config) == OBJPROP_OK);
    objprop_config_set(config, "ransac_iterations", "500");
    const objprop_intrinsics K{40.0, 40.0, 15.5, 11.5, 32, 24};
    objprop_pipeline* pipeline = nullptr;
    REQUIRE(objprop_pipeline_create(config, &K, &pipeline) == OBJPROP_OK);

    // A flat wall one meter away with a bright square in the middle.
    const std::size_t n = 32 * 24;
    std::vector<float> depth(n, 1.0f), color(3 * n, 0.5f);
    const double pose[12] = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    const objprop_proposal props[] = {{10, 8, 12, 8, 0.9}};
    objprop_frame_timing timing{};
    for (int i = 0; i < 3; ++i)
        REQUIRE(objprop_pipeline_push_frame(pipeline, color.data(), depth.data(), pose, props, 1, &timing) == OBJPROP_OK);
    CHECK(timing.total >= 0.0);
    int frames = 0;
    CHECK(objprop_pipeline_frame_count(pipeline, &frames) == OBJPROP_OK);
    CHECK(frames == 3);
    size_t points = 0;
    CHECK(objprop_pipeline_point_count(pipeline, &points) == OBJPROP_OK);
    CHECK(points == n);

    const double bad_pose[12] = {2, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    CHECK(objprop_pipeline_push_frame(pipeline, color.data(), depth.data(), bad_pose, props, 1, nullptr) ==
          OBJPROP_ERR_INVALID_ARGUMENT);
    CHECK(objprop_pipeline_push_frame(pipeline, nullptr, depth.data(), pose, props, 1, nullptr) ==
          OBJPROP_ERR_INVALID_ARGUMENT);

    objprop::test::TempDir dir;
    const std::string state = (dir / "state.bin").string();
    CHECK(objprop_pipeline_save_state(pipeline, state.c_str()) == OBJPROP_OK);
    objprop_pipeline* resumed = nullptr;
    REQUIRE(objprop_pipeline_create(config, &K, &resumed) == OBJPROP_OK);
    CHECK(objprop_pipeline_load_state(resumed, state.c_str()) == OBJPROP_OK);
    CHECK(objprop_pipeline_frame_count(resumed, &frames) == OBJPROP_OK);
    CHECK(frames == 3);
    objprop::test::write_file(dir / "junk.bin", "not a state");
    CHECK(objprop_pipeline_load_state(resumed, (dir / "junk.bin").c_str()) == OBJPROP_ERR_STATE);

    objprop_boxes* boxes = nullptr;
    REQUIRE(objprop_pipeline_finalize(pipeline, &boxes) == OBJPROP_OK);
    const std::string json = (dir / "boxes.json").string();
    CHECK(objprop_boxes_write_json(boxes, json.c_str()) == OBJPROP_OK);
    objprop_boxes* back = nullptr;
    REQUIRE(objprop_boxes_read_json(json.c_str(), &back) == OBJPROP_OK);
    CHECK(objprop_boxes_count(back) == objprop_boxes_count(boxes));
    objprop_box box{};
    CHECK(objprop_boxes_get(back, objprop_boxes_count(back), &box) == OBJPROP_ERR_INVALID_ARGUMENT);
    objprop::test::write_file(dir / "bad.json", "[{\"min\": 1}]");
    objprop_boxes* bad = nullptr;
    CHECK(objprop_boxes_read_json((dir / "bad.json").c_str(), &bad) == OBJPROP_ERR_PARSE);

    objprop_boxes_destroy(back);
    objprop_boxes_destroy(boxes);
    objprop_pipeline_destroy(resumed);
    objprop_pipeline_destroy(pipeline);

    objprop_config_set(config, "downsample", "3");
    objprop_pipeline* invalid = nullptr;
    CHECK(objprop_pipeline_create(config, &K, &invalid) == OBJPROP_ERR_INVALID_CONFIG);
    CHECK(invalid == nullptr);
    objprop_config_destroy(config);
}

TEST_CASE("commands through the C interface")
{
    Sequence seq;
    make_sequence(seq, 10);
    objprop_config* config = nullptr;
    REQUIRE(objprop_config_create(&config) == OBJPROP_OK);
    objprop_config_set(config, "ransac_iterations", "1000");
    const std::string out = (seq.dir / "out").string();
    objprop_run_options run{seq.manifest.c_str(), out.c_str(), -1, nullptr, nullptr, 0};
    objprop_run_summary summary{};
    REQUIRE(objprop_cmd_run(config, &run, &summary) == OBJPROP_OK);
    CHECK(summary.frames_processed == 10);
    CHECK(summary.global_points > 0);

    const std::string boxes = out + "/boxes.json";
    objprop_eval_options eval{boxes.c_str(), seq.manifest.c_str(), "3d", nullptr, nullptr, 0};
    size_t needed = 0;
    CHECK(objprop_cmd_eval(&eval, nullptr, 0, &needed) == OBJPROP_OK);
    CHECK(needed > 1);
    std::vector<char> text(needed);
    CHECK(objprop_cmd_eval(&eval, text.data(), text.size(), &needed) == OBJPROP_OK);
    CHECK(std::string(text.data()).find("average") != std::string::npos);
    eval.mode = "4d";
    CHECK(objprop_cmd_eval(&eval, nullptr, 0, &needed) != OBJPROP_OK);

    run.manifest = "/nonexistent/manifest.json";
    CHECK(objprop_cmd_run(config, &run, &summary) != OBJPROP_OK);
    CHECK(objprop_cmd_debug_heatmap(config, seq.manifest.c_str(), 1, (seq.dir / "dbg").c_str()) == OBJPROP_OK);

    objprop_scene* scene = nullptr;
    CHECK(objprop_scene_create("nope", 1, &scene) != OBJPROP_OK);
    REQUIRE(objprop_scene_create("pan", 1, &scene) == OBJPROP_OK);
    CHECK(objprop_scene_set(scene, "frame_count", "0") == OBJPROP_ERR_INVALID_CONFIG);
    CHECK(objprop_scene_set(scene, "frame_count", "\"many\"") != OBJPROP_OK);
    CHECK(objprop_scene_set(scene, "not_a_field", "1") == OBJPROP_ERR_INVALID_CONFIG);
    objprop_scene_destroy(scene);
    objprop_config_destroy(config);
}

TEST_CASE("command-line exit codes")
{
    Sequence seq;
    const std::string d = seq.dir.path().string();
    CHECK(run_cli("synth --preset tabletop --seed 2 --set frame_count=6 --out \"" + d + "/seq\"") == 0);
    const std::string manifest = d + "/seq/manifest.json";
    CHECK(run_cli("run --manifest \"" + manifest + "\" --out \"" + d + "/out\" --ransac-iterations 500") == 0);
    CHECK(run_cli("run --manifest \"" + manifest + "\" --out \"" + d + "/out2\" --set ransac_iterations=500 --eps_p 0.006") == 0);
    CHECK(run_cli("eval --manifest \"" + manifest + "\" --boxes \"" + d + "/out/boxes.json\" --mode points") == 0);
    CHECK(run_cli("debug-heatmap --manifest \"" + manifest + "\" --frame 1 --out \"" + d + "/dbg\" --ransac-iterations 500") == 0);

    // Invalid configuration.
    CHECK(run_cli("run --manifest \"" + manifest + "\" --out \"" + d + "/x\" --downsample 3") == 2);
    CHECK(run_cli("run --manifest \"" + manifest + "\" --out \"" + d + "/x\" --set bogus=1") == 2);
    objprop::test::write_file(seq.dir / "bad.cfg", "tau = -1\n");
    CHECK(run_cli("run --manifest \"" + manifest + "\" --out \"" + d + "/x\" --config \"" + d + "/bad.cfg\"") == 2);
    CHECK(run_cli("run --out \"" + d + "/x\"") == 2);
    CHECK(run_cli("synth --preset tabletop --set frame_count=0 --out \"" + d + "/bad\"") == 2);

    // Fatal errors.
    CHECK(run_cli("run --manifest \"" + d + "/missing.json\" --out \"" + d + "/x\"") == 1);
    CHECK(run_cli("eval --manifest \"" + manifest + "\" --boxes \"" + d + "/nope.json\" --mode 3d") == 1);
}
