// Command line driver: run, eval, synth and debug-heatmap over the C API.
#include "objprop/objprop.h"

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitFatal = 1;
constexpr int kExitInvalidConfig = 2;

int report(objprop_status status, const char* what)
{
    if (status == OBJPROP_OK)
        return 0;
    std::fprintf(stderr, "objprop %s: %s: %s\n", what, objprop_status_string(status), objprop_last_error());
    return status == OBJPROP_ERR_INVALID_CONFIG ? kExitInvalidConfig : kExitFatal;
}

struct ConfigDeleter
{
    void operator()(objprop_config* c) const { objprop_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<objprop_config, ConfigDeleter>;

// Config file plus one flag per config key (both key_name and key-name spellings).
struct ConfigFlags
{
    std::string file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> values;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--config", file, "key = value config file");
        cmd->add_option("--set", sets, "override a config key, key=value (repeatable)");
        for (size_t i = 0; i < objprop_config_key_count(); ++i) {
            const std::string key = objprop_config_key_name(i);
            std::string dashed = key;
            for (char& c : dashed)
                if (c == '_')
                    c = '-';
            std::string names = "--" + key;
            if (dashed != key)
                names += ",--" + dashed;
            cmd->add_option_function<std::string>(
                names, [this, key](const std::string& v) { values[key] = v; }, objprop_config_key_help(i));
        }
    }

    int build(ConfigPtr& out) const
    {
        objprop_config* raw = nullptr;
        if (int rc = report(objprop_config_create(&raw), "config"))
            return rc;
        out.reset(raw);
        if (!file.empty())
            if (int rc = report(objprop_config_load(raw, file.c_str()), "config"))
                return rc;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "objprop config: --set expects key=value, got '%s'\n", s.c_str());
                return kExitInvalidConfig;
            }
            if (int rc = report(objprop_config_set(raw, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()), "config"))
                return rc == kExitFatal ? kExitInvalidConfig : rc;
        }
        for (const auto& [key, value] : values)
            if (int rc = report(objprop_config_set(raw, key.c_str(), value.c_str()), "config"))
                return rc == kExitFatal ? kExitInvalidConfig : rc;
        return report(objprop_config_validate(raw), "config");
    }
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"3D object proposals from RGB-D sequences"};
    app.require_subcommand(1);
    app.set_version_flag("--version", objprop_version());

    // run
    auto* run = app.add_subcommand("run", "run the online pipeline over a sequence");
    ConfigFlags run_config;
    run_config.attach(run);
    std::string run_manifest, run_out, save_state, resume_state;
    int stop_after = -1;
    bool verbose = false;
    run->add_option("--manifest", run_manifest, "sequence manifest")->required();
    run->add_option("--out", run_out, "output directory")->required();
    run->add_option("--stop-after", stop_after, "process at most this many frames");
    run->add_option("--save-state", save_state, "write the pipeline state after the last frame");
    run->add_option("--resume-state", resume_state, "continue from a saved state");
    run->add_flag("--verbose", verbose, "per-frame progress on stderr");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate boxes against ground truth");
    std::string eval_boxes, eval_manifest, eval_mode = "3d", eval_clusters, eval_out;
    int eval_top = 0;
    eval->add_option("--boxes", eval_boxes, "boxes JSON");
    eval->add_option("--manifest", eval_manifest, "sequence manifest with ground truth")->required();
    eval->add_option("--mode", eval_mode, "2d, 3d, points or proposals")
        ->check(CLI::IsMember({"2d", "3d", "points", "proposals"}));
    eval->add_option("--clusters", eval_clusters, "clusters PLY for 2d mode");
    eval->add_option("--out", eval_out, "report directory");
    eval->add_option("--top", eval_top, "proposals mode: top-N proposals per frame");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
    std::string preset = "tabletop", scene_file, synth_out;
    std::uint64_t seed = 1;
    std::vector<std::string> scene_sets;
    synth->add_option("--preset", preset, "tabletop or pan");
    synth->add_option("--seed", seed, "scene seed");
    synth->add_option("--scene", scene_file, "scene JSON (overrides preset)");
    synth->add_option("--set", scene_sets, "override a scene field, key=value (repeatable)");
    synth->add_option("--out", synth_out, "output directory")->required();

    // debug-heatmap
    auto* debug = app.add_subcommand("debug-heatmap", "dump the heatmaps of one frame");
    ConfigFlags debug_config;
    debug_config.attach(debug);
    std::string debug_manifest, debug_out;
    int debug_frame = 0;
    debug->add_option("--manifest", debug_manifest, "sequence manifest")->required();
    debug->add_option("--frame", debug_frame, "frame index")->required();
    debug->add_option("--out", debug_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInvalidConfig;
    }

    if (run->parsed()) {
        ConfigPtr config;
        if (int rc = run_config.build(config))
            return rc;
        objprop_run_options options{run_manifest.c_str(), run_out.c_str(), stop_after,
                                    save_state.empty() ? nullptr : save_state.c_str(),
                                    resume_state.empty() ? nullptr : resume_state.c_str(), verbose ? 1 : 0};
        objprop_run_summary summary{};
        if (int rc = report(objprop_cmd_run(config.get(), &options, &summary), "run"))
            return rc;
        std::printf("frames %d (skipped %d), global points %lld, boxes %d, mean frame time %.3f s, warnings %d\n",
                    summary.frames_processed, summary.frames_skipped, summary.global_points, summary.boxes,
                    summary.mean_frame_seconds, summary.warnings);
        return 0;
    }

    if (eval->parsed()) {
        objprop_eval_options options{eval_boxes.empty() ? nullptr : eval_boxes.c_str(),
                                     eval_manifest.c_str(),
                                     eval_mode.c_str(),
                                     eval_clusters.empty() ? nullptr : eval_clusters.c_str(),
                                     eval_out.empty() ? nullptr : eval_out.c_str(),
                                     eval_top};
        std::vector<char> text(1 << 16);
        size_t needed = 0;
        objprop_status status = objprop_cmd_eval(&options, text.data(), text.size(), &needed);
        if (status == OBJPROP_ERR_INVALID_ARGUMENT && needed > text.size()) {
            text.resize(needed);
            status = objprop_cmd_eval(&options, text.data(), text.size(), &needed);
        }
        if (int rc = report(status, "eval"))
            return rc;
        std::fputs(text.data(), stdout);
        return 0;
    }

    if (synth->parsed()) {
        objprop_scene* scene = nullptr;
        objprop_status status =
            scene_file.empty() ? objprop_scene_create(preset.c_str(), seed, &scene) : objprop_scene_load(scene_file.c_str(), &scene);
        if (int rc = report(status, "synth"))
            return rc;
        std::unique_ptr<objprop_scene, void (*)(objprop_scene*)> guard(scene, objprop_scene_destroy);
        for (const auto& s : scene_sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "objprop synth: --set expects key=value, got '%s'\n", s.c_str());
                return kExitInvalidConfig;
            }
            if (int rc = report(objprop_scene_set(scene, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()), "synth"))
                return rc;
        }
        if (int rc = report(objprop_cmd_synth(scene, synth_out.c_str()), "synth"))
            return rc;
        std::printf("wrote %s/manifest.json\n", synth_out.c_str());
        return 0;
    }

    ConfigPtr config;
    if (int rc = debug_config.build(config))
        return rc;
    return report(objprop_cmd_debug_heatmap(config.get(), debug_manifest.c_str(), debug_frame, debug_out.c_str()),
                  "debug-heatmap");
}
