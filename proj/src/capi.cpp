#include "objprop/objprop.h"

#include "objprop/commands.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

struct objprop_config
{
    objprop::PipelineConfig config;
};

struct objprop_pipeline
{
    objprop::Pipeline pipeline;
    objprop::Intrinsics intrinsics;
};

struct objprop_boxes
{
    std::vector<objprop::Box3D> boxes;
};

struct objprop_scene
{
    objprop::SceneSpec spec;
};

namespace {

thread_local std::string last_error;

objprop_status fail(objprop_status status, const std::string& message)
{
    last_error = message;
    return status;
}

template <typename F>
objprop_status guarded(F&& body)
{
    try {
        last_error.clear();
        return body();
    } catch (const objprop::ConfigError& e) {
        return fail(OBJPROP_ERR_INVALID_CONFIG, e.what());
    } catch (const objprop::ParseError& e) {
        return fail(OBJPROP_ERR_PARSE, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(OBJPROP_ERR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(OBJPROP_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(OBJPROP_ERR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(OBJPROP_ERR_INTERNAL, "out of memory");
    } catch (const std::runtime_error& e) {
        return fail(OBJPROP_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(OBJPROP_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(OBJPROP_ERR_INTERNAL, "unknown error");
    }
}

objprop_status copy_out(const std::string& value, char* buf, size_t size, size_t* needed)
{
    if (needed)
        *needed = value.size() + 1;
    if (buf && size > 0) {
        if (size < value.size() + 1)
            return fail(OBJPROP_ERR_INVALID_ARGUMENT, "buffer too small");
        std::memcpy(buf, value.c_str(), value.size() + 1);
    }
    return OBJPROP_OK;
}

#define OBJPROP_REQUIRE(cond, what)                              \
    do {                                                         \
        if (!(cond))                                             \
            return fail(OBJPROP_ERR_INVALID_ARGUMENT, what);     \
    } while (0)

std::string read_file(const char* path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error(std::string("cannot open ") + path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

extern "C" {

const char* objprop_version(void) { return "0.1.0"; }

const char* objprop_status_string(objprop_status status)
{
    switch (status) {
    case OBJPROP_OK: return "ok";
    case OBJPROP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case OBJPROP_ERR_INVALID_CONFIG: return "invalid configuration";
    case OBJPROP_ERR_IO: return "i/o error";
    case OBJPROP_ERR_PARSE: return "malformed input";
    case OBJPROP_ERR_STATE: return "invalid state";
    case OBJPROP_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* objprop_last_error(void) { return last_error.c_str(); }

// ---- configuration ----

objprop_status objprop_config_create(objprop_config** out)
{
    OBJPROP_REQUIRE(out, "out is null");
    return guarded([&] {
        *out = new objprop_config{};
        return OBJPROP_OK;
    });
}

void objprop_config_destroy(objprop_config* config) { delete config; }

objprop_status objprop_config_set(objprop_config* config, const char* key, const char* value)
{
    OBJPROP_REQUIRE(config && key && value, "null argument");
    return guarded([&] {
        objprop::PipelineConfig updated = config->config;
        updated.set(key, value);
        config->config = updated;
        return OBJPROP_OK;
    });
}

objprop_status objprop_config_get(const objprop_config* config, const char* key, char* buf, size_t size,
                                  size_t* needed)
{
    OBJPROP_REQUIRE(config && key, "null argument");
    return guarded([&] { return copy_out(config->config.get(key), buf, size, needed); });
}

objprop_status objprop_config_validate(const objprop_config* config)
{
    OBJPROP_REQUIRE(config, "config is null");
    return guarded([&] {
        config->config.validate();
        return OBJPROP_OK;
    });
}

objprop_status objprop_config_load(objprop_config* config, const char* path)
{
    OBJPROP_REQUIRE(config && path, "null argument");
    return guarded([&] {
        config->config = objprop::read_config(path);
        return OBJPROP_OK;
    });
}

objprop_status objprop_config_save(const objprop_config* config, const char* path)
{
    OBJPROP_REQUIRE(config && path, "null argument");
    return guarded([&] {
        objprop::write_config(path, config->config);
        return OBJPROP_OK;
    });
}

size_t objprop_config_key_count(void) { return objprop::config_keys().size(); }

const char* objprop_config_key_name(size_t index)
{
    const auto& keys = objprop::config_keys();
    return index < keys.size() ? keys[index].name.c_str() : nullptr;
}

const char* objprop_config_key_help(size_t index)
{
    const auto& keys = objprop::config_keys();
    return index < keys.size() ? keys[index].help.c_str() : nullptr;
}

// ---- pipeline ----

objprop_status objprop_pipeline_create(const objprop_config* config, const objprop_intrinsics* intrinsics,
                                       objprop_pipeline** out)
{
    OBJPROP_REQUIRE(config && intrinsics && out, "null argument");
    return guarded([&] {
        const objprop::Intrinsics K{intrinsics->fx, intrinsics->fy, intrinsics->cx,
                                    intrinsics->cy, intrinsics->width, intrinsics->height};
        *out = new objprop_pipeline{objprop::Pipeline(config->config, K), K};
        return OBJPROP_OK;
    });
}

void objprop_pipeline_destroy(objprop_pipeline* pipeline) { delete pipeline; }

objprop_status objprop_pipeline_push_frame(objprop_pipeline* pipeline, const float* color, const float* depth,
                                           const double pose[12], const objprop_proposal* proposals,
                                           size_t proposal_count, objprop_frame_timing* timing)
{
    OBJPROP_REQUIRE(pipeline && color && depth && pose, "null argument");
    OBJPROP_REQUIRE(proposals || proposal_count == 0, "proposals is null");
    return guarded([&] {
        const objprop::Intrinsics& K = pipeline->intrinsics;
        objprop::FrameRecord frame;
        frame.index = pipeline->pipeline.frames_processed();
        frame.depth = objprop::DepthImage(K.width, K.height);
        frame.color = objprop::ColorImage(K.width, K.height);
        for (std::size_t i = 0; i < frame.depth.size(); ++i) {
            frame.depth[i] = depth[i];
            frame.color[i] = objprop::Color(color[3 * i], color[3 * i + 1], color[3 * i + 2]);
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c)
                frame.pose.R(r, c) = pose[4 * r + c];
            frame.pose.t[r] = pose[4 * r + 3];
        }
        if (!frame.pose.valid(1e-6))
            throw std::invalid_argument("pose rotation is not orthonormal");
        for (size_t i = 0; i < proposal_count; ++i) {
            const objprop_proposal& p = proposals[i];
            if (p.w <= 0 || p.h <= 0)
                throw std::invalid_argument("proposal " + std::to_string(i) + " has a non-positive size");
            if (const auto clipped = objprop::clip_to_image({p.x, p.y, p.w, p.h, p.confidence}, K.width, K.height))
                frame.proposals.push_back(*clipped);
        }
        const objprop::FrameTiming t = pipeline->pipeline.process(frame);
        if (timing)
            *timing = {t.proposal_filtering, t.plane_removal, t.fusion_match, t.fusion_confidence_frequency,
                       t.fusion_location_color, t.total};
        return OBJPROP_OK;
    });
}

objprop_status objprop_pipeline_frame_count(const objprop_pipeline* pipeline, int* out)
{
    OBJPROP_REQUIRE(pipeline && out, "null argument");
    *out = pipeline->pipeline.frames_processed();
    return OBJPROP_OK;
}

objprop_status objprop_pipeline_point_count(const objprop_pipeline* pipeline, size_t* out)
{
    OBJPROP_REQUIRE(pipeline && out, "null argument");
    *out = pipeline->pipeline.global().points.size();
    return OBJPROP_OK;
}

objprop_status objprop_pipeline_save_state(const objprop_pipeline* pipeline, const char* path)
{
    OBJPROP_REQUIRE(pipeline && path, "null argument");
    return guarded([&] {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error(std::string("cannot write ") + path);
        out << pipeline->pipeline.save_state();
        if (!out)
            throw std::runtime_error(std::string("write failed: ") + path);
        return OBJPROP_OK;
    });
}

objprop_status objprop_pipeline_load_state(objprop_pipeline* pipeline, const char* path)
{
    OBJPROP_REQUIRE(pipeline && path, "null argument");
    return guarded([&] {
        const std::string bytes = read_file(path);
        try {
            pipeline->pipeline.load_state(bytes);
        } catch (const objprop::ParseError& e) {
            return fail(OBJPROP_ERR_STATE, e.what());
        } catch (const std::invalid_argument& e) {
            return fail(OBJPROP_ERR_STATE, e.what());
        }
        return OBJPROP_OK;
    });
}

objprop_status objprop_pipeline_finalize(const objprop_pipeline* pipeline, objprop_boxes** out)
{
    OBJPROP_REQUIRE(pipeline && out, "null argument");
    return guarded([&] {
        *out = new objprop_boxes{pipeline->pipeline.finalize().box_list()};
        return OBJPROP_OK;
    });
}

// ---- boxes ----

objprop_status objprop_boxes_read_json(const char* path, objprop_boxes** out)
{
    OBJPROP_REQUIRE(path && out, "null argument");
    return guarded([&] {
        *out = new objprop_boxes{objprop::read_boxes(path)};
        return OBJPROP_OK;
    });
}

objprop_status objprop_boxes_write_json(const objprop_boxes* boxes, const char* path)
{
    OBJPROP_REQUIRE(boxes && path, "null argument");
    return guarded([&] {
        objprop::write_boxes(path, boxes->boxes);
        return OBJPROP_OK;
    });
}

size_t objprop_boxes_count(const objprop_boxes* boxes) { return boxes ? boxes->boxes.size() : 0; }

objprop_status objprop_boxes_get(const objprop_boxes* boxes, size_t index, objprop_box* out)
{
    OBJPROP_REQUIRE(boxes && out, "null argument");
    OBJPROP_REQUIRE(index < boxes->boxes.size(), "box index out of range");
    const objprop::Box3D& b = boxes->boxes[index];
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out->rotation[3 * r + c] = b.rotation(r, c);
    for (int k = 0; k < 3; ++k) {
        out->min[k] = b.min[k];
        out->max[k] = b.max[k];
    }
    const auto corners = b.world_corners();
    for (int i = 0; i < 8; ++i)
        for (int k = 0; k < 3; ++k)
            out->corners[3 * i + k] = corners[static_cast<std::size_t>(i)][k];
    out->cluster_size = b.cluster_size;
    return OBJPROP_OK;
}

void objprop_boxes_destroy(objprop_boxes* boxes) { delete boxes; }

// ---- scenes ----

objprop_status objprop_scene_create(const char* preset, uint64_t seed, objprop_scene** out)
{
    OBJPROP_REQUIRE(preset && out, "null argument");
    return guarded([&] {
        *out = new objprop_scene{objprop::scene_preset(preset, seed)};
        return OBJPROP_OK;
    });
}

objprop_status objprop_scene_load(const char* path, objprop_scene** out)
{
    OBJPROP_REQUIRE(path && out, "null argument");
    return guarded([&] {
        objprop::SceneSpec spec;
        try {
            spec = objprop::read_scene(path);
        } catch (const objprop::ParseError& e) {
            throw objprop::ConfigError(e.what());
        }
        spec.validate();
        *out = new objprop_scene{std::move(spec)};
        return OBJPROP_OK;
    });
}

objprop_status objprop_scene_save(const objprop_scene* scene, const char* path)
{
    OBJPROP_REQUIRE(scene && path, "null argument");
    return guarded([&] {
        objprop::write_scene(path, scene->spec);
        return OBJPROP_OK;
    });
}

objprop_status objprop_scene_set(objprop_scene* scene, const char* key, const char* value)
{
    OBJPROP_REQUIRE(scene && key && value, "null argument");
    return guarded([&] {
        objprop::set_scene_value(scene->spec, key, value);
        return OBJPROP_OK;
    });
}

void objprop_scene_destroy(objprop_scene* scene) { delete scene; }

// ---- commands ----

objprop_status objprop_cmd_run(const objprop_config* config, const objprop_run_options* options,
                               objprop_run_summary* summary)
{
    OBJPROP_REQUIRE(config && options && options->manifest && options->out_dir, "null argument");
    return guarded([&] {
        objprop::RunOptions o;
        o.manifest = options->manifest;
        o.out_dir = options->out_dir;
        o.stop_after = options->stop_after;
        if (options->save_state)
            o.save_state = options->save_state;
        if (options->resume_state)
            o.resume_state = options->resume_state;
        o.verbose = options->verbose != 0;
        const objprop::RunSummary s = objprop::cmd_run(config->config, o);
        if (summary)
            *summary = {s.frames_processed, s.frames_skipped, s.global_points, s.boxes, s.mean_frame_seconds,
                        static_cast<int>(s.warnings.size())};
        return OBJPROP_OK;
    });
}

objprop_status objprop_cmd_eval(const objprop_eval_options* options, char* text, size_t size, size_t* needed)
{
    OBJPROP_REQUIRE(options && options->manifest && options->mode, "null argument");
    return guarded([&] {
        objprop::EvalOptions o;
        if (options->boxes)
            o.boxes = options->boxes;
        o.manifest = options->manifest;
        o.mode = options->mode;
        if (options->clusters)
            o.clusters = options->clusters;
        if (options->out_dir)
            o.out_dir = options->out_dir;
        o.top = options->top;
        if (o.mode != "proposals" && o.boxes.empty())
            throw std::invalid_argument("a boxes file is required for mode '" + o.mode + "'");
        return copy_out(objprop::cmd_eval(o).to_text(), text, size, needed);
    });
}

objprop_status objprop_cmd_synth(const objprop_scene* scene, const char* out_dir)
{
    OBJPROP_REQUIRE(scene && out_dir, "null argument");
    return guarded([&] {
        objprop::cmd_synth(scene->spec, out_dir);
        return OBJPROP_OK;
    });
}

objprop_status objprop_cmd_debug_heatmap(const objprop_config* config, const char* manifest, int frame,
                                         const char* out_dir)
{
    OBJPROP_REQUIRE(config && manifest && out_dir, "null argument");
    return guarded([&] {
        objprop::cmd_debug_heatmap(config->config, manifest, frame, out_dir);
        return OBJPROP_OK;
    });
}

}  // extern "C"
