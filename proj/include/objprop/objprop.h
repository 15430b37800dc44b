/* C interface of the objprop library. All functions return an objprop_status;
 * on failure objprop_last_error() describes the problem (per thread). Handles
 * are opaque and must be released with the matching destroy function. */
#ifndef OBJPROP_H
#define OBJPROP_H

#include <stddef.h>
#include <stdint.h>

#if defined(OBJPROP_BUILDING_LIBRARY)
#define OBJPROP_API __attribute__((visibility("default")))
#else
#define OBJPROP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum objprop_status {
    OBJPROP_OK = 0,
    OBJPROP_ERR_INVALID_ARGUMENT = 1,
    OBJPROP_ERR_INVALID_CONFIG = 2,
    OBJPROP_ERR_IO = 3,
    OBJPROP_ERR_PARSE = 4,
    OBJPROP_ERR_STATE = 5,
    OBJPROP_ERR_INTERNAL = 6
} objprop_status;

OBJPROP_API const char* objprop_version(void);
OBJPROP_API const char* objprop_status_string(objprop_status status);
/* Message of the last failed call on this thread, "" if none. */
OBJPROP_API const char* objprop_last_error(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct objprop_config objprop_config;

OBJPROP_API objprop_status objprop_config_create(objprop_config** out);
OBJPROP_API void objprop_config_destroy(objprop_config* config);
OBJPROP_API objprop_status objprop_config_set(objprop_config* config, const char* key, const char* value);
/* Copies the value (NUL terminated) into buf; *needed receives the required
 * size including the terminator. A NULL buf with size 0 only queries the
 * size; a buffer that is too small gives OBJPROP_ERR_INVALID_ARGUMENT. */
OBJPROP_API objprop_status objprop_config_get(const objprop_config* config,
                                              const char* key,
                                              char* buf,
                                              size_t size,
                                              size_t* needed);
OBJPROP_API objprop_status objprop_config_validate(const objprop_config* config);
OBJPROP_API objprop_status objprop_config_load(objprop_config* config, const char* path);
OBJPROP_API objprop_status objprop_config_save(const objprop_config* config, const char* path);
OBJPROP_API size_t objprop_config_key_count(void);
OBJPROP_API const char* objprop_config_key_name(size_t index);
OBJPROP_API const char* objprop_config_key_help(size_t index);

/* ---- online pipeline -------------------------------------------------- */

typedef struct objprop_intrinsics {
    double fx, fy, cx, cy;
    int width, height;
} objprop_intrinsics;

typedef struct objprop_proposal {
    int x, y, w, h;
    double confidence;
} objprop_proposal;

typedef struct objprop_frame_timing {
    double proposal_filtering;
    double plane_removal;
    double fusion_match;
    double fusion_confidence_frequency;
    double fusion_location_color;
    double total;
} objprop_frame_timing;

/* Gravity-aligned box: p_gravity = rotation * p_world, extent [min, max]. */
typedef struct objprop_box {
    double rotation[9]; /* row-major */
    double min[3];
    double max[3];
    double corners[24]; /* 8 world-frame corners */
    long long cluster_size;
} objprop_box;

typedef struct objprop_pipeline objprop_pipeline;
typedef struct objprop_boxes objprop_boxes;

OBJPROP_API objprop_status objprop_pipeline_create(const objprop_config* config,
                                                   const objprop_intrinsics* intrinsics,
                                                   objprop_pipeline** out);
OBJPROP_API void objprop_pipeline_destroy(objprop_pipeline* pipeline);
/* color: width*height*3 floats in [0, 1], row-major RGB. depth: width*height
 * meters, 0 for missing. pose: world-to-camera [R | t], 3x4 row-major. */
OBJPROP_API objprop_status objprop_pipeline_push_frame(objprop_pipeline* pipeline,
                                                       const float* color,
                                                       const float* depth,
                                                       const double pose[12],
                                                       const objprop_proposal* proposals,
                                                       size_t proposal_count,
                                                       objprop_frame_timing* timing);
OBJPROP_API objprop_status objprop_pipeline_frame_count(const objprop_pipeline* pipeline, int* out);
OBJPROP_API objprop_status objprop_pipeline_point_count(const objprop_pipeline* pipeline, size_t* out);
OBJPROP_API objprop_status objprop_pipeline_save_state(const objprop_pipeline* pipeline, const char* path);
OBJPROP_API objprop_status objprop_pipeline_load_state(objprop_pipeline* pipeline, const char* path);
OBJPROP_API objprop_status objprop_pipeline_finalize(const objprop_pipeline* pipeline, objprop_boxes** out);

OBJPROP_API objprop_status objprop_boxes_read_json(const char* path, objprop_boxes** out);
OBJPROP_API objprop_status objprop_boxes_write_json(const objprop_boxes* boxes, const char* path);
OBJPROP_API size_t objprop_boxes_count(const objprop_boxes* boxes);
OBJPROP_API objprop_status objprop_boxes_get(const objprop_boxes* boxes, size_t index, objprop_box* out);
OBJPROP_API void objprop_boxes_destroy(objprop_boxes* boxes);

/* ---- synthetic scenes ------------------------------------------------- */

typedef struct objprop_scene objprop_scene;

/* Presets: "tabletop", "pan". */
OBJPROP_API objprop_status objprop_scene_create(const char* preset, uint64_t seed, objprop_scene** out);
OBJPROP_API objprop_status objprop_scene_load(const char* path, objprop_scene** out);
OBJPROP_API objprop_status objprop_scene_save(const objprop_scene* scene, const char* path);
/* Dotted JSON key, e.g. "frame_count", "intrinsics.width", "objects.0.x". */
OBJPROP_API objprop_status objprop_scene_set(objprop_scene* scene, const char* key, const char* value);
OBJPROP_API void objprop_scene_destroy(objprop_scene* scene);

/* ---- commands --------------------------------------------------------- */

typedef struct objprop_run_options {
    const char* manifest;
    const char* out_dir;
    int stop_after;           /* frames to process, -1 for all */
    const char* save_state;   /* optional */
    const char* resume_state; /* optional */
    int verbose;
} objprop_run_options;

typedef struct objprop_run_summary {
    int frames_processed;
    int frames_skipped;
    long long global_points;
    int boxes;
    double mean_frame_seconds;
    int warnings;
} objprop_run_summary;

OBJPROP_API objprop_status objprop_cmd_run(const objprop_config* config,
                                           const objprop_run_options* options,
                                           objprop_run_summary* summary);

typedef struct objprop_eval_options {
    const char* boxes;    /* boxes JSON, unused in "proposals" mode */
    const char* manifest; /* sequence with ground truth */
    const char* mode;     /* "2d", "3d", "points" or "proposals" */
    const char* clusters; /* optional clusters PLY for "2d" */
    const char* out_dir;  /* optional report directory */
    int top;              /* "proposals": top-N per frame, 0 for all */
} objprop_eval_options;

/* The text report is copied into text (if it fits), see objprop_config_get. */
OBJPROP_API objprop_status objprop_cmd_eval(const objprop_eval_options* options,
                                            char* text,
                                            size_t size,
                                            size_t* needed);
OBJPROP_API objprop_status objprop_cmd_synth(const objprop_scene* scene, const char* out_dir);
OBJPROP_API objprop_status objprop_cmd_debug_heatmap(const objprop_config* config,
                                                     const char* manifest,
                                                     int frame,
                                                     const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* OBJPROP_H */
