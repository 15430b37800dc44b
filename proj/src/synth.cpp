#include "objprop/synth.hpp"
#include "objprop/config.hpp"
#include "objprop/seed.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace objprop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

struct Hit
{
    double t = kNoHit;
    int label = kEmptyLabel;
    Color color = Color::Zero();
};

// Entry distance of a ray into an axis-aligned box, kNoHit if missed.
double intersect_aabb(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi)
{
    double t0 = 0.0;
    double t1 = kNoHit;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] > hi[a])
                return kNoHit;
            continue;
        }
        double ta = (lo[a] - o[a]) / d[a];
        double tb = (hi[a] - o[a]) / d[a];
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1)
            return kNoHit;
    }
    return t0 > 0.0 ? t0 : kNoHit;
}

double intersect_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r)
{
    const Vec3 oc = o - c;
    const double a = d.squaredNorm();
    const double b = oc.dot(d);
    const double cc = oc.squaredNorm() - r * r;
    const double disc = b * b - a * cc;
    if (disc < 0.0)
        return kNoHit;
    const double s = std::sqrt(disc);
    const double t = (-b - s) / a;
    if (t > 0.0)
        return t;
    const double t2 = (-b + s) / a;
    return t2 > 0.0 ? t2 : kNoHit;
}

Vec3 sphere_center(const SceneSpec& spec, const SynthObject& o)
{
    return {o.x, spec.table_top() + o.radius, o.z};
}

void table_bounds(const SceneSpec& spec, Vec3& lo, Vec3& hi)
{
    lo = {spec.table_x - spec.table_width / 2, spec.table_height - spec.table_thickness,
          spec.table_z - spec.table_depth / 2};
    hi = {spec.table_x + spec.table_width / 2, spec.table_height, spec.table_z + spec.table_depth / 2};
}

Hit trace(const SceneSpec& spec, const Vec3& o, const Vec3& d)
{
    Hit hit;
    auto consider = [&](double t, int label, const Color& color) {
        if (t < hit.t) {
            hit.t = t;
            hit.label = label;
            hit.color = color;
        }
    };
    if (std::abs(d.y()) > 1e-15) {
        const double t = (spec.floor_height - o.y()) / d.y();
        if (t > 0.0) {
            const Vec3 p = o + t * d;
            if (std::abs(p.x() - spec.table_x) <= spec.floor_extent &&
                std::abs(p.z() - spec.table_z) <= spec.floor_extent)
                consider(t, kFloorLabel, kFloorColor);
        }
    }
    Vec3 lo, hi;
    table_bounds(spec, lo, hi);
    consider(intersect_aabb(o, d, lo, hi), kTableLabel, kTableColor);
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const SynthObject& obj = spec.objects[i];
        const int label = static_cast<int>(i) + 1;
        if (obj.shape == SynthObject::Shape::Box) {
            const Box3D b = object_box(spec, obj);
            consider(intersect_aabb(o, d, b.min, b.max), label, object_color(obj.color_id));
        } else {
            consider(intersect_sphere(o, d, sphere_center(spec, obj), obj.radius), label,
                     object_color(obj.color_id));
        }
    }
    return hit;
}

std::string shape_name(SynthObject::Shape s) { return s == SynthObject::Shape::Box ? "box" : "sphere"; }

std::string frame_name(int index, const char* ext)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d%s", index, ext);
    return buf;
}

}  // namespace

Color object_color(int color_id)
{
    static const Color palette[] = {{0.85f, 0.15f, 0.15f}, {0.15f, 0.70f, 0.20f}, {0.15f, 0.30f, 0.85f},
                                    {0.90f, 0.80f, 0.10f}, {0.70f, 0.20f, 0.75f}, {0.10f, 0.75f, 0.80f},
                                    {0.95f, 0.50f, 0.10f}, {0.95f, 0.95f, 0.95f}};
    const int n = static_cast<int>(std::size(palette));
    return palette[((color_id % n) + n) % n];
}

void SceneSpec::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw ConfigError(std::string("scene: ") + what);
    };
    intrinsics.validate();
    require(depth_scale > 0.0, "depth_scale must be positive");
    require(floor_extent > 0.0, "floor_extent must be positive");
    require(table_width > 0.0 && table_depth > 0.0 && table_thickness > 0.0, "table size must be positive");
    require(table_height - table_thickness > floor_height, "table must stand above the floor");
    require(trajectory == "orbit" || trajectory == "pan", "trajectory must be 'orbit' or 'pan'");
    require(frame_count > 0, "frame_count must be positive");
    require(fps > 0.0, "fps must be positive");
    require(orbit_radius > 0.0, "orbit_radius must be positive");
    require(pan_fraction >= 0.0 && pan_fraction < 1.0, "pan_fraction must be in [0, 1)");
    require(pose_noise_deg >= 0.0 && pose_noise_m >= 0.0, "pose noise must be non-negative");
    require(depth_sigma >= 0.0, "depth_sigma must be non-negative");
    require(missing_probability >= 0.0 && missing_probability <= 1.0, "missing_probability must be in [0, 1]");
    require(max_range > 0.0, "max_range must be positive");
    require(max_range * depth_scale <= 65535.0, "max_range exceeds the 16-bit depth range");
    require(jitter_px >= 0.0, "jitter_px must be non-negative");
    require(proposals_per_object >= 0 && distractor_count >= 0 && total_proposals >= 0,
            "proposal counts must be non-negative");
    require(object_conf_min >= 0.0 && object_conf_min <= object_conf_max, "object confidence range is invalid");
    require(distractor_conf_min > 0.0 && distractor_conf_min <= distractor_conf_max,
            "distractor confidence range is invalid");
    require(distractor_decay_count >= 2, "distractor_decay_count must be at least 2");
    require(distractor_min_size > 0.0 && distractor_min_size <= distractor_max_size && distractor_max_size <= 1.0,
            "distractor size range is invalid");
    require(distractor_max_iou >= 0.0, "distractor_max_iou must be non-negative");
    require(min_visible_pixels >= 1, "min_visible_pixels must be positive");
    require(gt_point_spacing > 0.0, "gt_point_spacing must be positive");
    for (const auto& o : objects) {
        if (o.shape == SynthObject::Shape::Box)
            require((o.size.array() > 0.0).all(), "object box size must be positive");
        else
            require(o.radius > 0.0, "object sphere radius must be positive");
    }
}

// --- presets -----------------------------------------------------------------

std::vector<SynthObject> random_objects(const SceneSpec& spec, int count, std::uint64_t seed, double separation)
{
    std::mt19937_64 rng(derive_seed(seed, {11}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double margin = 0.12;
    for (int restart = 0; restart < 100; ++restart) {
        std::vector<SynthObject> out;
        for (int i = 0; i < count; ++i) {
            SynthObject o;
            o.color_id = i;
            if (unit(rng) < 0.75) {
                o.shape = SynthObject::Shape::Box;
                o.size = {0.06 + 0.08 * unit(rng), 0.06 + 0.14 * unit(rng), 0.06 + 0.08 * unit(rng)};
            } else {
                o.shape = SynthObject::Shape::Sphere;
                o.radius = 0.035 + 0.025 * unit(rng);
                o.size = Vec3::Constant(2.0 * o.radius);
            }
            const double hx = o.size.x() / 2, hz = o.size.z() / 2;
            bool placed = false;
            for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
                const double ax = spec.table_width / 2 - margin - hx;
                const double az = spec.table_depth / 2 - margin - hz;
                if (ax <= 0.0 || az <= 0.0)
                    break;
                o.x = spec.table_x + (2.0 * unit(rng) - 1.0) * ax;
                o.z = spec.table_z + (2.0 * unit(rng) - 1.0) * az;
                placed = std::all_of(out.begin(), out.end(), [&](const SynthObject& p) {
                    return std::abs(o.x - p.x) >= hx + p.size.x() / 2 + separation ||
                           std::abs(o.z - p.z) >= hz + p.size.z() / 2 + separation;
                });
            }
            if (!placed)
                break;
            out.push_back(o);
        }
        if (static_cast<int>(out.size()) == count)
            return out;
    }
    throw ConfigError("cannot place " + std::to_string(count) + " objects on the table");
}

SceneSpec scene_preset(const std::string& name, std::uint64_t seed)
{
    SceneSpec spec;
    spec.seed = seed;
    if (name != "tabletop" && name != "pan")
        throw ConfigError("unknown scene preset '" + name + "'");
    const int count = 3 + static_cast<int>(derive_seed(seed, {7}) % 4);
    spec.objects = random_objects(spec, count, seed);
    if (name == "pan") {
        spec.trajectory = "pan";
        spec.span_deg = 180.0;
    }
    return spec;
}

// --- JSON --------------------------------------------------------------------

std::string scene_to_json(const SceneSpec& s)
{
    ordered_json j;
    j["seed"] = s.seed;
    j["intrinsics"] = {{"fx", s.intrinsics.fx}, {"fy", s.intrinsics.fy},       {"cx", s.intrinsics.cx},
                       {"cy", s.intrinsics.cy}, {"width", s.intrinsics.width}, {"height", s.intrinsics.height}};
    j["depth_scale"] = s.depth_scale;
    j["floor_height"] = s.floor_height;
    j["floor_extent"] = s.floor_extent;
    j["table_x"] = s.table_x;
    j["table_z"] = s.table_z;
    j["table_width"] = s.table_width;
    j["table_depth"] = s.table_depth;
    j["table_height"] = s.table_height;
    j["table_thickness"] = s.table_thickness;
    j["objects"] = ordered_json::array();
    for (const auto& o : s.objects) {
        ordered_json e;
        e["shape"] = shape_name(o.shape);
        e["x"] = o.x;
        e["z"] = o.z;
        if (o.shape == SynthObject::Shape::Box)
            e["size"] = {o.size.x(), o.size.y(), o.size.z()};
        else
            e["radius"] = o.radius;
        e["color_id"] = o.color_id;
        j["objects"].push_back(e);
    }
    j["trajectory"] = s.trajectory;
    j["frame_count"] = s.frame_count;
    j["fps"] = s.fps;
    j["orbit_radius"] = s.orbit_radius;
    j["camera_height"] = s.camera_height;
    j["start_deg"] = s.start_deg;
    j["span_deg"] = s.span_deg;
    j["pan_floor_distance"] = s.pan_floor_distance;
    j["pan_fraction"] = s.pan_fraction;
    j["pose_noise_deg"] = s.pose_noise_deg;
    j["pose_noise_m"] = s.pose_noise_m;
    j["depth_sigma"] = s.depth_sigma;
    j["missing_probability"] = s.missing_probability;
    j["max_range"] = s.max_range;
    j["jitter_px"] = s.jitter_px;
    j["proposals_per_object"] = s.proposals_per_object;
    j["distractor_count"] = s.distractor_count;
    j["total_proposals"] = s.total_proposals;
    j["object_conf_min"] = s.object_conf_min;
    j["object_conf_max"] = s.object_conf_max;
    j["distractor_conf_max"] = s.distractor_conf_max;
    j["distractor_conf_min"] = s.distractor_conf_min;
    j["distractor_decay_count"] = s.distractor_decay_count;
    j["distractor_min_size"] = s.distractor_min_size;
    j["distractor_max_size"] = s.distractor_max_size;
    j["distractor_max_iou"] = s.distractor_max_iou;
    j["min_visible_pixels"] = s.min_visible_pixels;
    j["gt_point_spacing"] = s.gt_point_spacing;
    return j.dump(2);
}

SceneSpec scene_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene: ") + e.what());
    }
    if (!j.is_object())
        throw ParseError("scene: expected an object");
    SceneSpec s;
    auto num = [&](const json& v, const std::string& key, auto& field) {
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer())
                throw ParseError("scene." + key + ": expected an integer");
        } else if (!v.is_number()) {
            throw ParseError("scene." + key + ": expected a number");
        }
        field = v.get<T>();
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "seed") num(v, key, s.seed);
        else if (key == "intrinsics") {
            if (!v.is_object())
                throw ParseError("scene.intrinsics: expected an object");
            for (const auto& [k, iv] : v.items()) {
                const std::string path = "intrinsics." + k;
                if (k == "fx") num(iv, path, s.intrinsics.fx);
                else if (k == "fy") num(iv, path, s.intrinsics.fy);
                else if (k == "cx") num(iv, path, s.intrinsics.cx);
                else if (k == "cy") num(iv, path, s.intrinsics.cy);
                else if (k == "width") num(iv, path, s.intrinsics.width);
                else if (k == "height") num(iv, path, s.intrinsics.height);
                else throw ParseError("scene." + path + ": unknown field");
            }
        }
        else if (key == "depth_scale") num(v, key, s.depth_scale);
        else if (key == "floor_height") num(v, key, s.floor_height);
        else if (key == "floor_extent") num(v, key, s.floor_extent);
        else if (key == "table_x") num(v, key, s.table_x);
        else if (key == "table_z") num(v, key, s.table_z);
        else if (key == "table_width") num(v, key, s.table_width);
        else if (key == "table_depth") num(v, key, s.table_depth);
        else if (key == "table_height") num(v, key, s.table_height);
        else if (key == "table_thickness") num(v, key, s.table_thickness);
        else if (key == "objects") {
            if (!v.is_array())
                throw ParseError("scene.objects: expected an array");
            for (std::size_t i = 0; i < v.size(); ++i) {
                const std::string p = "objects." + std::to_string(i);
                const json& e = v[i];
                if (!e.is_object())
                    throw ParseError("scene." + p + ": expected an object");
                SynthObject o;
                for (const auto& [k, ov] : e.items()) {
                    if (k == "shape") {
                        if (ov == "box") o.shape = SynthObject::Shape::Box;
                        else if (ov == "sphere") o.shape = SynthObject::Shape::Sphere;
                        else throw ParseError("scene." + p + ".shape: expected 'box' or 'sphere'");
                    }
                    else if (k == "x") num(ov, p + ".x", o.x);
                    else if (k == "z") num(ov, p + ".z", o.z);
                    else if (k == "radius") num(ov, p + ".radius", o.radius);
                    else if (k == "color_id") num(ov, p + ".color_id", o.color_id);
                    else if (k == "size") {
                        if (!ov.is_array() || ov.size() != 3)
                            throw ParseError("scene." + p + ".size: expected 3 numbers");
                        for (int a = 0; a < 3; ++a)
                            num(ov[static_cast<std::size_t>(a)], p + ".size", o.size[a]);
                    }
                    else throw ParseError("scene." + p + "." + k + ": unknown field");
                }
                if (o.shape == SynthObject::Shape::Sphere)
                    o.size = Vec3::Constant(2.0 * o.radius);
                s.objects.push_back(o);
            }
        }
        else if (key == "trajectory") {
            if (!v.is_string())
                throw ParseError("scene.trajectory: expected a string");
            s.trajectory = v.get<std::string>();
        }
        else if (key == "frame_count") num(v, key, s.frame_count);
        else if (key == "fps") num(v, key, s.fps);
        else if (key == "orbit_radius") num(v, key, s.orbit_radius);
        else if (key == "camera_height") num(v, key, s.camera_height);
        else if (key == "start_deg") num(v, key, s.start_deg);
        else if (key == "span_deg") num(v, key, s.span_deg);
        else if (key == "pan_floor_distance") num(v, key, s.pan_floor_distance);
        else if (key == "pan_fraction") num(v, key, s.pan_fraction);
        else if (key == "pose_noise_deg") num(v, key, s.pose_noise_deg);
        else if (key == "pose_noise_m") num(v, key, s.pose_noise_m);
        else if (key == "depth_sigma") num(v, key, s.depth_sigma);
        else if (key == "missing_probability") num(v, key, s.missing_probability);
        else if (key == "max_range") num(v, key, s.max_range);
        else if (key == "jitter_px") num(v, key, s.jitter_px);
        else if (key == "proposals_per_object") num(v, key, s.proposals_per_object);
        else if (key == "distractor_count") num(v, key, s.distractor_count);
        else if (key == "total_proposals") num(v, key, s.total_proposals);
        else if (key == "object_conf_min") num(v, key, s.object_conf_min);
        else if (key == "object_conf_max") num(v, key, s.object_conf_max);
        else if (key == "distractor_conf_max") num(v, key, s.distractor_conf_max);
        else if (key == "distractor_conf_min") num(v, key, s.distractor_conf_min);
        else if (key == "distractor_decay_count") num(v, key, s.distractor_decay_count);
        else if (key == "distractor_min_size") num(v, key, s.distractor_min_size);
        else if (key == "distractor_max_size") num(v, key, s.distractor_max_size);
        else if (key == "distractor_max_iou") num(v, key, s.distractor_max_iou);
        else if (key == "min_visible_pixels") num(v, key, s.min_visible_pixels);
        else if (key == "gt_point_spacing") num(v, key, s.gt_point_spacing);
        else throw ParseError("scene." + key + ": unknown field");
    }
    return s;
}

SceneSpec read_scene(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return scene_from_json(ss.str());
}

void write_scene(const std::filesystem::path& path, const SceneSpec& spec)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << scene_to_json(spec) << "\n";
}

void set_scene_value(SceneSpec& spec, const std::string& key, const std::string& value)
{
    json j = json::parse(scene_to_json(spec));
    json* node = &j;
    std::istringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(part);
            } catch (const std::exception&) {
                throw ConfigError("scene key '" + key + "': '" + part + "' is not an index");
            }
            if (idx >= node->size())
                throw ConfigError("scene key '" + key + "': index out of range");
            node = &(*node)[idx];
        } else if (node->is_object()) {
            if (!node->contains(part) && !(node->contains("shape") && (part == "size" || part == "radius")))
                throw ConfigError("unknown scene key '" + key + "'");
            node = &(*node)[part];
        } else {
            throw ConfigError("scene key '" + key + "' goes below a value");
        }
    }
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }
    *node = parsed;
    SceneSpec updated;
    try {
        updated = scene_from_json(j.dump());
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    updated.validate();
    spec = std::move(updated);
}

// --- camera path -------------------------------------------------------------

Pose look_at(const Vec3& eye, const Vec3& target)
{
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(kWorldUp);
    if (x.norm() < 1e-9)
        x = Vec3::UnitX();
    x.normalize();
    const Vec3 y = z.cross(x);
    Mat3 rcw;
    rcw.col(0) = x;
    rcw.col(1) = y;
    rcw.col(2) = z;
    return Pose::from_camera_to_world(rcw, eye);
}

Pose scene_pose(const SceneSpec& spec, int index)
{
    const Vec3 table_target(spec.table_x, spec.table_top(), spec.table_z);
    auto orbit_eye = [&](double deg) {
        const double a = deg * std::numbers::pi / 180.0;
        return Vec3(spec.table_x + spec.orbit_radius * std::cos(a), spec.camera_height,
                    spec.table_z + spec.orbit_radius * std::sin(a));
    };
    const int n = spec.frame_count;
    if (spec.trajectory == "pan") {
        const int pan_frames = static_cast<int>(std::lround(spec.pan_fraction * n));
        const Vec3 eye = orbit_eye(spec.start_deg);
        if (index < pan_frames) {
            // Start on the floor beside the camera, facing away from the table.
            const Vec3 to_table = Vec3(table_target.x() - eye.x(), 0.0, table_target.z() - eye.z()).normalized();
            const Vec3 side = to_table.cross(kWorldUp).normalized();
            const Vec3 floor_target =
                Vec3(eye.x(), spec.floor_height, eye.z()) + spec.pan_floor_distance * (side - 0.3 * to_table);
            const double s = pan_frames > 1 ? static_cast<double>(index) / (pan_frames - 1) : 1.0;
            return look_at(eye, (1.0 - s) * floor_target + s * table_target);
        }
        const int rest = n - pan_frames;
        const double s = rest > 1 ? static_cast<double>(index - pan_frames) / (rest - 1) : 0.0;
        return look_at(orbit_eye(spec.start_deg + s * spec.span_deg), table_target);
    }
    const double s = n > 1 ? static_cast<double>(index) / (n - 1) : 0.0;
    return look_at(orbit_eye(spec.start_deg + s * spec.span_deg), table_target);
}

// --- rendering ---------------------------------------------------------------

RenderedView render_view(const SceneSpec& spec, const Pose& pose, std::uint64_t noise_seed, bool with_noise)
{
    const Intrinsics& K = spec.intrinsics;
    RenderedView view{DepthImage(K.width, K.height, 0.0f), ColorImage(K.width, K.height, Color::Zero()),
                      LabelImage(K.width, K.height, kEmptyLabel)};
    const Vec3 origin = pose.camera_center();
    const Mat3 rcw = pose.R.transpose();
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool noisy = with_noise && (spec.depth_sigma > 0.0 || spec.missing_probability > 0.0);
    for (int v = 0; v < K.height; ++v) {
        for (int u = 0; u < K.width; ++u) {
            // Direction with unit camera z, so the hit distance is the depth.
            const Vec3 d = rcw * Vec3((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
            const Hit hit = trace(spec, origin, d);
            double z = 0.0;
            if (hit.t <= spec.max_range) {
                view.labels(u, v) = hit.label;
                view.color(u, v) = hit.color;
                z = hit.t;
            }
            if (noisy) {
                const double n = gauss(rng);
                const double drop = unit(rng);
                if (z > 0.0) {
                    z += spec.depth_sigma * n;
                    if (drop < spec.missing_probability || z <= 0.0)
                        z = 0.0;
                }
            }
            view.depth(u, v) = static_cast<float>(z);
        }
    }
    return view;
}

RenderedFrame render_frame(const SceneSpec& spec, int index)
{
    if (index < 0 || index >= spec.frame_count)
        throw std::out_of_range("frame index " + std::to_string(index) + " out of range");
    RenderedFrame out;
    out.true_pose = scene_pose(spec, index);
    RenderedView view = render_view(spec, out.true_pose, derive_seed(spec.seed, {static_cast<std::uint64_t>(index), 1}));
    out.labels = std::move(view.labels);
    out.record.index = index;
    out.record.timestamp = index / spec.fps;
    out.record.depth = std::move(view.depth);
    out.record.color = std::move(view.color);
    out.record.pose = out.true_pose;
    if (spec.pose_noise_deg > 0.0 || spec.pose_noise_m > 0.0) {
        std::mt19937_64 rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(index), 4}));
        std::normal_distribution<double> gauss(0.0, 1.0);
        const Vec3 axis = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
        const double angle = spec.pose_noise_deg * std::numbers::pi / 180.0 * gauss(rng);
        const Vec3 shift = spec.pose_noise_m * Vec3(gauss(rng), gauss(rng), gauss(rng));
        const Mat3 dr = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
        const Mat3 rcw = dr * out.true_pose.R.transpose();
        out.record.pose = Pose::from_camera_to_world(rcw, out.true_pose.camera_center() + shift);
    }
    const auto boxes = visible_object_boxes(out.labels, spec.min_visible_pixels);
    out.record.proposals = emit_proposals(spec, index, boxes);
    return out;
}

std::vector<LabeledBox2D> visible_object_boxes(const LabelImage& labels, int min_visible_pixels)
{
    struct Extent
    {
        int umin = std::numeric_limits<int>::max(), vmin = std::numeric_limits<int>::max();
        int umax = -1, vmax = -1;
        long count = 0;
    };
    std::vector<Extent> extents;
    for (int v = 0; v < labels.height(); ++v)
        for (int u = 0; u < labels.width(); ++u) {
            const int l = labels(u, v);
            if (l <= 0)
                continue;
            if (static_cast<int>(extents.size()) < l)
                extents.resize(static_cast<std::size_t>(l));
            Extent& e = extents[static_cast<std::size_t>(l - 1)];
            e.umin = std::min(e.umin, u);
            e.vmin = std::min(e.vmin, v);
            e.umax = std::max(e.umax, u);
            e.vmax = std::max(e.vmax, v);
            ++e.count;
        }
    std::vector<LabeledBox2D> out;
    for (std::size_t i = 0; i < extents.size(); ++i) {
        const Extent& e = extents[i];
        if (e.count < min_visible_pixels)
            continue;
        out.push_back({static_cast<int>(i) + 1,
                       EvalBox2D{double(e.umin), double(e.vmin), double(e.umax - e.umin + 1), double(e.vmax - e.vmin + 1)}});
    }
    return out;
}

std::vector<Proposal2D> emit_proposals(const SceneSpec& spec, int index, std::span<const LabeledBox2D> objects)
{
    const int W = spec.intrinsics.width;
    const int H = spec.intrinsics.height;
    const auto frame = static_cast<std::uint64_t>(index);
    std::vector<Proposal2D> out;

    std::mt19937_64 jitter_rng(derive_seed(spec.seed, {frame, 3}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& obj : objects) {
        for (int k = 0; k < spec.proposals_per_object; ++k) {
            const double jx = gauss(jitter_rng), jy = gauss(jitter_rng);
            const double jw = gauss(jitter_rng), jh = gauss(jitter_rng);
            const double conf = spec.object_conf_min + (spec.object_conf_max - spec.object_conf_min) * unit(jitter_rng);
            Proposal2D p;
            p.x = static_cast<int>(std::lround(obj.box.x + spec.jitter_px * jx));
            p.y = static_cast<int>(std::lround(obj.box.y + spec.jitter_px * jy));
            p.w = std::max(1, static_cast<int>(std::lround(obj.box.w + spec.jitter_px * jw)));
            p.h = std::max(1, static_cast<int>(std::lround(obj.box.h + spec.jitter_px * jh)));
            p.confidence = conf;
            if (const auto c = clip_to_image(p, W, H))
                out.push_back(*c);
        }
    }

    const int object_count = static_cast<int>(out.size());
    const int distractors =
        spec.total_proposals > 0 ? std::max(0, spec.total_proposals - object_count) : spec.distractor_count;
    std::mt19937_64 rng(derive_seed(spec.seed, {frame, 2}));
    const double ratio =
        std::pow(spec.distractor_conf_min / spec.distractor_conf_max, 1.0 / (spec.distractor_decay_count - 1));
    for (int i = 0; i < distractors; ++i) {
        Proposal2D p;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const double sw = spec.distractor_min_size + (spec.distractor_max_size - spec.distractor_min_size) * unit(rng);
            const double sh = spec.distractor_min_size + (spec.distractor_max_size - spec.distractor_min_size) * unit(rng);
            p.w = std::max(1, static_cast<int>(std::lround(sw * W)));
            p.h = std::max(1, static_cast<int>(std::lround(sh * H)));
            p.x = static_cast<int>(std::floor(unit(rng) * (W - p.w + 1)));
            p.y = static_cast<int>(std::floor(unit(rng) * (H - p.h + 1)));
            const EvalBox2D b{double(p.x), double(p.y), double(p.w), double(p.h)};
            const bool clear = std::none_of(objects.begin(), objects.end(), [&](const LabeledBox2D& o) {
                return iou2d(b, o.box) > spec.distractor_max_iou;
            });
            if (clear)
                break;
        }
        p.confidence = spec.distractor_conf_max * std::pow(ratio, i);
        out.push_back(p);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Proposal2D& a, const Proposal2D& b) { return a.confidence > b.confidence; });
    return out;
}

// --- ground truth ------------------------------------------------------------

Box3D object_box(const SceneSpec& spec, const SynthObject& o)
{
    Box3D box;
    if (o.shape == SynthObject::Shape::Box) {
        box.min = {o.x - o.size.x() / 2, spec.table_top(), o.z - o.size.z() / 2};
        box.max = {o.x + o.size.x() / 2, spec.table_top() + o.size.y(), o.z + o.size.z() / 2};
    } else {
        const Vec3 c = sphere_center(spec, o);
        box.min = c.array() - o.radius;
        box.max = c.array() + o.radius;
    }
    return box;
}

namespace {

// Grid samples on the rectangle origin + s*a + t*b, s,t in [0,1].
template <typename Keep>
void sample_face(std::vector<LabeledPoint>& out, const Vec3& origin, const Vec3& a, const Vec3& b, double spacing,
                 int label, Keep keep)
{
    const int na = std::max(2, static_cast<int>(std::ceil(a.norm() / spacing)) + 1);
    const int nb = std::max(2, static_cast<int>(std::ceil(b.norm() / spacing)) + 1);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            const Vec3 p = origin + (double(i) / (na - 1)) * a + (double(j) / (nb - 1)) * b;
            if (keep(p))
                out.push_back({p, label, label > 0});
        }
}

// Box faces except the bottom one.
template <typename Keep>
void sample_box(std::vector<LabeledPoint>& out, const Vec3& lo, const Vec3& hi, double spacing, int label, Keep keep)
{
    const Vec3 e = hi - lo;
    const Vec3 ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
    sample_face(out, Vec3(lo.x(), hi.y(), lo.z()), ex, ez, spacing, label, keep);  // top
    sample_face(out, lo, ex, ey, spacing, label, keep);                            // z = min
    sample_face(out, Vec3(lo.x(), lo.y(), hi.z()), ex, ey, spacing, label, keep);  // z = max
    sample_face(out, lo, ez, ey, spacing, label, keep);                            // x = min
    sample_face(out, Vec3(hi.x(), lo.y(), lo.z()), ez, ey, spacing, label, keep);  // x = max
}

}  // namespace

SceneGroundTruth emit_ground_truth(const SceneSpec& spec)
{
    SceneGroundTruth gt;
    const double s = spec.gt_point_spacing;
    auto all = [](const Vec3&) { return true; };
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const SynthObject& o = spec.objects[i];
        const int label = static_cast<int>(i) + 1;
        const Box3D box = object_box(spec, o);
        gt.boxes.push_back({label, box});
        if (o.shape == SynthObject::Shape::Box) {
            sample_box(gt.points, box.min, box.max, s, label, all);
        } else {
            // Fibonacci sphere.
            const Vec3 c = sphere_center(spec, o);
            const int n = std::max(20, static_cast<int>(std::ceil(4.0 * std::numbers::pi * o.radius * o.radius / (s * s))));
            const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
            for (int k = 0; k < n; ++k) {
                const double y = 1.0 - 2.0 * (k + 0.5) / n;
                const double r = std::sqrt(1.0 - y * y);
                const double phi = golden * k;
                gt.points.push_back({c + o.radius * Vec3(r * std::cos(phi), y, r * std::sin(phi)), label, true});
            }
        }
    }
    // Table: leave out the footprints of the objects standing on it.
    auto off_footprints = [&](const Vec3& p) {
        if (std::abs(p.y() - spec.table_top()) > 1e-9)
            return true;
        for (const auto& o : spec.objects) {
            if (o.shape != SynthObject::Shape::Box)
                continue;
            if (std::abs(p.x() - o.x) <= o.size.x() / 2 && std::abs(p.z() - o.z) <= o.size.z() / 2)
                return false;
        }
        return true;
    };
    Vec3 lo, hi;
    table_bounds(spec, lo, hi);
    sample_box(gt.points, lo, hi, s, kTableLabel, off_footprints);
    // Floor around the table, without the part under it.
    const double margin = 1.0;
    const double fs = 2.0 * s;
    const Vec3 f0(lo.x() - margin, spec.floor_height, lo.z() - margin);
    sample_face(gt.points, f0, Vec3(hi.x() - lo.x() + 2 * margin, 0, 0), Vec3(0, 0, hi.z() - lo.z() + 2 * margin), fs,
                kFloorLabel, [&](const Vec3& p) {
                    return p.x() < lo.x() || p.x() > hi.x() || p.z() < lo.z() || p.z() > hi.z();
                });
    return gt;
}

std::filesystem::path write_sequence(const SceneSpec& spec, const std::filesystem::path& out_dir)
{
    namespace fs = std::filesystem;
    spec.validate();
    fs::create_directories(out_dir / "rgb");
    fs::create_directories(out_dir / "depth");
    fs::create_directories(out_dir / "proposals");
    fs::create_directories(out_dir / "gt" / "boxes2d");

    SequenceManifest manifest;
    manifest.root = out_dir;
    manifest.ground_truth = GroundTruthPaths{"gt/boxes.json", "gt/points.ply", "gt/boxes2d"};
    std::vector<StampedPose> trajectory;
    for (int i = 0; i < spec.frame_count; ++i) {
        const RenderedFrame frame = render_frame(spec, i);
        const std::string color = "rgb/" + frame_name(i, ".png");
        const std::string depth = "depth/" + frame_name(i, ".png");
        write_png_rgb8(out_dir / color, color_to_rgb8(frame.record.color));
        write_png_gray16(out_dir / depth, depth_to_raw(frame.record.depth, spec.depth_scale));
        write_proposals(manifest.proposals_path(i), frame.record.proposals);
        const auto boxes = visible_object_boxes(frame.labels, spec.min_visible_pixels);
        write_boxes2d(manifest.boxes2d_path(i), boxes);
        manifest.frames.push_back({frame.record.timestamp, color, depth});
        trajectory.push_back({frame.record.timestamp, frame.record.pose});
    }
    write_trajectory(out_dir / manifest.trajectory, trajectory);
    write_camera_file(out_dir / manifest.camera, CameraFile{spec.intrinsics, spec.depth_scale});

    const SceneGroundTruth gt = emit_ground_truth(spec);
    write_ground_truth_boxes(out_dir / manifest.ground_truth->boxes, gt.boxes);
    PlyCloud cloud;
    std::vector<int> labels;
    for (const auto& p : gt.points) {
        cloud.positions.push_back(p.position);
        cloud.colors.push_back(label_color(p.label));
        labels.push_back(p.label);
    }
    cloud.int_properties.push_back({"label", std::move(labels)});
    write_ply(out_dir / manifest.ground_truth->points, cloud);
    write_scene(out_dir / "scene.json", spec);

    const fs::path manifest_path = out_dir / "manifest.json";
    write_manifest(manifest_path, manifest);
    return manifest_path;
}

}  // namespace objprop
