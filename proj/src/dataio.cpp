#include "objprop/dataio.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace objprop {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& text)
{
    const std::string t = trim(text);
    if (t.empty())
        return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep))
        out.push_back(field);
    if (!line.empty() && line.back() == sep)
        out.emplace_back();
    return out;
}

std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- JSON schema helpers -----------------------------------------------------

const json& member(const json& obj, const char* key, const std::string& path)
{
    if (!obj.is_object())
        throw ParseError(path + ": expected an object");
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(path + "." + key + ": missing field");
    return *it;
}

double number_at(const json& value, const std::string& path)
{
    if (!value.is_number())
        throw ParseError(path + ": expected a finite number");
    const double v = value.get<double>();
    if (!std::isfinite(v))
        throw ParseError(path + ": expected a finite number");
    return v;
}

std::vector<double> numbers_at(const json& value, std::size_t count, const std::string& path)
{
    if (!value.is_array() || value.size() != count)
        throw ParseError(path + ": expected an array of " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(number_at(value[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Vec3 vec3_at(const json& value, const std::string& path)
{
    const auto v = numbers_at(value, 3, path);
    return {v[0], v[1], v[2]};
}

ordered_json box_json(const Box3D& box)
{
    if (!box.rotation.allFinite() || !box.min.allFinite() || !box.max.allFinite())
        throw std::invalid_argument("box with non-finite values cannot be serialized");
    ordered_json j;
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            rot.push_back(box.rotation(r, c));
    j["rotation"] = rot;
    j["min"] = {box.min.x(), box.min.y(), box.min.z()};
    j["max"] = {box.max.x(), box.max.y(), box.max.z()};
    ordered_json corners = ordered_json::array();
    for (const Vec3& c : box.world_corners())
        corners.push_back({c.x(), c.y(), c.z()});
    j["corners"] = corners;
    j["cluster_size"] = box.cluster_size;
    return j;
}

Box3D box_from(const json& j, const std::string& path)
{
    Box3D box;
    const auto rot = numbers_at(member(j, "rotation", path), 9, path + ".rotation");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            box.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
    if (!Pose{box.rotation, Vec3::Zero()}.valid(1e-6))
        throw ParseError(path + ".rotation: not a rotation matrix");
    box.min = vec3_at(member(j, "min", path), path + ".min");
    box.max = vec3_at(member(j, "max", path), path + ".max");
    if ((box.min.array() > box.max.array()).any())
        throw ParseError(path + ": min exceeds max");
    const json& corners = member(j, "corners", path);
    if (!corners.is_array() || corners.size() != 8)
        throw ParseError(path + ".corners: expected 8 corners");
    const auto expected = box.world_corners();
    for (std::size_t i = 0; i < 8; ++i) {
        const std::string cpath = path + ".corners[" + std::to_string(i) + "]";
        const Vec3 c = vec3_at(corners[i], cpath);
        if ((c - expected[i]).norm() > 1e-6)
            throw ParseError(cpath + ": inconsistent with rotation/min/max");
    }
    const json& size = member(j, "cluster_size", path);
    if (!size.is_number_integer() || size.get<long>() < 0)
        throw ParseError(path + ".cluster_size: expected a non-negative integer");
    box.cluster_size = size.get<long>();
    return box;
}

json parse_json(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": " + e.what());
    }
}

}  // namespace

// --- camera ------------------------------------------------------------------

CameraFile read_camera_file(const std::filesystem::path& path)
{
    std::istringstream in(read_text(path));
    CameraFile cam;
    std::string line;
    int line_no = 0;
    bool seen[7] = {};
    const char* keys[7] = {"fx", "fy", "cx", "cy", "width", "height", "depth_scale"};
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const auto value = parse_number(line.substr(eq + 1));
        if (!value)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": value of '" + key +
                             "' is not a number");
        const auto k = std::find(std::begin(keys), std::end(keys), key) - std::begin(keys);
        switch (k) {
        case 0: cam.intrinsics.fx = *value; break;
        case 1: cam.intrinsics.fy = *value; break;
        case 2: cam.intrinsics.cx = *value; break;
        case 3: cam.intrinsics.cy = *value; break;
        case 4: cam.intrinsics.width = static_cast<int>(*value); break;
        case 5: cam.intrinsics.height = static_cast<int>(*value); break;
        case 6: cam.depth_scale = *value; break;
        default:
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        seen[k] = true;
    }
    for (int k = 0; k < 6; ++k)
        if (!seen[k])
            throw ParseError(path.string() + ": missing key '" + keys[k] + "'");
    if (!cam.intrinsics.valid())
        throw ParseError(path.string() + ": invalid intrinsics");
    if (!(cam.depth_scale > 0.0))
        throw ParseError(path.string() + ": depth_scale must be positive");
    return cam;
}

void write_camera_file(const std::filesystem::path& path, const CameraFile& camera)
{
    std::ostringstream os;
    const Intrinsics& K = camera.intrinsics;
    os << "# pinhole intrinsics in pixels\n"
       << "fx = " << fmt_double(K.fx) << "\n"
       << "fy = " << fmt_double(K.fy) << "\n"
       << "cx = " << fmt_double(K.cx) << "\n"
       << "cy = " << fmt_double(K.cy) << "\n"
       << "width = " << K.width << "\n"
       << "height = " << K.height << "\n"
       << "# stored depth units per meter\n"
       << "depth_scale = " << fmt_double(camera.depth_scale) << "\n";
    write_text(path, os.str());
}

// --- trajectory --------------------------------------------------------------

std::vector<StampedPose> read_trajectory(const std::filesystem::path& path)
{
    std::istringstream in(read_text(path));
    std::vector<StampedPose> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream fields(line);
        std::vector<double> v;
        std::string tok;
        while (fields >> tok) {
            const auto n = parse_number(tok);
            if (!n)
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed pose line");
            v.push_back(*n);
        }
        if (v.size() != 8)
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": expected 'timestamp tx ty tz qx qy qz qw'");
        Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
        if (!(q.norm() > 1e-12))
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": zero quaternion");
        q.normalize();
        out.push_back({v[0], Pose::from_camera_to_world(q.toRotationMatrix(), Vec3(v[1], v[2], v[3]))});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const StampedPose& a, const StampedPose& b) { return a.timestamp < b.timestamp; });
    return out;
}

void write_trajectory(const std::filesystem::path& path, std::span<const StampedPose> poses)
{
    std::ostringstream os;
    os << "# timestamp tx ty tz qx qy qz qw (camera-to-world)\n";
    for (const auto& sp : poses) {
        const Vec3 c = sp.pose.camera_center();
        const Eigen::Quaterniond q(Mat3(sp.pose.R.transpose()));
        os << fmt_double(sp.timestamp) << ' ' << fmt_double(c.x()) << ' ' << fmt_double(c.y()) << ' '
           << fmt_double(c.z()) << ' ' << fmt_double(q.x()) << ' ' << fmt_double(q.y()) << ' ' << fmt_double(q.z())
           << ' ' << fmt_double(q.w()) << '\n';
    }
    write_text(path, os.str());
}

// --- manifest ----------------------------------------------------------------

std::filesystem::path SequenceManifest::proposals_path(int frame_index) const
{
    char name[32];
    std::snprintf(name, sizeof name, "%06d.csv", frame_index);
    return root / proposals_dir / name;
}

std::filesystem::path SequenceManifest::boxes2d_path(int frame_index) const
{
    if (!ground_truth || ground_truth->boxes2d_dir.empty())
        return {};
    char name[32];
    std::snprintf(name, sizeof name, "%06d.csv", frame_index);
    return root / ground_truth->boxes2d_dir / name;
}

SequenceManifest read_manifest(const std::filesystem::path& path)
{
    const json j = parse_json(read_text(path), path.string());
    SequenceManifest m;
    m.root = path.parent_path();
    const std::string base = "manifest";
    auto string_at = [&](const char* key, const std::string& fallback) {
        if (!j.contains(key))
            return fallback;
        if (!j[key].is_string())
            throw ParseError(base + "." + key + ": expected a string");
        return j[key].get<std::string>();
    };
    m.camera = string_at("camera", m.camera);
    m.trajectory = string_at("trajectory", m.trajectory);
    m.proposals_dir = string_at("proposals_dir", m.proposals_dir);
    if (j.contains("pose_tolerance"))
        m.pose_tolerance = number_at(j["pose_tolerance"], base + ".pose_tolerance");
    const json& frames = member(j, "frames", base);
    if (!frames.is_array() || frames.empty())
        throw ParseError(base + ".frames: expected a non-empty array");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string p = base + ".frames[" + std::to_string(i) + "]";
        FrameEntry e;
        e.timestamp = number_at(member(frames[i], "timestamp", p), p + ".timestamp");
        const json& color = member(frames[i], "color", p);
        const json& depth = member(frames[i], "depth", p);
        if (!color.is_string() || !depth.is_string())
            throw ParseError(p + ": color and depth must be strings");
        e.color = color.get<std::string>();
        e.depth = depth.get<std::string>();
        if (!m.frames.empty() && e.timestamp < m.frames.back().timestamp)
            throw ParseError(p + ".timestamp: frames are not time-ordered");
        m.frames.push_back(std::move(e));
    }
    if (j.contains("ground_truth")) {
        const json& g = j["ground_truth"];
        GroundTruthPaths gt;
        auto opt = [&](const char* key) {
            if (!g.contains(key))
                return std::string{};
            if (!g[key].is_string())
                throw ParseError(base + ".ground_truth." + key + ": expected a string");
            return g[key].get<std::string>();
        };
        gt.boxes = opt("boxes");
        gt.points = opt("points");
        gt.boxes2d_dir = opt("boxes2d_dir");
        m.ground_truth = gt;
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const SequenceManifest& m)
{
    ordered_json j;
    j["camera"] = m.camera;
    j["trajectory"] = m.trajectory;
    j["proposals_dir"] = m.proposals_dir;
    j["pose_tolerance"] = m.pose_tolerance;
    j["frames"] = ordered_json::array();
    for (const auto& f : m.frames)
        j["frames"].push_back({{"timestamp", f.timestamp}, {"color", f.color}, {"depth", f.depth}});
    if (m.ground_truth) {
        j["ground_truth"] = {{"boxes", m.ground_truth->boxes},
                             {"points", m.ground_truth->points},
                             {"boxes2d_dir", m.ground_truth->boxes2d_dir}};
    }
    write_text(path, j.dump(2) + "\n");
}

// --- proposals ---------------------------------------------------------------

std::vector<Proposal2D> parse_proposals(std::istream& in,
                                        const std::string& source,
                                        int width,
                                        int height,
                                        ProposalReadStats* stats)
{
    std::vector<Proposal2D> out;
    ProposalReadStats s;
    std::string line;
    int line_no = 0;
    bool first_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto fields = split(line, ',');
        std::vector<double> v;
        bool numeric = fields.size() == 5;
        for (const auto& f : fields) {
            const auto n = parse_number(f);
            if (!n) {
                numeric = false;
                break;
            }
            v.push_back(*n);
        }
        if (!numeric) {
            if (first_row) {  // header
                first_row = false;
                continue;
            }
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected 5 numeric columns x,y,w,h,c");
        }
        first_row = false;
        const Proposal2D p{static_cast<int>(std::lround(v[0])), static_cast<int>(std::lround(v[1])),
                           static_cast<int>(std::lround(v[2])), static_cast<int>(std::lround(v[3])), v[4]};
        if (p.w <= 0 || p.h <= 0)
            throw ParseError(source + ":" + std::to_string(line_no) + ": width and height must be positive");
        if (p.confidence < 0.0)
            throw ParseError(source + ":" + std::to_string(line_no) + ": confidence must be non-negative");
        ++s.rows;
        const auto clipped = clip_to_image(p, width, height);
        if (!clipped) {
            ++s.outside;
            continue;
        }
        if (!(*clipped == p))
            ++s.clipped;
        out.push_back(*clipped);
    }
    if (stats)
        *stats = s;
    return out;
}

std::vector<Proposal2D> read_proposals(const std::filesystem::path& path,
                                       int width,
                                       int height,
                                       ProposalReadStats* stats)
{
    std::istringstream in(read_text(path));
    return parse_proposals(in, path.string(), width, height, stats);
}

void write_proposals(const std::filesystem::path& path, std::span<const Proposal2D> proposals)
{
    std::ostringstream os;
    os << "x,y,w,h,c\n";
    for (const auto& p : proposals)
        os << p.x << ',' << p.y << ',' << p.w << ',' << p.h << ',' << fmt_double(p.confidence) << '\n';
    write_text(path, os.str());
}

// --- frames ------------------------------------------------------------------

DepthImage depth_from_raw(const Image<std::uint16_t>& raw, double depth_scale)
{
    DepthImage out(raw.width(), raw.height(), 0.0f);
    for (std::size_t i = 0; i < raw.size(); ++i)
        out[i] = static_cast<float>(raw[i] / depth_scale);
    return out;
}

Image<std::uint16_t> depth_to_raw(const DepthImage& depth, double depth_scale)
{
    Image<std::uint16_t> out(depth.width(), depth.height(), 0);
    for (std::size_t i = 0; i < depth.size(); ++i) {
        const double z = depth[i];
        if (!(z > 0.0) || !std::isfinite(z))
            continue;
        out[i] = static_cast<std::uint16_t>(std::clamp(std::lround(z * depth_scale), 0L, 65535L));
    }
    return out;
}

ColorImage color_from_rgb8(const Image<Rgb8>& rgb)
{
    ColorImage out(rgb.width(), rgb.height());
    for (std::size_t i = 0; i < rgb.size(); ++i)
        out[i] = Color(rgb[i][0], rgb[i][1], rgb[i][2]) / 255.0f;
    return out;
}

Image<Rgb8> color_to_rgb8(const ColorImage& color)
{
    Image<Rgb8> out(color.width(), color.height());
    for (std::size_t i = 0; i < color.size(); ++i)
        for (int c = 0; c < 3; ++c)
            out[i][static_cast<std::size_t>(c)] =
                static_cast<std::uint8_t>(std::clamp(std::lround(color[i][c] * 255.0f), 0L, 255L));
    return out;
}

SequenceReader::SequenceReader(const std::filesystem::path& manifest_path)
    : SequenceReader(read_manifest(manifest_path))
{
}

SequenceReader::SequenceReader(SequenceManifest manifest) : manifest_(std::move(manifest))
{
    camera_ = read_camera_file(manifest_.resolve(manifest_.camera));
    trajectory_ = read_trajectory(manifest_.resolve(manifest_.trajectory));
}

std::optional<Pose> SequenceReader::pose_at(double timestamp) const
{
    if (trajectory_.empty())
        return std::nullopt;
    const auto it = std::lower_bound(trajectory_.begin(), trajectory_.end(), timestamp,
                                     [](const StampedPose& p, double t) { return p.timestamp < t; });
    const StampedPose* best = nullptr;
    if (it != trajectory_.end())
        best = &*it;
    if (it != trajectory_.begin()) {
        const StampedPose* before = &*(it - 1);
        if (!best || std::abs(before->timestamp - timestamp) <= std::abs(best->timestamp - timestamp))
            best = before;
    }
    if (std::abs(best->timestamp - timestamp) > manifest_.pose_tolerance)
        return std::nullopt;
    return best->pose;
}

std::optional<Pose> SequenceReader::frame_pose(int index) const
{
    if (index < 0 || static_cast<std::size_t>(index) >= manifest_.frames.size())
        throw std::out_of_range("frame index " + std::to_string(index) + " out of range");
    return pose_at(manifest_.frames[static_cast<std::size_t>(index)].timestamp);
}

FrameRecord SequenceReader::load(int index) const
{
    if (index < 0 || static_cast<std::size_t>(index) >= manifest_.frames.size())
        throw std::out_of_range("frame index " + std::to_string(index) + " out of range");
    const FrameEntry& e = manifest_.frames[static_cast<std::size_t>(index)];
    const auto pose = pose_at(e.timestamp);
    if (!pose)
        throw ParseError("frame " + std::to_string(index) + ": no pose within " +
                         std::to_string(manifest_.pose_tolerance) + " s of timestamp " + fmt_double(e.timestamp));
    const Intrinsics& K = camera_.intrinsics;
    FrameRecord rec;
    rec.index = index;
    rec.timestamp = e.timestamp;
    rec.pose = *pose;
    rec.depth = depth_from_raw(read_png_gray16(manifest_.resolve(e.depth)), camera_.depth_scale);
    rec.color = color_from_rgb8(read_png_rgb8(manifest_.resolve(e.color)));
    if (rec.depth.width() != K.width || rec.depth.height() != K.height || rec.color.width() != K.width ||
        rec.color.height() != K.height)
        throw ParseError("frame " + std::to_string(index) + ": image size does not match the camera file");
    const auto proposals = manifest_.proposals_path(index);
    if (std::filesystem::exists(proposals)) {
        ProposalReadStats stats;
        rec.proposals = read_proposals(proposals, K.width, K.height, &stats);
        clipped_ += stats.clipped;
    }
    return rec;
}

std::optional<FrameRecord> SequenceReader::next()
{
    while (cursor_ < manifest_.frames.size()) {
        const int index = static_cast<int>(cursor_++);
        if (!pose_at(manifest_.frames[static_cast<std::size_t>(index)].timestamp)) {
            ++skipped_;
            warnings_.push_back("frame " + std::to_string(index) + ": no pose within tolerance, skipped");
            continue;
        }
        return load(index);
    }
    return std::nullopt;
}

// --- boxes -------------------------------------------------------------------

std::string boxes_to_json(std::span<const Box3D> boxes)
{
    ordered_json j = ordered_json::array();
    for (const auto& b : boxes)
        j.push_back(box_json(b));
    return j.dump(2);
}

std::vector<Box3D> boxes_from_json(const std::string& text)
{
    const json j = parse_json(text, "boxes");
    if (!j.is_array())
        throw ParseError("boxes: expected an array");
    std::vector<Box3D> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(box_from(j[i], "boxes[" + std::to_string(i) + "]"));
    return out;
}

void write_boxes(const std::filesystem::path& path, std::span<const Box3D> boxes)
{
    write_text(path, boxes_to_json(boxes) + "\n");
}

std::vector<Box3D> read_boxes(const std::filesystem::path& path) { return boxes_from_json(read_text(path)); }

void write_ground_truth_boxes(const std::filesystem::path& path, std::span<const GroundTruthBox> boxes)
{
    ordered_json j = ordered_json::array();
    for (const auto& b : boxes) {
        ordered_json e;
        e["label"] = b.label;
        e["box"] = box_json(b.box);
        j.push_back(e);
    }
    write_text(path, j.dump(2) + "\n");
}

std::vector<GroundTruthBox> read_ground_truth_boxes(const std::filesystem::path& path)
{
    const json j = parse_json(read_text(path), path.string());
    if (!j.is_array())
        throw ParseError("ground_truth: expected an array");
    std::vector<GroundTruthBox> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = "ground_truth[" + std::to_string(i) + "]";
        const json& label = member(j[i], "label", p);
        if (!label.is_number_integer())
            throw ParseError(p + ".label: expected an integer");
        out.push_back({label.get<int>(), box_from(member(j[i], "box", p), p + ".box")});
    }
    return out;
}

void write_boxes2d(const std::filesystem::path& path, std::span<const LabeledBox2D> boxes)
{
    std::ostringstream os;
    os << "label,x,y,w,h\n";
    for (const auto& b : boxes)
        os << b.label << ',' << fmt_double(b.box.x) << ',' << fmt_double(b.box.y) << ',' << fmt_double(b.box.w) << ','
           << fmt_double(b.box.h) << '\n';
    write_text(path, os.str());
}

std::vector<LabeledBox2D> read_boxes2d(const std::filesystem::path& path)
{
    std::istringstream in(read_text(path));
    std::vector<LabeledBox2D> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line_no == 1)
            continue;
        const auto fields = split(line, ',');
        std::vector<double> v;
        for (const auto& f : fields) {
            const auto n = parse_number(f);
            if (!n)
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
            v.push_back(*n);
        }
        if (v.size() != 5)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected label,x,y,w,h");
        out.push_back({static_cast<int>(v[0]), EvalBox2D{v[1], v[2], v[3], v[4]}});
    }
    return out;
}

// --- PLY ---------------------------------------------------------------------

const std::vector<int>* PlyCloud::int_property(const std::string& name) const
{
    for (const auto& [n, v] : int_properties)
        if (n == name)
            return &v;
    return nullptr;
}

const std::vector<float>* PlyCloud::float_property(const std::string& name) const
{
    for (const auto& [n, v] : float_properties)
        if (n == name)
            return &v;
    return nullptr;
}

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

void write_ply(const std::filesystem::path& path, const PlyCloud& cloud)
{
    const std::size_t n = cloud.positions.size();
    const bool has_color = !cloud.colors.empty();
    if (has_color && cloud.colors.size() != n)
        throw std::invalid_argument("PLY: color count does not match point count");
    for (const auto& [name, v] : cloud.int_properties)
        if (v.size() != n)
            throw std::invalid_argument("PLY: property '" + name + "' has the wrong length");
    for (const auto& [name, v] : cloud.float_properties)
        if (v.size() != n)
            throw std::invalid_argument("PLY: property '" + name + "' has the wrong length");

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << n << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (has_color)
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    for (const auto& p : cloud.int_properties)
        out << "property int " << p.first << "\n";
    for (const auto& p : cloud.float_properties)
        out << "property float " << p.first << "\n";
    out << "end_header\n";

    std::vector<char> record;
    for (std::size_t i = 0; i < n; ++i) {
        record.clear();
        auto put = [&](const auto& value) {
            const char* bytes = reinterpret_cast<const char*>(&value);
            record.insert(record.end(), bytes, bytes + sizeof(value));
        };
        for (int c = 0; c < 3; ++c)
            put(static_cast<float>(cloud.positions[i][c]));
        if (has_color)
            for (std::uint8_t c : cloud.colors[i])
                put(c);
        for (const auto& p : cloud.int_properties)
            put(static_cast<std::int32_t>(p.second[i]));
        for (const auto& p : cloud.float_properties)
            put(p.second[i]);
        out.write(record.data(), static_cast<std::streamsize>(record.size()));
    }
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

PlyCloud read_ply(const std::filesystem::path& path)
{
    const std::string data = read_text(path);
    const std::string source = path.string();
    const auto header_end = data.find("end_header\n");
    if (data.rfind("ply\n", 0) != 0 || header_end == std::string::npos)
        throw ParseError(source + ": not a PLY file");
    std::istringstream header(data.substr(0, header_end));
    struct Property
    {
        std::string name;
        std::string type;
        std::size_t size;
    };
    std::vector<Property> props;
    std::size_t count = 0;
    bool in_vertex = false;
    bool seen_vertex = false;
    std::string line;
    while (std::getline(header, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "binary_little_endian")
                throw ParseError(source + ": only binary_little_endian PLY is supported");
        } else if (word == "element") {
            std::string name;
            long long c = 0;
            ls >> name >> c;
            in_vertex = name == "vertex";
            if (in_vertex) {
                count = static_cast<std::size_t>(c);
                seen_vertex = true;
            } else if (c != 0) {
                throw ParseError(source + ": unsupported element '" + name + "'");
            }
        } else if (word == "property" && in_vertex) {
            std::string type, name;
            ls >> type >> name;
            std::size_t size = 0;
            if (type == "float" || type == "float32" || type == "int" || type == "int32" || type == "uint" ||
                type == "uint32")
                size = 4;
            else if (type == "double" || type == "float64")
                size = 8;
            else if (type == "uchar" || type == "uint8" || type == "char" || type == "int8")
                size = 1;
            else if (type == "short" || type == "int16" || type == "ushort" || type == "uint16")
                size = 2;
            else
                throw ParseError(source + ": unsupported property type '" + type + "'");
            props.push_back({name, type, size});
        }
    }
    if (!seen_vertex)
        throw ParseError(source + ": no vertex element");
    std::size_t record = 0;
    for (const auto& p : props)
        record += p.size;
    const std::size_t body = header_end + std::strlen("end_header\n");
    if (data.size() < body + record * count)
        throw ParseError(source + ": truncated vertex data");

    auto read_value = [&](const char* at, const std::string& type) -> double {
        auto get = [&](auto tag) {
            decltype(tag) v;
            std::memcpy(&v, at, sizeof v);
            return static_cast<double>(v);
        };
        if (type == "float" || type == "float32") return get(float{});
        if (type == "double" || type == "float64") return get(double{});
        if (type == "int" || type == "int32") return get(std::int32_t{});
        if (type == "uint" || type == "uint32") return get(std::uint32_t{});
        if (type == "uchar" || type == "uint8") return get(std::uint8_t{});
        if (type == "char" || type == "int8") return get(std::int8_t{});
        if (type == "short" || type == "int16") return get(std::int16_t{});
        return get(std::uint16_t{});
    };
    auto is_float_type = [](const std::string& t) {
        return t == "float" || t == "float32" || t == "double" || t == "float64";
    };

    PlyCloud cloud;
    cloud.positions.resize(count, Vec3::Zero());
    const bool has_color = std::any_of(props.begin(), props.end(), [](const Property& p) { return p.name == "red"; });
    if (has_color)
        cloud.colors.resize(count, Rgb8{0, 0, 0});
    for (const auto& p : props) {
        if (p.name == "x" || p.name == "y" || p.name == "z" || p.name == "red" || p.name == "green" ||
            p.name == "blue")
            continue;
        if (is_float_type(p.type))
            cloud.float_properties.push_back({p.name, std::vector<float>(count)});
        else
            cloud.int_properties.push_back({p.name, std::vector<int>(count)});
    }
    for (std::size_t i = 0; i < count; ++i) {
        const char* at = data.data() + body + i * record;
        for (const auto& p : props) {
            const double v = read_value(at, p.type);
            if (p.name == "x") cloud.positions[i].x() = v;
            else if (p.name == "y") cloud.positions[i].y() = v;
            else if (p.name == "z") cloud.positions[i].z() = v;
            else if (p.name == "red") cloud.colors[i][0] = static_cast<std::uint8_t>(v);
            else if (p.name == "green") cloud.colors[i][1] = static_cast<std::uint8_t>(v);
            else if (p.name == "blue") cloud.colors[i][2] = static_cast<std::uint8_t>(v);
            else if (is_float_type(p.type)) {
                for (auto& fp : cloud.float_properties)
                    if (fp.first == p.name)
                        fp.second[i] = static_cast<float>(v);
            } else {
                for (auto& ip : cloud.int_properties)
                    if (ip.first == p.name)
                        ip.second[i] = static_cast<int>(v);
            }
            at += p.size;
        }
    }
    return cloud;
}

Rgb8 heat_color(double t)
{
    t = std::isfinite(t) ? std::clamp(t, 0.0, 1.0) : 0.0;
    auto channel = [&](double center) {
        const double v = std::clamp(1.5 - std::abs(4.0 * t - center), 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(v * 255.0));
    };
    return {channel(3.0), channel(2.0), channel(1.0)};
}

Rgb8 label_color(int label)
{
    if (label == -1)
        return {120, 120, 110};
    if (label == -2)
        return {140, 90, 50};
    if (label < 0)
        return {90, 90, 90};
    static constexpr Rgb8 palette[] = {{230, 25, 75},  {60, 180, 75},  {255, 225, 25}, {0, 130, 200},
                                       {245, 130, 48}, {145, 30, 180}, {70, 240, 240}, {240, 50, 230},
                                       {210, 245, 60}, {250, 190, 212}, {0, 128, 128}, {170, 110, 40}};
    return palette[static_cast<std::size_t>(label) % std::size(palette)];
}

std::vector<LabeledPoint> labeled_points_from_ply(const PlyCloud& cloud)
{
    const auto* labels = cloud.int_property("label");
    if (!labels)
        throw ParseError("labeled cloud has no 'label' property");
    std::vector<LabeledPoint> out;
    out.reserve(cloud.positions.size());
    for (std::size_t i = 0; i < cloud.positions.size(); ++i)
        out.push_back({cloud.positions[i], (*labels)[i], (*labels)[i] > 0});
    return out;
}

}  // namespace objprop
