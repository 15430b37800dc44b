#include "objprop/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <sstream>

namespace objprop {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Little-endian binary state stream.
class Writer
{
public:
    template <typename T>
    void put(const T& value)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        const char* p = reinterpret_cast<const char*>(&value);
        out_.append(p, sizeof(T));
    }
    void put_vec3(const Vec3& v)
    {
        for (int i = 0; i < 3; ++i)
            put(v[i]);
    }
    void put_pose(const Pose& pose)
    {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                put(pose.R(r, c));
        put_vec3(pose.t);
    }
    template <typename T>
    void put_image(const Image<T>& image)
    {
        put(static_cast<std::int32_t>(image.width()));
        put(static_cast<std::int32_t>(image.height()));
        for (const T& px : image.pixels()) {
            if constexpr (std::is_same_v<T, Color>) {
                for (int c = 0; c < 3; ++c)
                    put(px[c]);
            } else {
                put(px);
            }
        }
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader
{
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get()
    {
        if (pos_ + sizeof(T) > bytes_.size())
            throw ParseError("pipeline state is truncated");
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    Vec3 get_vec3()
    {
        Vec3 v;
        for (int i = 0; i < 3; ++i)
            v[i] = get<double>();
        return v;
    }
    Pose get_pose()
    {
        Pose pose;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                pose.R(r, c) = get<double>();
        pose.t = get_vec3();
        return pose;
    }
    template <typename T>
    Image<T> get_image()
    {
        const auto w = get<std::int32_t>();
        const auto h = get<std::int32_t>();
        if (w < 0 || h < 0 || static_cast<std::size_t>(w) * h * sizeof(T) > bytes_.size() - pos_)
            throw ParseError("pipeline state has a corrupt image");
        Image<T> image(w, h);
        for (T& px : image.pixels()) {
            if constexpr (std::is_same_v<T, Color>) {
                for (int c = 0; c < 3; ++c)
                    px[c] = get<float>();
            } else {
                px = get<T>();
            }
        }
        return image;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

constexpr char kStateMagic[8] = {'O', 'B', 'J', 'P', 'S', 'T', '0', '1'};

}  // namespace

std::string timing_csv_header()
{
    return "frame,proposals,accepted,keyframe,proposal_filtering,plane_removal,fusion_match,"
           "fusion_confidence_frequency,fusion_location_color,total";
}

std::string timing_csv_row(const FrameTiming& t)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%ld,%ld,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", t.frame, t.proposals, t.accepted,
                  t.keyframe ? 1 : 0, t.proposal_filtering, t.plane_removal, t.fusion_match,
                  t.fusion_confidence_frequency, t.fusion_location_color, t.total);
    return buf;
}

std::vector<Box3D> PipelineResult::box_list() const
{
    std::vector<Box3D> out;
    out.reserve(boxes.size());
    for (const auto& b : boxes)
        out.push_back(b.box);
    return out;
}

FrameRecord downsample_frame(const FrameRecord& frame, int factor)
{
    if (factor == 1)
        return frame;
    if (factor < 1)
        throw std::invalid_argument("downsample factor must be >= 1");
    const int w = frame.depth.width() / factor;
    const int h = frame.depth.height() / factor;
    FrameRecord out;
    out.index = frame.index;
    out.timestamp = frame.timestamp;
    out.pose = frame.pose;
    out.depth = DepthImage(w, h, 0.0f);
    out.color = ColorImage(w, h, Color::Zero());
    const float area = static_cast<float>(factor * factor);
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            out.depth(u, v) = frame.depth(factor * u, factor * v);
            Color sum = Color::Zero();
            for (int dv = 0; dv < factor; ++dv)
                for (int du = 0; du < factor; ++du)
                    sum += frame.color(factor * u + du, factor * v + dv);
            out.color(u, v) = sum / area;
        }
    }
    for (const auto& p : frame.proposals) {
        const int x0 = p.x / factor;
        const int y0 = p.y / factor;
        const int x1 = (p.x + p.w + factor - 1) / factor;
        const int y1 = (p.y + p.h + factor - 1) / factor;
        if (const auto c = clip_to_image(Proposal2D{x0, y0, x1 - x0, y1 - y0, p.confidence}, w, h))
            out.proposals.push_back(*c);
    }
    return out;
}

Pipeline::Pipeline(PipelineConfig config, const Intrinsics& intrinsics)
    : config_(std::move(config)), input_K_(intrinsics)
{
    config_.validate();
    input_K_.validate();
    K_ = input_K_.downsampled(config_.downsample);
    tracker_ = PlaneTracker(config_.ransac_params(), config_.keyframe_interval, config_.seed);
}

FrameTiming Pipeline::process(const FrameRecord& input, FrameDebug* debug)
{
    if (input.depth.width() != input_K_.width || input.depth.height() != input_K_.height ||
        input.color.width() != input_K_.width || input.color.height() != input_K_.height)
        throw std::invalid_argument("frame size does not match the intrinsics");
    if (!input.pose.valid(1e-6))
        throw std::invalid_argument("frame pose is not a rigid transform");

    FrameTiming timing;
    timing.frame = frames_;
    timing.keyframe = tracker_.is_keyframe(frames_);
    const auto start = Clock::now();

    FrameRecord frame = downsample_frame(input, config_.downsample);
    timing.proposals = static_cast<long>(frame.proposals.size());

    auto t = Clock::now();
    FilterSummary summary;
    Heatmap2D heat = weighted_heatmap(frame.proposals, frame.depth, K_, config_.filter_params(), &summary);
    timing.accepted = summary.total - summary.rejected - summary.outside_image;
    timing.proposal_filtering = seconds_since(t);

    t = Clock::now();
    const PointImage points = backproject_depth(K_, frame.pose, frame.depth);
    const auto plane = tracker_.update(frames_, points, heat);
    Heatmap2D suppressed = plane ? suppress_plane(heat, *plane, points, config_.eps_p) : heat;
    timing.plane_removal = seconds_since(t);

    if (debug) {
        debug->baseline = baseline_heatmap(frame.proposals, K_.width, K_.height);
        debug->weighted = heat;
        debug->suppressed = suppressed;
        debug->plane = plane;
        debug->summary = summary;
        debug->proposals = frame.proposals;
        debug->color = frame.color;
    }

    FrameData current{std::move(frame.depth), std::move(frame.color), frame.pose};
    if (frames_ == 0) {
        t = Clock::now();
        previous_map_ = init_global(global_, K_, current, suppressed);
        timing.fusion_confidence_frequency = seconds_since(t);
    } else {
        RegisterTiming rt;
        previous_map_ = register_frame(global_, K_, previous_, previous_map_, current, suppressed,
                                       config_.match_params(), &rt);
        timing.fusion_match = rt.match_seconds;
        timing.fusion_confidence_frequency = rt.confidence_frequency_seconds;
        timing.fusion_location_color = rt.location_color_seconds;
    }
    previous_ = std::move(current);
    ++frames_;
    timing.total = seconds_since(start);
    return timing;
}

PipelineResult Pipeline::finalize() const
{
    PipelineResult result;
    result.frames = frames_;
    if (frames_ == 0)
        return result;
    result.candidates = frequency_filter(global_, frames_, config_.frequency_count, config_.frequency_fraction);
    result.ranked = rank_points(global_, result.candidates, config_.tau, config_.eps_rank);
    result.removal = final_plane_removal(global_, result.ranked, tracker_.entries(), config_.eps_p,
                                         config_.plane_angle_deg, config_.plane_offset);
    if (result.removal.support) {
        Vec3 n = result.removal.support->normal;
        if (n.dot(kWorldUp) < 0.0)
            n = -n;
        result.support_normal = n;
    }
    result.cluster_points.reserve(result.removal.kept.size());
    for (const auto& r : result.removal.kept)
        result.cluster_points.push_back(global_.points[r.index].position);
    result.clusters = dbscan(result.cluster_points, config_.dbscan_eps, config_.dbscan_min_pts);

    std::vector<ClusterBox> boxes(static_cast<std::size_t>(result.clusters.cluster_count));
    for (std::size_t i = 0; i < result.cluster_points.size(); ++i) {
        const int label = result.clusters.labels[i];
        if (label != kNoise)
            boxes[static_cast<std::size_t>(label)].points.push_back(result.cluster_points[i]);
    }
    for (auto& b : boxes)
        b.box = fit_box(b.points, result.support_normal);
    result.boxes = volume_filter(merge_boxes(std::move(boxes)), config_.min_box_volume);
    return result;
}

std::string Pipeline::save_state(std::uint64_t cursor) const
{
    Writer w;
    for (char c : kStateMagic)
        w.put(c);
    w.put(input_K_.fx);
    w.put(input_K_.fy);
    w.put(input_K_.cx);
    w.put(input_K_.cy);
    w.put(static_cast<std::int32_t>(input_K_.width));
    w.put(static_cast<std::int32_t>(input_K_.height));
    w.put(static_cast<std::int32_t>(config_.downsample));
    w.put(cursor);
    w.put(static_cast<std::int32_t>(frames_));
    w.put(static_cast<std::int32_t>(global_.frame_count));
    w.put(static_cast<std::uint64_t>(global_.points.size()));
    for (const auto& p : global_.points) {
        w.put_vec3(p.position);
        for (int c = 0; c < 3; ++c)
            w.put(p.color[c]);
        w.put(p.confidence);
        w.put(static_cast<std::int32_t>(p.frequency));
    }
    w.put(static_cast<std::uint64_t>(tracker_.entries().size()));
    for (const auto& e : tracker_.entries()) {
        w.put(static_cast<std::int32_t>(e.frame));
        w.put_vec3(e.plane.normal);
        w.put(e.plane.offset);
        w.put(e.heat);
        w.put(static_cast<std::int64_t>(e.inlier_count));
    }
    if (frames_ > 0) {
        w.put_image(previous_.depth);
        w.put_image(previous_.color);
        w.put_pose(previous_.pose);
        w.put_image(previous_map_);
    }
    return w.take();
}

std::uint64_t Pipeline::load_state(const std::string& bytes)
{
    Reader r(bytes);
    for (char c : kStateMagic)
        if (r.get<char>() != c)
            throw ParseError("not a pipeline state file");
    Intrinsics K;
    K.fx = r.get<double>();
    K.fy = r.get<double>();
    K.cx = r.get<double>();
    K.cy = r.get<double>();
    K.width = r.get<std::int32_t>();
    K.height = r.get<std::int32_t>();
    const int downsample = r.get<std::int32_t>();
    if (!(K == input_K_) || downsample != config_.downsample)
        throw std::invalid_argument("pipeline state was written for different intrinsics or downsampling");
    const auto cursor = r.get<std::uint64_t>();
    const int frames = r.get<std::int32_t>();
    GlobalHeatmap3D global;
    global.frame_count = r.get<std::int32_t>();
    const auto count = r.get<std::uint64_t>();
    if (count > bytes.size())
        throw ParseError("pipeline state has a corrupt point count");
    global.points.resize(count);
    for (auto& p : global.points) {
        p.position = r.get_vec3();
        for (int c = 0; c < 3; ++c)
            p.color[c] = r.get<float>();
        p.confidence = r.get<double>();
        p.frequency = r.get<std::int32_t>();
    }
    const auto entry_count = r.get<std::uint64_t>();
    if (entry_count > bytes.size())
        throw ParseError("pipeline state has a corrupt plane count");
    std::vector<PlaneTrackEntry> entries(entry_count);
    for (auto& e : entries) {
        e.frame = r.get<std::int32_t>();
        e.plane.normal = r.get_vec3();
        e.plane.offset = r.get<double>();
        e.heat = r.get<double>();
        e.inlier_count = static_cast<long>(r.get<std::int64_t>());
    }
    FrameData previous;
    IndexMap previous_map;
    if (frames > 0) {
        previous.depth = r.get_image<float>();
        previous.color = r.get_image<Color>();
        previous.pose = r.get_pose();
        previous_map = r.get_image<std::int32_t>();
    }
    if (!r.done())
        throw ParseError("pipeline state has trailing bytes");
    global_ = std::move(global);
    tracker_.restore(std::move(entries));
    previous_ = std::move(previous);
    previous_map_ = std::move(previous_map);
    frames_ = frames;
    return cursor;
}

}  // namespace objprop
