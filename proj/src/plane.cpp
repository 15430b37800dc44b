#include "objprop/plane.hpp"
#include "objprop/seed.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numbers>
#include <random>
#include <thread>

namespace objprop {

Plane Plane::canonical() const
{
    const double eps = 1e-12;
    bool flip = false;
    if (std::abs(normal.y()) > eps)
        flip = normal.y() < 0.0;
    else if (std::abs(normal.x()) > eps)
        flip = normal.x() < 0.0;
    else
        flip = normal.z() < 0.0;
    return flip ? Plane{-normal, -offset} : *this;
}

std::optional<Plane> fit_plane_3pts(const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 cross = (b - a).cross(c - a);
    const double norm = cross.norm();
    if (!(norm >= 1e-12))
        return std::nullopt;
    Plane plane;
    plane.normal = cross / norm;
    plane.offset = -plane.normal.dot(a);
    return plane;
}

std::optional<Plane> fit_plane_least_squares(std::span<const Vec3> points)
{
    if (points.size() < 3)
        return std::nullopt;
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : points)
        centroid += p;
    centroid /= static_cast<double>(points.size());
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : points) {
        const Vec3 d = p - centroid;
        scatter += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> solver(scatter);
    if (solver.info() != Eigen::Success)
        return std::nullopt;
    // Eigenvalues ascending: a planar spread needs the middle one non-zero.
    if (!(solver.eigenvalues()(1) > 1e-18))
        return std::nullopt;
    Plane plane;
    plane.normal = solver.eigenvectors().col(0).normalized();
    plane.offset = -plane.normal.dot(centroid);
    return plane;
}

std::vector<std::size_t> plane_inliers(const Plane& plane, std::span<const Vec3> points, double eps)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (plane.is_inlier(points[i], eps))
            out.push_back(i);
    return out;
}

double plane_angle_deg(const Plane& a, const Plane& b)
{
    const double c = std::clamp(std::abs(a.normal.dot(b.normal)), 0.0, 1.0);
    return std::acos(c) * 180.0 / std::numbers::pi;
}

bool planes_distinct(const Plane& a, const Plane& b, double angle_deg, double offset)
{
    if (plane_angle_deg(a, b) > angle_deg)
        return true;
    const double sign = a.normal.dot(b.normal) >= 0.0 ? 1.0 : -1.0;
    return std::abs(a.offset - sign * b.offset) > offset;
}

namespace {

struct Hypothesis
{
    Plane plane;
    long score = -1;
    int iteration = 0;
};

// Structure-of-arrays copy of the scoring subsample.
struct ScoringSet
{
    std::vector<float> x, y, z;
};

constexpr int kChunk = 256;

long count_inliers(const ScoringSet& set, const Plane& plane, double eps)
{
    const float nx = static_cast<float>(plane.normal.x());
    const float ny = static_cast<float>(plane.normal.y());
    const float nz = static_cast<float>(plane.normal.z());
    const float b = static_cast<float>(plane.offset);
    const float e = static_cast<float>(eps);
    long count = 0;
    const std::size_t n = set.x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const float d = nx * set.x[i] + ny * set.y[i] + nz * set.z[i] + b;
        count += (d < e && d > -e) ? 1 : 0;
    }
    return count;
}

void run_chunk(int chunk,
               const PointImage& frame,
               const std::vector<std::size_t>& valid_pixels,
               const ScoringSet& scoring,
               const RansacParams& params,
               std::uint64_t seed,
               std::vector<Hypothesis>& out)
{
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(chunk)}));
    std::uniform_int_distribution<std::size_t> pick_anchor(0, valid_pixels.size() - 1);
    const int half = params.window / 2;
    std::uniform_int_distribution<int> pick_offset(-half, half);
    const int width = frame.width();
    const int height = frame.height();

    const int first = chunk * kChunk;
    const int last = std::min(params.iterations, first + kChunk);
    for (int it = first; it < last; ++it) {
        Hypothesis& h = out[static_cast<std::size_t>(it)];
        h.iteration = it;
        const std::size_t anchor = valid_pixels[pick_anchor(rng)];
        const int au = static_cast<int>(anchor % width);
        const int av = static_cast<int>(anchor / width);
        Vec3 sample[3];
        sample[0] = frame.points[anchor];
        int found = 1;
        for (int attempt = 0; attempt < 16 && found < 3; ++attempt) {
            const int u = au + pick_offset(rng);
            const int v = av + pick_offset(rng);
            if (u < 0 || v < 0 || u >= width || v >= height || !frame.is_valid(u, v))
                continue;
            if (u == au && v == av)
                continue;
            sample[found++] = frame.points(u, v);
        }
        if (found < 3)
            continue;
        const auto plane = fit_plane_3pts(sample[0], sample[1], sample[2]);
        if (!plane)
            continue;
        h.plane = *plane;
        h.score = count_inliers(scoring, *plane, params.eps_p);
    }
}

std::vector<std::size_t> full_inliers(const PointImage& frame,
                                      const std::vector<std::size_t>& valid_pixels,
                                      const Plane& plane,
                                      double eps)
{
    std::vector<std::size_t> out;
    for (std::size_t idx : valid_pixels)
        if (plane.is_inlier(frame.points[idx], eps))
            out.push_back(idx);
    return out;
}

// Truncated quadratic cost over all valid pixels. Unlike the inlier count it
// prefers the plane that sits in the middle of its band, so refinement does
// not stall on a slightly tilted plane that trades table-top residuals for
// a few extra edge pixels.
double truncated_cost(const PointImage& frame,
                      const std::vector<std::size_t>& valid_pixels,
                      const Plane& plane,
                      double eps)
{
    double cost = 0.0;
    for (std::size_t idx : valid_pixels) {
        const double d = plane.signed_distance(frame.points[idx]);
        cost += std::min(d * d, eps * eps);
    }
    return cost;
}

}  // namespace

std::vector<PlaneCandidate> ransac_top_planes(const PointImage& frame,
                                              const Heatmap2D& heat,
                                              const RansacParams& params,
                                              std::uint64_t seed)
{
    std::vector<std::size_t> valid_pixels;
    ScoringSet scoring;
    const int stride = std::max(1, params.score_stride);
    for (int v = 0; v < frame.height(); ++v) {
        for (int u = 0; u < frame.width(); ++u) {
            if (!frame.is_valid(u, v))
                continue;
            valid_pixels.push_back(frame.points.index(u, v));
            if (u % stride == 0 && v % stride == 0) {
                const Vec3& p = frame.points(u, v);
                scoring.x.push_back(static_cast<float>(p.x()));
                scoring.y.push_back(static_cast<float>(p.y()));
                scoring.z.push_back(static_cast<float>(p.z()));
            }
        }
    }
    if (valid_pixels.size() < 3 || params.iterations <= 0)
        return {};

    std::vector<Hypothesis> hypotheses(static_cast<std::size_t>(params.iterations));
    const int chunks = (params.iterations + kChunk - 1) / kChunk;
    const int threads = std::clamp(params.threads, 1, chunks);
    if (threads == 1) {
        for (int c = 0; c < chunks; ++c)
            run_chunk(c, frame, valid_pixels, scoring, params, seed, hypotheses);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (int c = t; c < chunks; c += threads)
                    run_chunk(c, frame, valid_pixels, scoring, params, seed, hypotheses);
            });
        }
        for (auto& th : pool)
            th.join();
    }

    std::erase_if(hypotheses, [](const Hypothesis& h) { return h.score < 0; });
    std::sort(hypotheses.begin(), hypotheses.end(), [](const Hypothesis& a, const Hypothesis& b) {
        return a.score != b.score ? a.score > b.score : a.iteration < b.iteration;
    });

    std::vector<PlaneCandidate> selected;
    auto distinct_from_selected = [&](const Plane& p) {
        return std::all_of(selected.begin(), selected.end(), [&](const PlaneCandidate& s) {
            return planes_distinct(s.plane, p, params.distinct_angle_deg, params.distinct_offset);
        });
    };
    // Noisy hypotheses of an already selected surface often pass the check
    // below and only collapse onto it after refinement; cap the attempts.
    const int max_attempts = std::max(50, 10 * params.top_k);
    int attempts = 0;
    for (const Hypothesis& h : hypotheses) {
        if (static_cast<int>(selected.size()) >= params.top_k || attempts >= max_attempts)
            break;
        if (!distinct_from_selected(h.plane))
            continue;
        ++attempts;
        PlaneCandidate candidate;
        candidate.plane = h.plane;
        candidate.inliers = full_inliers(frame, valid_pixels, candidate.plane, params.eps_p);
        double cost = params.refine_iterations > 0
                          ? truncated_cost(frame, valid_pixels, candidate.plane, params.eps_p)
                          : 0.0;
        for (int r = 0; r < params.refine_iterations && candidate.inliers.size() >= 3; ++r) {
            std::vector<Vec3> pts;
            pts.reserve(candidate.inliers.size());
            for (std::size_t idx : candidate.inliers)
                pts.push_back(frame.points[idx]);
            auto refined = fit_plane_least_squares(pts);
            if (!refined)
                break;
            if (refined->normal.dot(candidate.plane.normal) < 0.0)
                *refined = Plane{-refined->normal, -refined->offset};
            const double refined_cost = truncated_cost(frame, valid_pixels, *refined, params.eps_p);
            if (refined_cost >= cost)
                break;
            auto inliers = full_inliers(frame, valid_pixels, *refined, params.eps_p);
            if (inliers.size() < 3)
                break;
            cost = refined_cost;
            candidate.plane = *refined;
            candidate.inliers = std::move(inliers);
        }
        if (!distinct_from_selected(candidate.plane))
            continue;
        for (std::size_t idx : candidate.inliers)
            candidate.heat += heat[idx];
        selected.push_back(std::move(candidate));
    }
    std::stable_sort(selected.begin(), selected.end(), [](const PlaneCandidate& a, const PlaneCandidate& b) {
        return a.inliers.size() > b.inliers.size();
    });
    return selected;
}

std::optional<std::size_t> select_support_plane(std::span<const PlaneCandidate> candidates)
{
    if (candidates.empty())
        return std::nullopt;
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        const auto& b = candidates[best];
        if (c.heat > b.heat || (c.heat == b.heat && c.inliers.size() > b.inliers.size()))
            best = i;
    }
    return best;
}

Heatmap2D suppress_plane(const Heatmap2D& heat, const Plane& plane, const PointImage& frame, double eps_p)
{
    Heatmap2D out = heat;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (frame.valid[i] && plane.is_inlier(frame.points[i], eps_p))
            out[i] = 0.0;
    return out;
}

PlaneTracker::PlaneTracker(RansacParams params, int keyframe_interval, std::uint64_t seed)
    : params_(params), interval_(std::max(1, keyframe_interval)), seed_(seed)
{
}

bool PlaneTracker::is_keyframe(int frame_index) const { return frame_index % interval_ == 0; }

std::optional<Plane> PlaneTracker::current() const
{
    if (entries_.empty())
        return std::nullopt;
    return entries_.back().plane;
}

std::optional<Plane> PlaneTracker::update(int frame_index, const PointImage& frame, const Heatmap2D& heat)
{
    if (!is_keyframe(frame_index) && !entries_.empty())
        return current();
    const auto candidates =
        ransac_top_planes(frame, heat, params_, derive_seed(seed_, {static_cast<std::uint64_t>(frame_index)}));
    const auto best = select_support_plane(candidates);
    if (!best)
        return current();
    const PlaneCandidate& chosen = candidates[*best];
    entries_.push_back({frame_index, chosen.plane, chosen.heat, static_cast<long>(chosen.inliers.size())});
    return chosen.plane;
}

}  // namespace objprop
