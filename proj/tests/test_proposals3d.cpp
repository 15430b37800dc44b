#include "objprop/proposals3d.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <map>
#include <random>

using namespace objprop;

namespace {

GlobalHeatmap3D cloud(std::initializer_list<std::pair<double, int>> conf_freq)
{
    GlobalHeatmap3D g;
    for (auto [c, f] : conf_freq)
        g.points.push_back({Vec3::Zero(), Color::Zero(), c, f});
    return g;
}

// Textbook O(n^2) DBSCAN visiting points in index order.
std::vector<int> reference_dbscan(const std::vector<Vec3>& pts, double eps, int min_pts)
{
    const int n = static_cast<int>(pts.size());
    auto neighbors = [&](int i) {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            if ((pts[i] - pts[j]).norm() <= eps)
                out.push_back(j);
        return out;
    };
    std::vector<int> label(n, -2);
    int cluster = 0;
    for (int i = 0; i < n; ++i) {
        if (label[i] != -2)
            continue;
        auto nb = neighbors(i);
        if (static_cast<int>(nb.size()) < min_pts) {
            label[i] = -1;
            continue;
        }
        label[i] = cluster;
        std::vector<int> queue = nb;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const int j = queue[q];
            if (label[j] == -1)
                label[j] = cluster;
            if (label[j] != -2)
                continue;
            label[j] = cluster;
            auto nj = neighbors(j);
            if (static_cast<int>(nj.size()) >= min_pts)
                queue.insert(queue.end(), nj.begin(), nj.end());
        }
        ++cluster;
    }
    return label;
}

bool same_partition(const std::vector<int>& a, const std::vector<int>& b)
{
    if (a.size() != b.size())
        return false;
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] < 0) != (b[i] < 0))
            return false;
        if (a[i] < 0)
            continue;
        auto [it1, new1] = ab.emplace(a[i], b[i]);
        auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i])
            return false;
    }
    return true;
}

Box3D aabb(Vec3 lo, Vec3 hi)
{
    Box3D b;
    b.min = lo;
    b.max = hi;
    return b;
}

ClusterBox cluster_of(Vec3 lo, Vec3 hi)
{
    ClusterBox c;
    c.points = {lo, hi};
    c.box = fit_box_rotated(c.points, Mat3::Identity());
    return c;
}

}  // namespace

TEST_CASE("frequency floor table")
{
    CHECK(frequency_floor(1) == 1);
    CHECK(frequency_floor(20) == 1);
    CHECK(frequency_floor(21) == 2);
    CHECK(frequency_floor(60) == 3);
    CHECK(frequency_floor(80) == 4);
    CHECK(frequency_floor(100) == 5);
    CHECK(frequency_floor(1000) == 5);
    CHECK(frequency_floor(0) == 1);
}

TEST_CASE("frequency filter keeps points seen often enough")
{
    const GlobalHeatmap3D g = cloud({{1.0, 1}, {1.0, 2}, {1.0, 3}, {1.0, 4}, {1.0, 5}, {1.0, 6}});
    CHECK(frequency_filter(g, 60) == std::vector<std::size_t>{2, 3, 4, 5});
    CHECK(frequency_filter(g, 500) == std::vector<std::size_t>{4, 5});
    CHECK(frequency_filter(g, 10).size() == 6);
}

TEST_CASE("pseudo-average ranking threshold is inclusive")
{
    // c / (f + 10) with eps 0.25: 3.75 / 15 = 0.25 exactly.
    const GlobalHeatmap3D g = cloud({{3.75, 5}, {3.7, 5}, {10.0, 30}, {0.0, 1}});
    const std::vector<std::size_t> all{0, 1, 2, 3};
    const auto ranked = rank_points(g, all, 10.0, 0.25);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].index == 0);
    CHECK(ranked[0].score == doctest::Approx(0.25));
    CHECK(ranked[1].index == 2);
    CHECK(ranked[1].score == doctest::Approx(0.25));
    CHECK(pseudo_average_confidence(6.0, 2, 10.0) == 0.5);
}

TEST_CASE("plane grouping and final removal use the hottest group")
{
    const double tilt = 2.0 * EIGEN_PI / 180.0;
    std::vector<PlaneTrackEntry> track{
        {0, Plane{Vec3::UnitY(), 0.0}, 1.0, 100},
        {10, Plane{-Vec3::UnitY(), 0.75}, 2.0, 50},  // table, flipped sign
        {20, Plane{Vec3(std::sin(tilt), std::cos(tilt), 0.0), 0.01}, 1.0, 100},
        {30, Plane{Vec3::UnitY(), -0.75}, 3.0, 60},
        {40, Plane{Vec3::UnitX(), -2.0}, 0.5, 10},
    };
    const auto groups = group_planes(track, 10.0, 0.05);
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].members == std::vector<std::size_t>{0, 2});
    CHECK(groups[0].heat == 2.0);
    CHECK(groups[1].members == std::vector<std::size_t>{1, 3});
    CHECK(groups[1].heat == 5.0);
    CHECK(groups[1].representative.offset == doctest::Approx(-0.75));
    CHECK(groups[2].members == std::vector<std::size_t>{4});

    GlobalHeatmap3D g;
    for (double y : {0.0, 0.75, 0.752, 0.76, 1.0})
        g.points.push_back({Vec3(0.1, y, 0.2), Color::Zero(), 1.0, 5});
    std::vector<RankedPoint> ranked;
    for (std::size_t i = 0; i < g.points.size(); ++i)
        ranked.push_back({i, 1.0});
    const auto r = final_plane_removal(g, ranked, track, 0.005);
    CHECK(r.status == PlaneRemovalStatus::Applied);
    REQUIRE(r.support);
    CHECK(r.support->canonical().offset == doctest::Approx(-0.75));
    CHECK(r.removed == 2);
    REQUIRE(r.kept.size() == 3);
    CHECK(r.kept[0].index == 0);
    CHECK(r.kept[1].index == 3);
    CHECK(r.kept[2].index == 4);

    const auto none = final_plane_removal(g, ranked, {}, 0.005);
    CHECK(none.status == PlaneRemovalStatus::EmptyTrack);
    CHECK(none.kept.size() == ranked.size());
    CHECK_FALSE(none.support);
}

TEST_CASE("grid DBSCAN matches the quadratic reference")
{
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> count(1, 600), blobs(1, 5);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    std::normal_distribution<double> g(0.0, 0.015);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Vec3> centers;
        for (int b = blobs(rng); b > 0; --b)
            centers.push_back(Vec3(u(rng), u(rng), u(rng)));
        std::vector<Vec3> pts;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) {
            if (i % 5 == 0)
                pts.push_back(Vec3(u(rng), u(rng), u(rng)));
            else
                pts.push_back(centers[i % centers.size()] + Vec3(g(rng), g(rng), g(rng)));
        }
        const auto fast = dbscan(pts, 0.02, 10);
        const auto slow = reference_dbscan(pts, 0.02, 10);
        CHECK(same_partition(fast.labels, slow));
        CHECK(fast.cluster_count == (slow.empty() ? 0 : *std::max_element(slow.begin(), slow.end()) + 1));
    }
}

TEST_CASE("DBSCAN counts the point itself")
{
    const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(0.01, 0, 0)};
    CHECK(dbscan(pts, 0.02, 2).cluster_count == 1);
    CHECK(dbscan(pts, 0.02, 3).cluster_count == 0);
    CHECK(dbscan({}, 0.02, 3).labels.empty());
}

TEST_CASE("fitted box contains its points and is tight")
{
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vec3 normal = Vec3(0.1, 1.0, -0.2).normalized();
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i)
        pts.push_back(Vec3(u(rng), u(rng), u(rng)));
    const Box3D box = fit_box(pts, normal);
    CHECK((box.rotation * normal - kWorldUp).norm() < 1e-12);
    for (const Vec3& p : pts)
        CHECK(box.contains(p, 1e-12));
    for (int axis = 0; axis < 3; ++axis) {
        double lo = INFINITY, hi = -INFINITY;
        for (const Vec3& p : pts) {
            lo = std::min(lo, (box.rotation * p)(axis));
            hi = std::max(hi, (box.rotation * p)(axis));
        }
        CHECK(box.min(axis) == lo);
        CHECK(box.max(axis) == hi);
    }
    CHECK(box.cluster_size == 500);
    for (const Vec3& c : box.world_corners())
        CHECK(box.contains(c, 1e-9));
}

TEST_CASE("overlap volume against Monte Carlo")
{
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Box3D a = aabb(Vec3(0, 0, 0), Vec3(1, 1, 1));
    const Box3D b = aabb(Vec3(0.5, 0.25, -0.5), Vec3(1.5, 0.75, 0.5));
    CHECK(overlap_volume(a, b) == doctest::Approx(0.5 * 0.5 * 0.5));
    CHECK(overlap_volume(b, a) == doctest::Approx(0.125));
    CHECK(overlap_volume(a, aabb(Vec3(1, 0, 0), Vec3(2, 1, 1))) == 0.0);

    Box3D r = b;
    r.rotation = Eigen::AngleAxisd(0.4, Vec3::UnitY()).toRotationMatrix();
    r.min = Vec3(0.2, 0.2, 0.2);
    r.max = Vec3(1.0, 0.8, 0.9);
    long inside = 0;
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) {
        const Vec3 p(u01(rng), u01(rng), u01(rng));
        inside += r.contains(p);
    }
    const double true_overlap = static_cast<double>(inside) / samples;
    const double approx = overlap_volume(a, r);
    CHECK(approx >= true_overlap - 0.01);
    CHECK(approx <= 1.0);
}

TEST_CASE("merging is transitive and needs positive overlap")
{
    std::vector<ClusterBox> boxes{
        cluster_of(Vec3(0, 0, 0), Vec3(1, 1, 1)),
        cluster_of(Vec3(2.5, 0, 0), Vec3(3.5, 1, 1)),
        cluster_of(Vec3(0.9, 0, 0), Vec3(2.6, 1, 1)),  // bridges the two
        cluster_of(Vec3(3.5, 0, 0), Vec3(4.5, 1, 1)),  // only touches the merged box
    };
    const auto merged = merge_boxes(boxes);
    REQUIRE(merged.size() == 2);
    CHECK(merged[0].box.min == Vec3(0, 0, 0));
    CHECK(merged[0].box.max == Vec3(3.5, 1, 1));
    CHECK(merged[0].points.size() == 6);
    CHECK(merged[1].box.min == Vec3(3.5, 0, 0));
    for (std::size_t i = 0; i < merged.size(); ++i)
        for (std::size_t j = i + 1; j < merged.size(); ++j)
            CHECK(overlap_volume(merged[i].box, merged[j].box) == 0.0);
}

TEST_CASE("volume filter boundary")
{
    std::vector<ClusterBox> boxes{cluster_of(Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5)),
                                  cluster_of(Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.25)),
                                  cluster_of(Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.0))};
    const auto kept = volume_filter(boxes, 0.0625);
    REQUIRE(kept.size() == 2);
    CHECK(kept[1].box.volume() == 0.0625);
    CHECK(volume_filter(boxes, 0.0).size() == 3);
}
