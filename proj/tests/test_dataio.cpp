#include "objprop/dataio.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>
#include <sstream>

using namespace objprop;
using objprop::test::TempDir;
using objprop::test::write_file;

namespace {

const char* kCamera = "fx = 10\nfy = 10\ncx = 3.5\ncy = 2.5\nwidth = 8\nheight = 6\ndepth_scale = 5000\n";

std::vector<Proposal2D> parse(const std::string& text, int w = 100, int h = 100, ProposalReadStats* stats = nullptr)
{
    std::istringstream in(text);
    return parse_proposals(in, "test.csv", w, h, stats);
}

Box3D random_box(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0), a(-3.0, 3.0);
    Box3D b;
    b.rotation = (Eigen::AngleAxisd(a(rng), Vec3::UnitY()) * Eigen::AngleAxisd(0.1 * a(rng), Vec3::UnitX()))
                     .toRotationMatrix();
    const Vec3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
    b.min = p.cwiseMin(q);
    b.max = p.cwiseMax(q);
    b.cluster_size = static_cast<long>(rng() % 10000);
    return b;
}

// Writes a tiny sequence whose frame i has uniform depth (i + 1) * 1000 raw units.
void write_fixture(const TempDir& dir, std::initializer_list<double> frame_times, std::initializer_list<double> pose_times)
{
    write_file(dir / "camera.txt", kCamera);
    std::ostringstream traj;
    traj << "# timestamp tx ty tz qx qy qz qw\n";
    for (double t : pose_times)
        traj << t << " " << t << " 0 0 0 0 0 1\n";
    write_file(dir / "trajectory.txt", traj.str());
    SequenceManifest m;
    int i = 0;
    for (double t : frame_times) {
        const std::string stem = std::to_string(i);
        Image<std::uint16_t> raw(8, 6, static_cast<std::uint16_t>((i + 1) * 1000));
        write_png_gray16(dir / ("d" + stem + ".png"), raw);
        write_png_rgb8(dir / ("c" + stem + ".png"), Image<Rgb8>(8, 6, Rgb8{10, 20, 30}));
        m.frames.push_back({t, "c" + stem + ".png", "d" + stem + ".png"});
        ++i;
    }
    write_file(dir / "proposals" / "000000.csv", "x,y,w,h,c\n0,0,4,4,0.5\n6,4,10,10,0.25\n");
    write_manifest(dir / "manifest.json", m);
}

}  // namespace

TEST_CASE("camera file round trip and errors")
{
    TempDir dir;
    write_file(dir / "cam.txt", kCamera);
    const CameraFile cam = read_camera_file(dir / "cam.txt");
    CHECK(cam.intrinsics == Intrinsics{10, 10, 3.5, 2.5, 8, 6});
    CHECK(cam.depth_scale == 5000.0);
    write_camera_file(dir / "cam2.txt", cam);
    CHECK(read_camera_file(dir / "cam2.txt").intrinsics == cam.intrinsics);

    write_file(dir / "bad.txt", std::string(kCamera) + "skew = 0\n");
    CHECK_THROWS_AS(read_camera_file(dir / "bad.txt"), ParseError);
    write_file(dir / "missing.txt", "fx = 10\n");
    CHECK_THROWS_AS(read_camera_file(dir / "missing.txt"), ParseError);
    CHECK_THROWS(read_camera_file(dir / "nope.txt"));
}

TEST_CASE("trajectory is camera-to-world and round-trips")
{
    TempDir dir;
    // 90 degrees about y, camera at (1, 2, 3).
    const double s = std::sqrt(0.5);
    write_file(dir / "t.txt", "# comment\n0.5 1 2 3 0 " + std::to_string(s) + " 0 " + std::to_string(s) +
                                  "\n0.1 0 0 0 0 0 0 2\n");
    const auto poses = read_trajectory(dir / "t.txt");
    REQUIRE(poses.size() == 2);
    CHECK(poses[0].timestamp == 0.1);  // sorted
    CHECK((poses[0].pose.R - Mat3::Identity()).norm() < 1e-12);  // normalized quaternion
    CHECK((poses[1].pose.camera_center() - Vec3(1, 2, 3)).norm() < 1e-9);
    // The camera's optical axis (z) points along world +z rotated by 90 degrees about y, i.e. world +x.
    CHECK((poses[1].pose.R.transpose() * Vec3::UnitZ() - Vec3::UnitX()).norm() < 1e-6);

    write_trajectory(dir / "t2.txt", poses);
    const auto again = read_trajectory(dir / "t2.txt");
    REQUIRE(again.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(again[i].timestamp == poses[i].timestamp);
        CHECK((again[i].pose.R - poses[i].pose.R).norm() < 1e-12);
        CHECK((again[i].pose.t - poses[i].pose.t).norm() < 1e-12);
    }
    write_file(dir / "bad.txt", "0.1 0 0 0 0 0 1\n");
    CHECK_THROWS_AS(read_trajectory(dir / "bad.txt"), ParseError);
    write_file(dir / "zero.txt", "0.1 0 0 0 0 0 0 0\n");
    CHECK_THROWS_AS(read_trajectory(dir / "zero.txt"), ParseError);
}

TEST_CASE("manifest round trip and validation")
{
    TempDir dir;
    SequenceManifest m;
    m.frames = {{0.0, "rgb/a.png", "depth/a.png"}, {0.1, "rgb/b.png", "depth/b.png"}};
    m.ground_truth = GroundTruthPaths{"gt/boxes.json", "gt/points.ply", "gt/boxes2d"};
    m.pose_tolerance = 0.01;
    write_manifest(dir / "m.json", m);
    const auto r = read_manifest(dir / "m.json");
    CHECK(r.root == dir.path());
    REQUIRE(r.frames.size() == 2);
    CHECK(r.frames[1].depth == "depth/b.png");
    CHECK(r.pose_tolerance == 0.01);
    REQUIRE(r.ground_truth);
    CHECK(r.ground_truth->points == "gt/points.ply");
    CHECK(r.proposals_path(7) == dir.path() / "proposals" / "000007.csv");
    CHECK(r.boxes2d_path(3) == dir.path() / "gt/boxes2d" / "000003.csv");

    write_file(dir / "empty.json", R"({"frames": []})");
    CHECK_THROWS_AS(read_manifest(dir / "empty.json"), ParseError);
    write_file(dir / "order.json",
               R"({"frames": [{"timestamp": 1, "color": "a", "depth": "b"}, {"timestamp": 0, "color": "a", "depth": "b"}]})");
    CHECK_THROWS_AS(read_manifest(dir / "order.json"), ParseError);
    write_file(dir / "broken.json", "{");
    CHECK_THROWS_AS(read_manifest(dir / "broken.json"), ParseError);
}

TEST_CASE("proposals CSV")
{
    auto one = parse("0,0,10,10,0.9\n");
    REQUIRE(one.size() == 1);
    CHECK(one[0] == Proposal2D{0, 0, 10, 10, 0.9});

    CHECK(parse("x,y,w,h,c\n1,2,3,4,0.5\n").size() == 1);
    CHECK_THROWS_AS(parse("1,2,3,4,0.5\nx,y,w,h,c\n"), ParseError);

    try {
        parse("x,y,w,h,c\n0,0,10,10,0.9\n0,0,-5,10,0.9\n");
        FAIL("negative width accepted");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("0,0,10,0,0.9\n"), ParseError);
    CHECK_THROWS_AS(parse("0,0,10,10,-0.1\n"), ParseError);
    CHECK_THROWS_AS(parse("0,0,1,1,1\n0,0,ten,10,0.9\n"), ParseError);
    CHECK_THROWS_AS(parse("0,0,1,1,1\n0,0,10,10\n"), ParseError);

    ProposalReadStats stats;
    const auto clipped = parse("-5,-5,10,10,0.5\n95,90,10,20,0.5\n100,0,5,5,0.5\n10,10,5,5,0.5\n", 100, 100, &stats);
    REQUIRE(clipped.size() == 3);
    CHECK(clipped[0] == Proposal2D{0, 0, 5, 5, 0.5});
    CHECK(clipped[1] == Proposal2D{95, 90, 5, 10, 0.5});
    CHECK(stats.rows == 4);
    CHECK(stats.clipped == 2);
    CHECK(stats.outside == 1);

    TempDir dir;
    const std::vector<Proposal2D> props{{1, 2, 3, 4, 0.125}, {5, 6, 7, 8, 0.75}};
    write_proposals(dir / "p.csv", props);
    CHECK(read_proposals(dir / "p.csv", 100, 100) == props);
}

TEST_CASE("depth and color conversion")
{
    Image<std::uint16_t> raw(2, 1);
    raw(0, 0) = 5000;
    raw(1, 0) = 0;
    const DepthImage d = depth_from_raw(raw, 5000.0);
    CHECK(d(0, 0) == 1.0f);
    CHECK(d(1, 0) == 0.0f);
    CHECK(depth_to_raw(d, 5000.0) == raw);
    CHECK(depth_from_raw(raw, 1000.0)(0, 0) == 5.0f);

    Image<Rgb8> rgb(1, 1, Rgb8{0, 128, 255});
    const ColorImage c = color_from_rgb8(rgb);
    CHECK(c(0, 0).x() == 0.0f);
    CHECK(c(0, 0).z() == 1.0f);
    CHECK(color_to_rgb8(c) == rgb);
}

TEST_CASE("PNG round trips")
{
    TempDir dir;
    Image<std::uint16_t> g(5, 3);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = static_cast<std::uint16_t>(i * 4099);
    write_png_gray16(dir / "g.png", g);
    CHECK(read_png_gray16(dir / "g.png") == g);
    Image<Rgb8> c(3, 2);
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = Rgb8{static_cast<std::uint8_t>(i), static_cast<std::uint8_t>(40 * i), 7};
    write_png_rgb8(dir / "c.png", c);
    CHECK(read_png_rgb8(dir / "c.png") == c);
}

TEST_CASE("boxes JSON round trip and validation")
{
    std::mt19937_64 rng(17);
    std::vector<Box3D> boxes;
    for (int i = 0; i < 20; ++i)
        boxes.push_back(random_box(rng));
    const auto back = boxes_from_json(boxes_to_json(boxes));
    REQUIRE(back.size() == boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        CHECK(back[i].rotation == boxes[i].rotation);
        CHECK(back[i].min == boxes[i].min);
        CHECK(back[i].max == boxes[i].max);
        CHECK(back[i].cluster_size == boxes[i].cluster_size);
    }
    const std::string empty = boxes_to_json({});
    CHECK(empty.find('[') != std::string::npos);
    CHECK(boxes_from_json("[]").empty());

    Box3D nan_box = boxes[0];
    nan_box.min.x() = std::nan("");
    CHECK_THROWS_AS(boxes_to_json(std::vector<Box3D>{nan_box}), std::invalid_argument);

    std::string text = boxes_to_json(std::vector<Box3D>{boxes[0]});
    const auto corners = text.find("\"corners\"");
    REQUIRE(corners != std::string::npos);
    const auto num = text.find_first_of("-0123456789", corners);
    const auto end = text.find_first_of(",]", num);
    std::string bad = text;
    bad.replace(num, end - num, "NaN");
    CHECK_THROWS_AS(boxes_from_json(bad), ParseError);
    try {
        boxes_from_json(R"([{"rotation": [1,0,0,0,1,0,0,0,1], "min": [0,0,0]}])");
        FAIL("missing field accepted");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("[0].max") != std::string::npos);
    }
    CHECK_THROWS_AS(boxes_from_json(R"({"a": 1})"), ParseError);

    TempDir dir;
    write_boxes(dir / "b.json", boxes);
    CHECK(read_boxes(dir / "b.json").size() == boxes.size());
    const std::vector<GroundTruthBox> gt{{3, boxes[1]}, {4, boxes[2]}};
    write_ground_truth_boxes(dir / "gt.json", gt);
    const auto gt2 = read_ground_truth_boxes(dir / "gt.json");
    REQUIRE(gt2.size() == 2);
    CHECK(gt2[1].label == 4);
    CHECK(gt2[1].box.max == boxes[2].max);
}

TEST_CASE("2D box CSV round trip")
{
    TempDir dir;
    const std::vector<LabeledBox2D> boxes{{1, {3, 4, 10, 12}}, {2, {0, 0, 1, 1}}};
    write_boxes2d(dir / "b.csv", boxes);
    const auto back = read_boxes2d(dir / "b.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].label == 1);
    CHECK(back[0].box == EvalBox2D{3, 4, 10, 12});
}

TEST_CASE("PLY round trip with an independent size check")
{
    TempDir dir;
    PlyCloud cloud;
    for (int i = 0; i < 37; ++i) {
        cloud.positions.push_back(Vec3(i * 0.5, -i * 0.25, 1.0));
        cloud.colors.push_back(Rgb8{static_cast<std::uint8_t>(i), 2, 3});
    }
    cloud.int_properties.push_back({"label", std::vector<int>(37, -2)});
    cloud.float_properties.push_back({"confidence", std::vector<float>(37, 0.5f)});
    write_ply(dir / "c.ply", cloud);

    const std::string bytes = objprop::test::read_file(dir / "c.ply");
    const auto header_end = bytes.find("end_header\n");
    REQUIRE(header_end != std::string::npos);
    const std::string header = bytes.substr(0, header_end);
    CHECK(header.rfind("ply\nformat binary_little_endian 1.0\n", 0) == 0);
    CHECK(header.find("element vertex 37\n") != std::string::npos);
    CHECK(header.find("property float x\n") != std::string::npos);
    CHECK(header.find("property uchar red\n") != std::string::npos);
    const std::size_t stride = 3 * 4 + 3 + 4 + 4;
    CHECK(bytes.size() - header_end - std::string("end_header\n").size() == 37 * stride);

    const PlyCloud back = read_ply(dir / "c.ply");
    REQUIRE(back.positions.size() == 37);
    CHECK((back.positions[10] - Vec3(5.0, -2.5, 1.0)).norm() < 1e-6);
    CHECK(back.colors[10] == Rgb8{10, 2, 3});
    REQUIRE(back.int_property("label"));
    CHECK((*back.int_property("label"))[5] == -2);
    REQUIRE(back.float_property("confidence"));
    CHECK((*back.float_property("confidence"))[5] == 0.5f);
    CHECK_FALSE(back.int_property("missing"));

    const auto labeled = labeled_points_from_ply(back);
    REQUIRE(labeled.size() == 37);
    CHECK_FALSE(labeled[0].of_interest);

    PlyCloud single;
    single.positions.push_back(Vec3(1, 2, 3));
    write_ply(dir / "one.ply", single);
    CHECK(read_ply(dir / "one.ply").positions.size() == 1);
    CHECK_THROWS_AS(labeled_points_from_ply(single), ParseError);
    write_file(dir / "text.ply", "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n");
    CHECK_THROWS_AS(read_ply(dir / "text.ply"), ParseError);
}

TEST_CASE("heat colormap")
{
    CHECK(heat_color(1.0) == Rgb8{128, 0, 0});
    CHECK(heat_color(2.0) == heat_color(1.0));
    const Rgb8 cold = heat_color(0.0);
    CHECK(cold[0] == 0);
    CHECK(cold[1] == 0);
    CHECK(cold[2] > 100);
    // Red grows and blue shrinks from the cold to the hot end.
    CHECK(heat_color(0.8)[0] > heat_color(0.3)[0]);
    CHECK(heat_color(0.8)[2] < heat_color(0.3)[2]);
    CHECK(label_color(1) != label_color(2));
}

TEST_CASE("sequence reader streams frames in order")
{
    TempDir dir;
    write_fixture(dir, {0.0, 0.1, 0.2}, {0.0, 0.1, 0.2});
    SequenceReader reader(dir / "manifest.json");
    CHECK(reader.frame_total() == 3);
    std::vector<int> order;
    while (auto f = reader.next()) {
        order.push_back(f->index);
        CHECK(f->depth(0, 0) == doctest::Approx(0.2f * (f->index + 1)));
        CHECK((f->pose.camera_center() - Vec3(f->timestamp, 0, 0)).norm() < 1e-12);
        CHECK(f->color(0, 0).x() == doctest::Approx(10.0 / 255.0));
        if (f->index == 0) {
            REQUIRE(f->proposals.size() == 2);
            CHECK(f->proposals[1] == Proposal2D{6, 4, 2, 2, 0.25});
        } else {
            CHECK(f->proposals.empty());
        }
    }
    CHECK(order == std::vector<int>{0, 1, 2});
    CHECK(reader.skipped() == 0);
    CHECK(reader.clipped_proposals() == 1);

    reader.seek(1);
    CHECK(reader.next()->index == 1);
}

TEST_CASE("frames without a nearby pose are skipped with a warning")
{
    TempDir dir;
    write_fixture(dir, {0.0, 0.1, 0.2}, {0.0, 0.15, 0.2});  // 0.1 is 0.05 s from the nearest pose
    SequenceReader reader(dir / "manifest.json");
    std::vector<int> order;
    while (auto f = reader.next())
        order.push_back(f->index);
    CHECK(order == std::vector<int>{0, 2});
    CHECK(reader.skipped() == 1);
    REQUIRE(reader.warnings().size() == 1);
    CHECK(reader.warnings()[0].find("frame 1") != std::string::npos);
    CHECK_FALSE(reader.frame_pose(1));
    CHECK_THROWS_AS(reader.load(1), ParseError);
    CHECK_THROWS_AS(reader.load(5), std::out_of_range);
}
