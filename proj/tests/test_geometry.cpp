#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "ctopt/errors.hpp"
#include "ctopt/geometry.hpp"
#include "ctopt/rng.hpp"

using namespace ctopt;

namespace {

const DetectorSpec kDet{64, 64, 1.2};

double angle_deg(const Vec3& a, const Vec3& b) {
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 /
           M_PI;
}

} // namespace

TEST_CASE("spherical trajectory: single pose sits at radius with sdd detector") {
    const Trajectory traj = spherical_trajectory(1, 100.0, 200.0, kDet);
    REQUIRE(traj.poses.size() == 1);
    const Pose& pose = traj.poses.front();
    CHECK(pose.source_position.norm() == doctest::Approx(100.0).epsilon(1e-12));
    CHECK((pose.source_position - pose.detector_center).norm() ==
          doctest::Approx(200.0).epsilon(1e-12));
}

TEST_CASE("spherical trajectory: magnification two configuration") {
    const Trajectory traj = spherical_trajectory(16, 100.0, 200.0, kDet);
    for (const Pose& pose : traj.poses) {
        const double sod = pose.source_position.norm();
        const double sdd = (pose.source_position - pose.detector_center).norm();
        CHECK(sdd / sod == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("spherical trajectory: all sources on the sphere, poses orthonormal") {
    const Trajectory traj = spherical_trajectory(200, 80.0, 160.0, kDet);
    for (const Pose& pose : traj.poses) {
        CHECK(std::abs(pose.source_position.norm() - 80.0) < 1e-9);
        CHECK_NOTHROW(pose.validate());
        // detector aimed at the center
        const Vec3 axis = viewing_direction(pose.source_position, Vec3{});
        CHECK(std::abs(pose.detector_normal().dot(axis)) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("spherical trajectory: 1000-point lattice is well separated") {
    std::vector<Vec3> points;
    points.reserve(1000);
    for (int i = 0; i < 1000; ++i) {
        points.push_back(fibonacci_sphere_point(i, 1000));
    }
    double min_angle = 360.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            min_angle = std::min(min_angle, angle_deg(points[i], points[j]));
        }
    }
    CHECK(min_angle > 3.0);
    CHECK(min_angle == doctest::Approx(5.6043).epsilon(1e-3));
}

TEST_CASE("spherical trajectory: argument validation") {
    CHECK_THROWS_AS(spherical_trajectory(0, 100.0, 200.0, kDet), std::invalid_argument);
    CHECK_THROWS_AS(spherical_trajectory(10, -1.0, 200.0, kDet), std::invalid_argument);
    CHECK_THROWS_AS(spherical_trajectory(10, 100.0, 90.0, kDet), std::invalid_argument);
}

TEST_CASE("circular trajectory: four poses land on the axes") {
    const Trajectory traj = circular_trajectory(4, 50.0, 120.0, Vec3{0, 0, 1}, kDet);
    REQUIRE(traj.poses.size() == 4);
    const std::vector<Vec3> expected = {
        {50, 0, 0}, {0, 50, 0}, {-50, 0, 0}, {0, -50, 0}};
    for (int i = 0; i < 4; ++i) {
        const Vec3 diff = traj.poses[i].source_position - expected[i];
        CHECK(diff.norm() < 1e-9);
        CHECK(traj.poses[i].source_position.z == doctest::Approx(0.0));
    }
}

TEST_CASE("circular trajectory: radii exact for arbitrary normals") {
    const Vec3 normal = Vec3{0.3, -0.8, 0.52}.normalized();
    const Trajectory traj = circular_trajectory(50, 75.0, 160.0, normal, kDet);
    REQUIRE(traj.poses.size() == 50);
    for (const Pose& pose : traj.poses) {
        CHECK(std::abs(pose.source_position.norm() - 75.0) < 1e-9);
        CHECK(std::abs(pose.source_position.dot(normal)) < 1e-9); // in-plane
    }
}

TEST_CASE("circular trajectory: zero normal rejected") {
    CHECK_THROWS_AS(circular_trajectory(4, 50.0, 120.0, Vec3{}, kDet),
                    std::invalid_argument);
}

TEST_CASE("viewing direction: axis aligned and diagonal") {
    const Vec3 d1 = viewing_direction(Vec3{2, 0, 0}, Vec3{});
    CHECK(d1.x == doctest::Approx(-1.0));
    CHECK(d1.y == doctest::Approx(0.0));
    CHECK(d1.z == doctest::Approx(0.0));

    const Vec3 d2 = viewing_direction(Vec3{1, 1, 0}, Vec3{});
    CHECK(d2.x == doctest::Approx(-std::sqrt(2.0) / 2.0));
    CHECK(d2.y == doctest::Approx(-std::sqrt(2.0) / 2.0));
    CHECK(d2.z == doctest::Approx(0.0));
}

TEST_CASE("viewing direction: unit norm for random inputs") {
    CounterRng rng(7);
    for (int i = 0; i < 100; ++i) {
        const Vec3 s{rng.next_double(-50, 50), rng.next_double(-50, 50),
                     rng.next_double(-50, 50)};
        const Vec3 p{rng.next_double(-50, 50), rng.next_double(-50, 50),
                     rng.next_double(-50, 50)};
        if ((p - s).norm() == 0.0) {
            continue;
        }
        CHECK(std::abs(viewing_direction(s, p).norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("viewing direction: coincident points rejected") {
    CHECK_THROWS_AS(viewing_direction(Vec3{1, 2, 3}, Vec3{1, 2, 3}), GeometryError);
}

TEST_CASE("voi_to_roi: on-axis VOI produces a centered ROI") {
    const Pose pose = Pose::facing(Vec3{-80, 0, 0}, Vec3{}, 160.0, kDet);
    const RoiRect roi = voi_to_roi(pose, Voi{Vec3{}, Vec3{4.8, 4.8, 4.8}});
    const double center = 0.5 * (kDet.rows - 1);
    CHECK(std::abs(0.5 * (roi.row_begin + roi.row_end - 1) - center) <= 1.0);
    CHECK(std::abs(0.5 * (roi.col_begin + roi.col_end - 1) - center) <= 1.0);
    CHECK_FALSE(roi.clamped);
}

TEST_CASE("voi_to_roi: point VOI maps to a single pixel") {
    const Pose pose = Pose::facing(Vec3{-80, 0, 0}, Vec3{}, 160.0, kDet);
    const RoiRect roi = voi_to_roi(pose, Voi{Vec3{1.0, 0.7, -0.3}, Vec3{1e-9, 1e-9, 1e-9}});
    CHECK(roi.rows() == 1);
    CHECK(roi.cols() == 1);
}

TEST_CASE("voi_to_roi: magnification-two width matches the pinhole oracle") {
    // radius 1000, sdd 2000 -> magnification 2; half extent 5 mm; pitch 0.45
    const DetectorSpec det{128, 128, 0.45};
    const Pose pose = Pose::facing(Vec3{-1000, 0, 0}, Vec3{}, 2000.0, det);
    const RoiRect roi = voi_to_roi(pose, Voi{Vec3{}, Vec3{5, 5, 5}});

    // independent pinhole arithmetic: corners at depth 1000 -/+ 5, lateral 5
    double min_px = 1e9, max_px = -1e9;
    for (double depth : {995.0, 1005.0}) {
        for (double lateral : {-5.0, 5.0}) {
            const double u_mm = 2000.0 * lateral / depth;
            const double px = u_mm / 0.45 + 0.5 * (128 - 1);
            min_px = std::min(min_px, px);
            max_px = std::max(max_px, px);
        }
    }
    const int expected = static_cast<int>(std::floor(max_px + 0.5)) -
                         static_cast<int>(std::floor(min_px + 0.5)) + 1;
    CHECK(expected == 46);
    CHECK(roi.cols() == expected);
    CHECK(roi.rows() == expected);
    // close to the thin-object estimate 2*(2*5)/0.45 = 44.4 px
    CHECK(std::abs(roi.cols() - 2.0 * (2.0 * 5.0) / 0.45) <= 2.5);
}

TEST_CASE("voi_to_roi: monotone in the VOI half extent") {
    CounterRng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const Vec3 src = fibonacci_sphere_point(trial, 25) * 80.0;
        const Pose pose = Pose::facing(src, Vec3{}, 160.0, kDet);
        const double h = rng.next_double(0.5, 3.0);
        const RoiRect small = voi_to_roi(pose, Voi{Vec3{}, Vec3{h, h, h}});
        const RoiRect big = voi_to_roi(pose, Voi{Vec3{}, Vec3{h * 2, h * 2, h * 2}});
        CHECK(big.row_begin <= small.row_begin);
        CHECK(big.col_begin <= small.col_begin);
        CHECK(big.row_end >= small.row_end);
        CHECK(big.col_end >= small.col_end);
    }
}

TEST_CASE("voi_to_roi: clamped flag and failure modes") {
    const Pose pose = Pose::facing(Vec3{-80, 0, 0}, Vec3{}, 160.0, kDet);
    // larger than the detector footprint -> clamped
    const RoiRect roi = voi_to_roi(pose, Voi{Vec3{}, Vec3{25, 25, 25}});
    CHECK(roi.clamped);
    // behind the source
    CHECK_THROWS_AS(voi_to_roi(pose, Voi{Vec3{-160, 0, 0}, Vec3{1, 1, 1}}), NoRoiError);
    // in front but projecting entirely off the detector
    CHECK_THROWS_AS(voi_to_roi(pose, Voi{Vec3{0, 60, 0}, Vec3{1, 1, 1}}), NoRoiError);
    // degenerate half extent
    CHECK_THROWS_AS(voi_to_roi(pose, Voi{Vec3{}, Vec3{0, 1, 1}}), std::invalid_argument);
}

TEST_CASE("pose validation rejects broken frames") {
    const Pose pose = Pose::facing(Vec3{-80, 0, 0}, Vec3{}, 160.0, kDet);
    Pose bad = pose;
    bad.detector_u_axis = bad.detector_u_axis * 1.01;
    CHECK_THROWS_AS(bad.validate(), GeometryError);

    bad = pose;
    bad.detector_v_axis = (bad.detector_u_axis + bad.detector_v_axis).normalized();
    CHECK_THROWS_AS(bad.validate(), GeometryError);

    bad = pose;
    bad.detector_center = bad.source_position;
    CHECK_THROWS_AS(bad.validate(), GeometryError);
}

TEST_CASE("trajectory JSON round-trip") {
    const auto file = std::filesystem::temp_directory_path() / "ctopt_traj_test.json";
    const Trajectory traj = spherical_trajectory(5, 80.0, 160.0, kDet);
    traj.save(file);
    const Trajectory loaded = Trajectory::load(file);
    REQUIRE(loaded.poses.size() == traj.poses.size());
    CHECK(loaded.kind == traj.kind);
    for (std::size_t i = 0; i < traj.poses.size(); ++i) {
        CHECK((loaded.poses[i].source_position - traj.poses[i].source_position).norm() == 0.0);
        CHECK((loaded.poses[i].detector_center - traj.poses[i].detector_center).norm() == 0.0);
        CHECK(loaded.poses[i].pixel_pitch == traj.poses[i].pixel_pitch);
    }
    std::filesystem::remove(file);

    CHECK_THROWS_AS(Trajectory::load("/nonexistent/trajectory.json"), FormatError);
}
