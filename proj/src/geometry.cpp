#include "ctopt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "ctopt/errors.hpp"

namespace ctopt {

namespace {

constexpr double kOrthoTol = 1e-9;
constexpr double kGoldenAngle = 2.399963229728653; // pi * (3 - sqrt(5))

} // namespace

void Pose::validate() const {
    if (std::abs(detector_u_axis.norm() - 1.0) > kOrthoTol ||
        std::abs(detector_v_axis.norm() - 1.0) > kOrthoTol) {
        throw GeometryError("detector axes must be unit length");
    }
    if (std::abs(detector_u_axis.dot(detector_v_axis)) > kOrthoTol) {
        throw GeometryError("detector axes must be orthogonal");
    }
    if ((source_position - detector_center).norm() == 0.0) {
        throw GeometryError("source coincides with detector center");
    }
    if (detector_rows <= 0 || detector_cols <= 0 || pixel_pitch <= 0.0) {
        throw GeometryError("detector size and pitch must be positive");
    }
}

Vec3 Pose::pixel_position(double row, double col) const {
    const double u_mm = (col - 0.5 * (detector_cols - 1)) * pixel_pitch;
    const double v_mm = (row - 0.5 * (detector_rows - 1)) * pixel_pitch;
    return detector_center + detector_u_axis * u_mm + detector_v_axis * v_mm;
}

Pose Pose::facing(const Vec3& source, const Vec3& target, double sdd,
                  const DetectorSpec& detector) {
    const Vec3 dir = viewing_direction(source, target);
    const OrthoBasis basis = orthobasis(dir);
    Pose pose;
    pose.source_position = source;
    pose.detector_center = source + dir * sdd;
    pose.detector_u_axis = basis.u;
    pose.detector_v_axis = basis.v;
    pose.pixel_pitch = detector.pixel_pitch;
    pose.detector_rows = detector.rows;
    pose.detector_cols = detector.cols;
    return pose;
}

std::string to_string(TrajectoryKind kind) {
    switch (kind) {
    case TrajectoryKind::spherical_candidates: return "spherical_candidates";
    case TrajectoryKind::circular: return "circular";
    case TrajectoryKind::optimized: return "optimized";
    }
    return "unknown";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
    if (s == "spherical_candidates") return TrajectoryKind::spherical_candidates;
    if (s == "circular") return TrajectoryKind::circular;
    if (s == "optimized") return TrajectoryKind::optimized;
    throw FormatError("unknown trajectory kind: " + s);
}

void Trajectory::validate() const {
    if (poses.empty()) {
        throw GeometryError("trajectory has no poses");
    }
    for (const Pose& pose : poses) {
        pose.validate();
        if (pose.detector_rows != poses.front().detector_rows ||
            pose.detector_cols != poses.front().detector_cols ||
            pose.pixel_pitch != poses.front().pixel_pitch) {
            throw GeometryError("poses must share detector size and pitch");
        }
    }
}

namespace {

nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw FormatError("expected a 3-element array");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

void Trajectory::save(const std::filesystem::path& file) const {
    nlohmann::json doc;
    doc["kind"] = to_string(kind);
    nlohmann::json list = nlohmann::json::array();
    for (const Pose& pose : poses) {
        list.push_back({{"source", vec_to_json(pose.source_position)},
                        {"detector_center", vec_to_json(pose.detector_center)},
                        {"u", vec_to_json(pose.detector_u_axis)},
                        {"v", vec_to_json(pose.detector_v_axis)},
                        {"pitch", pose.pixel_pitch},
                        {"rows", pose.detector_rows},
                        {"cols", pose.detector_cols}});
    }
    doc["poses"] = std::move(list);
    std::ofstream out(file);
    if (!out) {
        throw FormatError("cannot write trajectory file: " + file.string());
    }
    out << doc.dump(2) << "\n";
}

Trajectory Trajectory::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw FormatError("cannot open trajectory file: " + file.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed trajectory JSON in " + file.string() + ": " + e.what());
    }
    Trajectory traj;
    traj.kind = trajectory_kind_from_string(doc.at("kind").get<std::string>());
    for (const nlohmann::json& p : doc.at("poses")) {
        Pose pose;
        pose.source_position = vec_from_json(p.at("source"));
        pose.detector_center = vec_from_json(p.at("detector_center"));
        pose.detector_u_axis = vec_from_json(p.at("u"));
        pose.detector_v_axis = vec_from_json(p.at("v"));
        pose.pixel_pitch = p.at("pitch").get<double>();
        pose.detector_rows = p.at("rows").get<int>();
        pose.detector_cols = p.at("cols").get<int>();
        traj.poses.push_back(pose);
    }
    traj.validate();
    return traj;
}

void Voi::validate() const {
    if (half_extent.x <= 0.0 || half_extent.y <= 0.0 || half_extent.z <= 0.0) {
        throw std::invalid_argument("VOI half extents must be positive");
    }
}

Vec3 fibonacci_sphere_point(int i, int n) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * i;
    return {r * std::cos(phi), r * std::sin(phi), z};
}

Trajectory spherical_trajectory(int n, double radius, double sdd,
                                const DetectorSpec& detector, const Vec3& center) {
    if (n < 1) {
        throw std::invalid_argument("spherical_trajectory: n must be >= 1");
    }
    if (radius <= 0.0 || sdd <= radius) {
        throw std::invalid_argument("spherical_trajectory: need 0 < radius < sdd");
    }
    Trajectory traj;
    traj.kind = TrajectoryKind::spherical_candidates;
    traj.poses.reserve(n);
    for (int i = 0; i < n; ++i) {
        const Vec3 source = center + fibonacci_sphere_point(i, n) * radius;
        traj.poses.push_back(Pose::facing(source, center, sdd, detector));
    }
    traj.validate();
    return traj;
}

Trajectory circular_trajectory(int n, double radius, double sdd, const Vec3& plane_normal,
                               const DetectorSpec& detector, const Vec3& center) {
    if (n < 1) {
        throw std::invalid_argument("circular_trajectory: n must be >= 1");
    }
    if (radius <= 0.0 || sdd <= radius) {
        throw std::invalid_argument("circular_trajectory: need 0 < radius < sdd");
    }
    if (plane_normal.norm() == 0.0) {
        throw std::invalid_argument("circular_trajectory: plane normal must be nonzero");
    }
    const OrthoBasis basis = orthobasis(plane_normal);
    Trajectory traj;
    traj.kind = TrajectoryKind::circular;
    traj.poses.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * i / n;
        const Vec3 source =
            center + (basis.u * std::cos(theta) + basis.v * std::sin(theta)) * radius;
        traj.poses.push_back(Pose::facing(source, center, sdd, detector));
    }
    traj.validate();
    return traj;
}

Vec3 viewing_direction(const Vec3& source, const Vec3& p) {
    const Vec3 diff = p - source;
    const double n = diff.norm();
    if (n == 0.0) {
        throw GeometryError("viewing_direction: source coincides with target point");
    }
    return diff / n;
}

RoiRect voi_to_roi(const Pose& pose, const Voi& voi) {
    voi.validate();
    const Vec3 normal = pose.detector_normal();
    const double plane_offset = (pose.detector_center - pose.source_position).dot(normal);

    double min_row = std::numeric_limits<double>::max();
    double max_row = std::numeric_limits<double>::lowest();
    double min_col = std::numeric_limits<double>::max();
    double max_col = std::numeric_limits<double>::lowest();

    for (int corner = 0; corner < 8; ++corner) {
        const Vec3 offset{(corner & 1) ? voi.half_extent.x : -voi.half_extent.x,
                          (corner & 2) ? voi.half_extent.y : -voi.half_extent.y,
                          (corner & 4) ? voi.half_extent.z : -voi.half_extent.z};
        const Vec3 ray = voi.center + offset - pose.source_position;
        const double depth = ray.dot(normal);
        // Require the corner strictly between source and detector plane side.
        if (depth * plane_offset <= 0.0) {
            throw NoRoiError("voi_to_roi: VOI corner behind the source");
        }
        const double t = plane_offset / depth;
        const Vec3 hit = pose.source_position + ray * t - pose.detector_center;
        const double col = hit.dot(pose.detector_u_axis) / pose.pixel_pitch +
                           0.5 * (pose.detector_cols - 1);
        const double row = hit.dot(pose.detector_v_axis) / pose.pixel_pitch +
                           0.5 * (pose.detector_rows - 1);
        min_row = std::min(min_row, row);
        max_row = std::max(max_row, row);
        min_col = std::min(min_col, col);
        max_col = std::max(max_col, col);
    }

    // Pixel containing a point: nearest integer index.
    int r0 = static_cast<int>(std::floor(min_row + 0.5));
    int r1 = static_cast<int>(std::floor(max_row + 0.5)) + 1;
    int c0 = static_cast<int>(std::floor(min_col + 0.5));
    int c1 = static_cast<int>(std::floor(max_col + 0.5)) + 1;

    RoiRect roi;
    roi.clamped = r0 < 0 || c0 < 0 || r1 > pose.detector_rows || c1 > pose.detector_cols;
    roi.row_begin = std::clamp(r0, 0, pose.detector_rows);
    roi.row_end = std::clamp(r1, 0, pose.detector_rows);
    roi.col_begin = std::clamp(c0, 0, pose.detector_cols);
    roi.col_end = std::clamp(c1, 0, pose.detector_cols);
    if (roi.empty()) {
        throw NoRoiError("voi_to_roi: VOI projects entirely off the detector");
    }
    return roi;
}

} // namespace ctopt
