#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctopt/vec3.hpp"

namespace ctopt {

/// Detector panel description shared by every pose of a trajectory.
struct DetectorSpec {
    int rows = 64;
    int cols = 64;
    double pixel_pitch = 1.2; // mm, isotropic
};

/// One cone-beam acquisition: point source plus oriented flat-panel detector.
struct Pose {
    Vec3 source_position;  // mm
    Vec3 detector_center;  // mm
    Vec3 detector_u_axis;  // unit, along columns
    Vec3 detector_v_axis;  // unit, along rows
    double pixel_pitch = 1.0; // mm
    int detector_rows = 0;
    int detector_cols = 0;

    /// Throws GeometryError unless the axes are orthonormal (tolerance 1e-9)
    /// and the source is distinct from the detector center.
    void validate() const;

    Vec3 detector_normal() const { return detector_u_axis.cross(detector_v_axis); }

    /// World position of the (possibly fractional) pixel center (row, col).
    /// The detector center sits at pixel ((rows-1)/2, (cols-1)/2).
    Vec3 pixel_position(double row, double col) const;

    /// Pose with the detector centered on the ray source->target at distance
    /// sdd behind the target, panel perpendicular to that ray.
    static Pose facing(const Vec3& source, const Vec3& target, double sdd,
                       const DetectorSpec& detector);
};

enum class TrajectoryKind { spherical_candidates, circular, optimized };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

struct Trajectory {
    TrajectoryKind kind = TrajectoryKind::spherical_candidates;
    std::vector<Pose> poses;

    /// Nonempty, all poses valid and sharing detector size and pitch.
    void validate() const;

    void save(const std::filesystem::path& file) const;
    static Trajectory load(const std::filesystem::path& file);
};

/// Axis-aligned volume of interest around the evaluation point P.
struct Voi {
    Vec3 center;      // mm; the point P completeness is evaluated at
    Vec3 half_extent; // mm, all components > 0

    void validate() const;
};

/// Half-open pixel rectangle on the detector, rows [row_begin,row_end) x
/// cols [col_begin,col_end). `clamped` is set when the projected VOI had to
/// be cut to the detector bounds.
struct RoiRect {
    int row_begin = 0;
    int row_end = 0;
    int col_begin = 0;
    int col_end = 0;
    bool clamped = false;

    int rows() const { return row_end - row_begin; }
    int cols() const { return col_end - col_begin; }
    bool empty() const { return rows() <= 0 || cols() <= 0; }
};

/// Point i of an n-point Fibonacci lattice on the full unit sphere.
Vec3 fibonacci_sphere_point(int i, int n);

/// n quasi-uniform sources on a sphere of `radius` around `center`, detector
/// opposite each source at distance `sdd` and aimed at `center`.
Trajectory spherical_trajectory(int n, double radius, double sdd,
                                const DetectorSpec& detector,
                                const Vec3& center = Vec3{});

/// n equally spaced sources on the circle of `radius` in the plane through
/// `center` with the given normal.
Trajectory circular_trajectory(int n, double radius, double sdd,
                               const Vec3& plane_normal,
                               const DetectorSpec& detector,
                               const Vec3& center = Vec3{});

/// Unit vector from source toward p. Throws GeometryError when coincident.
Vec3 viewing_direction(const Vec3& source, const Vec3& p);

/// Smallest pixel rectangle containing the perspective projection of all 8
/// VOI corners, clamped to the detector. Throws NoRoiError when the VOI is
/// behind the source or projects entirely off-detector.
RoiRect voi_to_roi(const Pose& pose, const Voi& voi);

} // namespace ctopt
