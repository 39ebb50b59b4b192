#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctopt/volume.hpp"

namespace ctopt {

/// Walks the segment a->b through `grid`, invoking f(voxel_index, length_mm)
/// for every voxel the segment crosses. Incremental parametric (Siddon-style)
/// traversal; chord lengths are exact. Shared by the forward projector and
/// the reconstruction system rows so both see identical weights.
template <typename F>
void for_each_voxel_on_ray(const Volume& grid, const Vec3& a, const Vec3& b, F&& f) {
    const Vec3 dir = b - a;
    const double ray_len = dir.norm();
    if (ray_len == 0.0) {
        return;
    }

    const Vec3 lo = grid.world_min();
    const Vec3 hi = grid.world_max();

    double t_enter = 0.0;
    double t_exit = 1.0;
    const double d[3] = {dir.x, dir.y, dir.z};
    const double p0[3] = {a.x, a.y, a.z};
    const double box_lo[3] = {lo.x, lo.y, lo.z};
    const double box_hi[3] = {hi.x, hi.y, hi.z};

    for (int axis = 0; axis < 3; ++axis) {
        if (d[axis] == 0.0) {
            if (p0[axis] < box_lo[axis] || p0[axis] > box_hi[axis]) {
                return;
            }
            continue;
        }
        double t0 = (box_lo[axis] - p0[axis]) / d[axis];
        double t1 = (box_hi[axis] - p0[axis]) / d[axis];
        if (t0 > t1) {
            std::swap(t0, t1);
        }
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (t_enter >= t_exit) {
        return;
    }

    const int dims[3] = {grid.nx, grid.ny, grid.nz};
    const double inv_vs = 1.0 / grid.voxel_size;

    // Entry voxel from a point nudged inside the box.
    const double t_mid = t_enter + 1e-12 * (t_exit - t_enter);
    int idx[3];
    int step[3];
    double t_next[3];
    double dt[3];
    for (int axis = 0; axis < 3; ++axis) {
        const double entry = p0[axis] + t_mid * d[axis];
        idx[axis] = std::clamp(static_cast<int>(std::floor((entry - box_lo[axis]) * inv_vs)),
                               0, dims[axis] - 1);
        if (d[axis] > 0.0) {
            step[axis] = 1;
            const double boundary = box_lo[axis] + (idx[axis] + 1) * grid.voxel_size;
            t_next[axis] = (boundary - p0[axis]) / d[axis];
            dt[axis] = grid.voxel_size / d[axis];
        } else if (d[axis] < 0.0) {
            step[axis] = -1;
            const double boundary = box_lo[axis] + idx[axis] * grid.voxel_size;
            t_next[axis] = (boundary - p0[axis]) / d[axis];
            dt[axis] = -grid.voxel_size / d[axis];
        } else {
            step[axis] = 0;
            t_next[axis] = std::numeric_limits<double>::infinity();
            dt[axis] = std::numeric_limits<double>::infinity();
        }
    }

    double t = t_enter;
    while (t < t_exit) {
        int cross_axis = 0;
        if (t_next[1] < t_next[cross_axis]) cross_axis = 1;
        if (t_next[2] < t_next[cross_axis]) cross_axis = 2;

        const double t_stop = std::min(t_next[cross_axis], t_exit);
        const double seg = (t_stop - t) * ray_len;
        if (seg > 0.0) {
            f(grid.index(idx[0], idx[1], idx[2]), seg);
        }
        t = t_stop;
        if (t_stop == t_exit) {
            break;
        }
        idx[cross_axis] += step[cross_axis];
        if (idx[cross_axis] < 0 || idx[cross_axis] >= dims[cross_axis]) {
            break;
        }
        t_next[cross_axis] += dt[cross_axis];
    }
}

/// Line integral of attenuation along the segment a->b (mm * 1/mm).
inline double line_integral(const Volume& grid, const Vec3& a, const Vec3& b) {
    double sum = 0.0;
    for_each_voxel_on_ray(grid, a, b,
                          [&](std::size_t i, double len) { sum += grid.values[i] * len; });
    return sum;
}

} // namespace ctopt
