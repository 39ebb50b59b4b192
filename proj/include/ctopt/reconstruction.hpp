#pragma once

#include <cstdint>
#include <span>

#include "ctopt/projection.hpp"
#include "ctopt/volume.hpp"

namespace ctopt {

struct ArtParams {
    int sweeps = 20;
    double relaxation = 0.25; // in (0, 2)
    std::uint64_t seed = 0;   // ray-order shuffle
};

/// Voxel grid the reconstruction writes into; values start at zero.
struct GridSpec {
    int nx = 64, ny = 64, nz = 64;
    double voxel_size = 0.3; // mm
    Vec3 origin;             // low corner, mm

    Volume make_volume() const { return Volume(nx, ny, nz, voxel_size, origin); }
    static GridSpec centered_cube(int n, double voxel_size, const Vec3& center = Vec3{});
};

/// Kaczmarz sweeps over the rays of the selected projections:
///   x <- x + lambda (b_i - <a_i, x>) / |a_i|^2 a_i
/// Ray order is shuffled per sweep (seeded); measurements are -ln(intensity)
/// with intensities clamped to >= 1e-6; nonnegativity clamp after each
/// sweep; zero-weight rays skipped. Ray weights come from the same grid
/// traversal as the forward projector.
Volume art_reconstruct(const ProjectionStack& stack, std::span<const int> subset_ids,
                       const GridSpec& grid, const ArtParams& params);

/// l2 norm of Ax - b over the subset's rays.
double residual_norm(const ProjectionStack& stack, std::span<const int> subset_ids,
                     const Volume& volume);

} // namespace ctopt
