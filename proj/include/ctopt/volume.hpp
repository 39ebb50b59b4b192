#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ctopt/vec3.hpp"

namespace ctopt {

/// Dense voxel grid of attenuation values (1/mm). `origin` is the world
/// position of the low corner of voxel (0,0,0); voxels are isotropic cubes.
struct Volume {
    int nx = 0;
    int ny = 0;
    int nz = 0;
    double voxel_size = 1.0; // mm
    Vec3 origin;             // mm
    std::vector<float> values;

    Volume() = default;
    Volume(int nx_, int ny_, int nz_, double voxel_size_, const Vec3& origin_)
        : nx(nx_), ny(ny_), nz(nz_), voxel_size(voxel_size_), origin(origin_),
          values(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0f) {}

    /// Cube grid of side `n` voxels centered on `center`.
    static Volume centered_cube(int n, double voxel_size, const Vec3& center = Vec3{});

    std::size_t size() const { return values.size(); }
    std::size_t index(int ix, int iy, int iz) const {
        return static_cast<std::size_t>(ix) +
               static_cast<std::size_t>(nx) * (static_cast<std::size_t>(iy) +
                                               static_cast<std::size_t>(ny) * iz);
    }
    float& at(int ix, int iy, int iz) { return values[index(ix, iy, iz)]; }
    float at(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }

    Vec3 world_min() const { return origin; }
    Vec3 world_max() const {
        return origin + Vec3{nx * voxel_size, ny * voxel_size, nz * voxel_size};
    }

    /// Raw little-endian float32 payload next to a JSON header
    /// {dims, voxel_size, origin}.
    void save(const std::filesystem::path& raw_file) const;
    static Volume load(const std::filesystem::path& raw_file);

    /// 8-bit PGM center slices (axial/coronal/sagittal), window [0, max].
    void write_center_slices(const std::filesystem::path& prefix) const;
};

} // namespace ctopt
