#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ctopt/geometry.hpp"
#include "ctopt/volume.hpp"

namespace ctopt {

/// One simulated detector readout, normalized so unattenuated rays read 1.0.
struct ProjectionImage {
    int rows = 0;
    int cols = 0;
    std::vector<float> pixels; // row-major
    Pose pose;
    RoiRect roi;
    int id = -1; // candidate index

    float& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * cols + c]; }
    float at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * cols + c]; }

    /// Minimum pixel value inside the ROI.
    float roi_min() const;
};

/// Monochromatic Beer-Lambert forward projection of `phantom` for one pose.
/// Each pixel is exp(-integral of mu) along source->pixel; the ROI is the
/// projected VOI.
ProjectionImage forward_project(const Volume& phantom, const Pose& pose, const Voi& voi,
                                int id = -1);

/// Poisson photon noise, pixel-wise deterministic in (seed, id, pixel index).
ProjectionImage apply_noise(const ProjectionImage& proj, long photons_per_ray,
                            std::uint64_t seed);

/// Projection set sharing one detector; persists as a directory with
/// manifest.json plus one raw little-endian float32 file per projection.
struct ProjectionStack {
    DetectorSpec detector;
    std::vector<ProjectionImage> projections;

    const ProjectionImage* find(int id) const;
    const ProjectionImage& by_id(int id) const; // throws std::invalid_argument
};

void write_stack(const std::filesystem::path& dir, const ProjectionStack& stack);
ProjectionStack read_stack(const std::filesystem::path& dir);

} // namespace ctopt
