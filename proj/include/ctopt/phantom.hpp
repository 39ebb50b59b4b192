#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctopt/volume.hpp"

namespace ctopt {

/// Voxel phantom descriptor. Presets expand to boxes/bores internally:
///   uniform_cube  - homogeneous cube of `side_voxels` in the grid center
///   test_specimen - flat plate with two bores and a dense corner block;
///                   in-plane chords attenuate far more than transverse ones
///   custom        - boxes painted then bores carved, in listed order
struct PhantomSpec {
    struct Box {
        int x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 0; // voxel, half-open
        double mu = 0.0;                                    // 1/mm
    };
    struct Bore {
        char axis = 'z';
        double center_a = 0.0; // voxel units in the two cross axes,
        double center_b = 0.0; // ordered x,y,z with `axis` skipped
        double radius = 0.0;   // voxel units
    };

    std::string preset = "test_specimen";
    int dims = 64;
    double voxel_size_mm = 0.3;
    double mu = 0.02;     // uniform_cube attenuation
    int side_voxels = 32; // uniform_cube side
    std::vector<Box> boxes;
    std::vector<Bore> bores;

    static PhantomSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Deterministic voxel phantom centered on the origin.
/// Throws std::invalid_argument for unknown presets.
Volume build_phantom(const PhantomSpec& spec);

} // namespace ctopt
