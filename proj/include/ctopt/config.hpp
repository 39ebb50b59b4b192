#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ctopt/evaluation.hpp"
#include "ctopt/geometry.hpp"
#include "ctopt/phantom.hpp"
#include "ctopt/reconstruction.hpp"
#include "ctopt/selection.hpp"

namespace ctopt {

/// Whole-pipeline configuration. Parsed strictly: unknown keys are rejected
/// so typos fail before any stage runs.
struct RunConfig {
    PhantomSpec phantom;

    int n_candidates = 200;
    double source_radius_mm = 80.0;
    double sdd_mm = 160.0; // magnification = sdd / radius

    DetectorSpec detector;
    Voi voi{Vec3{}, Vec3{4.8, 4.8, 4.8}};

    double alpha = 0.05;
    double delta_gamma_deg = 0.573;
    int m_hemisphere = 1000;
    int k = 50;

    GruHyper gru;
    SelectorWeights weights;

    long photons_per_ray = 10000; // 0 disables noise
    Vec3 circular_normal{0.0, 0.0, 1.0};
    ArtParams art;

    VoxelBox cnr_roi;        // empty -> derived from the VOI
    VoxelBox cnr_background; // empty -> corner box

    std::uint64_t seed = 1;
    int threads = 0; // 0 = hardware concurrency
    std::string out_dir = "out";

    // stage-scoped seeds derived from the master seed
    std::uint64_t noise_seed() const;
    std::uint64_t selection_seed() const;
    std::uint64_t art_seed() const;

    /// CNR boxes with defaults resolved against the phantom grid.
    VoxelBox resolved_cnr_roi() const;
    VoxelBox resolved_cnr_background() const;

    void validate() const;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::filesystem::path& file);
    nlohmann::json to_json() const;
};

} // namespace ctopt
