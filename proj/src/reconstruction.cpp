#include "ctopt/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctopt/ray_trace.hpp"
#include "ctopt/rng.hpp"

namespace ctopt {

GridSpec GridSpec::centered_cube(int n, double voxel_size, const Vec3& center) {
    const double half = 0.5 * n * voxel_size;
    return {n, n, n, voxel_size, center - Vec3{half, half, half}};
}

namespace {

constexpr float kIntensityFloor = 1e-6f;

struct Ray {
    const ProjectionImage* proj;
    int row;
    int col;

    Vec3 pixel() const { return proj->pose.pixel_position(row, col); }
    double measurement() const {
        return -std::log(std::max(proj->at(row, col), kIntensityFloor));
    }
};

std::vector<Ray> collect_rays(const ProjectionStack& stack, std::span<const int> subset_ids) {
    std::vector<Ray> rays;
    for (int id : subset_ids) {
        const ProjectionImage& proj = stack.by_id(id);
        for (int r = 0; r < proj.rows; ++r)
            for (int c = 0; c < proj.cols; ++c)
                rays.push_back({&proj, r, c});
    }
    return rays;
}

} // namespace

Volume art_reconstruct(const ProjectionStack& stack, std::span<const int> subset_ids,
                       const GridSpec& grid, const ArtParams& params) {
    if (subset_ids.empty()) {
        throw std::invalid_argument("art_reconstruct: empty projection subset");
    }
    if (params.relaxation < 0.0 || params.relaxation >= 2.0) {
        throw std::invalid_argument("art_reconstruct: relaxation must lie in [0, 2)");
    }
    Volume volume = grid.make_volume();
    std::vector<Ray> rays = collect_rays(stack, subset_ids);
    // rays grazing less than ~one voxel of the grid produce wild single-voxel
    // updates; treat them like zero-weight rows
    const double norm_floor = grid.voxel_size * grid.voxel_size;

    std::vector<std::uint32_t> order(rays.size());
    std::vector<std::pair<std::uint32_t, float>> hits; // (voxel, weight mm)
    hits.reserve(512);

    for (int sweep = 0; sweep < params.sweeps; ++sweep) {
        // Fresh shuffled ray order each sweep, deterministic in (seed, sweep).
        for (std::uint32_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        CounterRng rng(mix_keys(params.seed, 0x617274ull, static_cast<std::uint64_t>(sweep)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.next_below(i)]);
        }

        for (std::uint32_t ray_index : order) {
            const Ray& ray = rays[ray_index];
            hits.clear();
            double norm_sq = 0.0;
            double dot = 0.0;
            for_each_voxel_on_ray(volume, ray.proj->pose.source_position, ray.pixel(),
                                  [&](std::size_t voxel, double len) {
                                      hits.emplace_back(static_cast<std::uint32_t>(voxel),
                                                        static_cast<float>(len));
                                      norm_sq += len * len;
                                      dot += len * volume.values[voxel];
                                  });
            if (norm_sq < norm_floor) {
                continue;
            }
            const double update = params.relaxation * (ray.measurement() - dot) / norm_sq;
            for (const auto& [voxel, weight] : hits) {
                volume.values[voxel] += static_cast<float>(update * weight);
            }
        }
        for (float& v : volume.values) {
            v = std::max(v, 0.0f);
        }
    }
    return volume;
}

double residual_norm(const ProjectionStack& stack, std::span<const int> subset_ids,
                     const Volume& volume) {
    double sum_sq = 0.0;
    for (const Ray& ray : collect_rays(stack, subset_ids)) {
        const double dot = line_integral(volume, ray.proj->pose.source_position, ray.pixel());
        const double diff = dot - ray.measurement();
        sum_sq += diff * diff;
    }
    return std::sqrt(sum_sq);
}

} // namespace ctopt
