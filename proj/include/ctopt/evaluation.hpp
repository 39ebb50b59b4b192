#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctopt/volume.hpp"

namespace ctopt {

/// Mean local SSIM over all voxels, 7x7x7 uniform windows clipped at the
/// borders, constants C1=(0.01 range)^2, C2=(0.03 range)^2 with the range
/// taken from the reference volume `b`.
double ssim(const Volume& a, const Volume& b);

struct PsnrResult {
    double db = 0.0;
    bool identical = false; // MSE == 0; db is meaningless then
};

/// 10 log10(range^2 / MSE), range from the reference volume `b`.
PsnrResult psnr(const Volume& a, const Volume& b);

/// Half-open voxel index box.
struct VoxelBox {
    int x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 0;

    bool empty() const { return x1 <= x0 || y1 <= y0 || z1 <= z0; }
};

/// |max(roi) - min(roi)| / population sigma(background). Throws
/// DegenerateBackgroundError on zero background variance.
double volume_cnr(const Volume& v, const VoxelBox& roi, const VoxelBox& background);

struct QualityRow {
    std::string name;
    double ssim_value = 0.0;
    PsnrResult psnr_value;
    double cnr = 0.0;
    double coverage_percent = 0.0;
};

struct QualityReport {
    std::vector<QualityRow> rows;
    nlohmann::json config_echo;
    nlohmann::json anchors; // non-binding published reference values

    void write_csv(const std::filesystem::path& file) const;
    void write_json(const std::filesystem::path& file) const;
};

/// Table layout: one row per named volume with SSIM/PSNR vs the reference,
/// its own CNR in the given boxes, and externally computed coverage.
QualityReport compare(const Volume& reference,
                      const std::vector<std::pair<std::string, const Volume*>>& candidates,
                      const VoxelBox& cnr_roi, const VoxelBox& cnr_background,
                      const std::map<std::string, double>& coverage_percent);

} // namespace ctopt
