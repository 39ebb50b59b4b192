#include "ctopt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ctopt/errors.hpp"

namespace ctopt {

namespace {

/// 3D summed-area table; sum(i,j,k) covers all voxels with index < (i,j,k).
class IntegralVolume {
  public:
    /// value(x, y, z) supplies the voxel term to accumulate.
    template <typename Fn>
    IntegralVolume(int nx, int ny, int nz, Fn&& value)
        : nx_(nx + 1), ny_(ny + 1), nz_(nz + 1),
          data_(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0) {
        for (int z = 0; z < nz; ++z) {
            for (int y = 0; y < ny; ++y) {
                double run = 0.0;
                for (int x = 0; x < nx; ++x) {
                    run += value(x, y, z);
                    at(x + 1, y + 1, z + 1) =
                        run + at(x + 1, y, z + 1) + at(x + 1, y + 1, z) - at(x + 1, y, z);
                }
            }
        }
    }

    double box_sum(int x0, int x1, int y0, int y1, int z0, int z1) const {
        return at(x1, y1, z1) - at(x0, y1, z1) - at(x1, y0, z1) - at(x1, y1, z0) +
               at(x0, y0, z1) + at(x0, y1, z0) + at(x1, y0, z0) - at(x0, y0, z0);
    }

  private:
    double& at(int x, int y, int z) {
        return data_[static_cast<std::size_t>(x) +
                     static_cast<std::size_t>(nx_) * (y + static_cast<std::size_t>(ny_) * z)];
    }
    double at(int x, int y, int z) const {
        return data_[static_cast<std::size_t>(x) +
                     static_cast<std::size_t>(nx_) * (y + static_cast<std::size_t>(ny_) * z)];
    }

    int nx_, ny_, nz_;
    std::vector<double> data_;
};

void require_same_dims(const Volume& a, const Volume& b, const char* what) {
    if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz) {
        throw std::invalid_argument(std::string(what) + ": volume dimensions differ");
    }
}

double reference_range(const Volume& b) {
    const auto [lo, hi] = std::minmax_element(b.values.begin(), b.values.end());
    const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
    return range > 0.0 ? range : 1.0;
}

} // namespace

double ssim(const Volume& a, const Volume& b) {
    require_same_dims(a, b, "ssim");
    if (a.size() == 0) {
        throw std::invalid_argument("ssim: empty volumes");
    }
    const double range = reference_range(b);
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    constexpr int kHalf = 3; // 7^3 window

    auto va = [&](int x, int y, int z) { return static_cast<double>(a.at(x, y, z)); };
    auto vb = [&](int x, int y, int z) { return static_cast<double>(b.at(x, y, z)); };
    const IntegralVolume sa(a.nx, a.ny, a.nz, va);
    const IntegralVolume sb(a.nx, a.ny, a.nz, vb);
    const IntegralVolume saa(a.nx, a.ny, a.nz,
                             [&](int x, int y, int z) { return va(x, y, z) * va(x, y, z); });
    const IntegralVolume sbb(a.nx, a.ny, a.nz,
                             [&](int x, int y, int z) { return vb(x, y, z) * vb(x, y, z); });
    const IntegralVolume sab(a.nx, a.ny, a.nz,
                             [&](int x, int y, int z) { return va(x, y, z) * vb(x, y, z); });

    double total = 0.0;
    for (int z = 0; z < a.nz; ++z) {
        const int z0 = std::max(0, z - kHalf), z1 = std::min(a.nz, z + kHalf + 1);
        for (int y = 0; y < a.ny; ++y) {
            const int y0 = std::max(0, y - kHalf), y1 = std::min(a.ny, y + kHalf + 1);
            for (int x = 0; x < a.nx; ++x) {
                const int x0 = std::max(0, x - kHalf), x1 = std::min(a.nx, x + kHalf + 1);
                const double n = static_cast<double>(x1 - x0) * (y1 - y0) * (z1 - z0);
                const double mean_a = sa.box_sum(x0, x1, y0, y1, z0, z1) / n;
                const double mean_b = sb.box_sum(x0, x1, y0, y1, z0, z1) / n;
                const double var_a =
                    saa.box_sum(x0, x1, y0, y1, z0, z1) / n - mean_a * mean_a;
                const double var_b =
                    sbb.box_sum(x0, x1, y0, y1, z0, z1) / n - mean_b * mean_b;
                const double cov =
                    sab.box_sum(x0, x1, y0, y1, z0, z1) / n - mean_a * mean_b;
                total += ((2.0 * mean_a * mean_b + c1) * (2.0 * cov + c2)) /
                         ((mean_a * mean_a + mean_b * mean_b + c1) * (var_a + var_b + c2));
            }
        }
    }
    return total / static_cast<double>(a.size());
}

PsnrResult psnr(const Volume& a, const Volume& b) {
    require_same_dims(a, b, "psnr");
    if (a.size() == 0) {
        throw std::invalid_argument("psnr: empty volumes");
    }
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double diff = static_cast<double>(a.values[i]) - b.values[i];
        sum_sq += diff * diff;
    }
    const double mse = sum_sq / static_cast<double>(a.size());
    if (mse == 0.0) {
        return {0.0, true};
    }
    const double range = reference_range(b);
    return {10.0 * std::log10(range * range / mse), false};
}

double volume_cnr(const Volume& v, const VoxelBox& roi, const VoxelBox& background) {
    if (roi.empty() || background.empty()) {
        throw std::invalid_argument("volume_cnr: boxes must be nonempty");
    }
    double roi_max = std::numeric_limits<double>::lowest();
    double roi_min = std::numeric_limits<double>::max();
    for (int z = roi.z0; z < roi.z1; ++z)
        for (int y = roi.y0; y < roi.y1; ++y)
            for (int x = roi.x0; x < roi.x1; ++x) {
                roi_max = std::max(roi_max, static_cast<double>(v.at(x, y, z)));
                roi_min = std::min(roi_min, static_cast<double>(v.at(x, y, z)));
            }

    double sum = 0.0, sum_sq = 0.0, n = 0.0;
    for (int z = background.z0; z < background.z1; ++z)
        for (int y = background.y0; y < background.y1; ++y)
            for (int x = background.x0; x < background.x1; ++x) {
                const double value = v.at(x, y, z);
                sum += value;
                sum_sq += value * value;
                n += 1.0;
            }
    const double mean = sum / n;
    const double sigma = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
    if (sigma <= 0.0) {
        throw DegenerateBackgroundError("volume_cnr: background has zero variance");
    }
    return std::abs(roi_max - roi_min) / sigma;
}

QualityReport compare(const Volume& reference,
                      const std::vector<std::pair<std::string, const Volume*>>& candidates,
                      const VoxelBox& cnr_roi, const VoxelBox& cnr_background,
                      const std::map<std::string, double>& coverage_percent) {
    QualityReport report;
    for (const auto& [name, volume] : candidates) {
        require_same_dims(*volume, reference, "compare");
        QualityRow row;
        row.name = name;
        row.ssim_value = ssim(*volume, reference);
        row.psnr_value = psnr(*volume, reference);
        row.cnr = volume_cnr(*volume, cnr_roi, cnr_background);
        const auto it = coverage_percent.find(name);
        row.coverage_percent = it == coverage_percent.end() ? 0.0 : it->second;
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

} // namespace

void QualityReport::write_csv(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) {
        throw FormatError("cannot write report: " + file.string());
    }
    if (!config_echo.is_null()) {
        out << "# config " << config_echo.dump() << "\n";
    }
    if (!anchors.is_null()) {
        out << "# anchors " << anchors.dump() << "\n";
    }
    out << "Approach,SSIM,PSNR_dB,CNR,Coverage_percent\n";
    for (const QualityRow& row : rows) {
        out << row.name << "," << format_number(row.ssim_value) << ","
            << (row.psnr_value.identical ? "identical" : format_number(row.psnr_value.db))
            << "," << format_number(row.cnr) << "," << format_number(row.coverage_percent)
            << "\n";
    }
}

void QualityReport::write_json(const std::filesystem::path& file) const {
    nlohmann::json doc;
    doc["config"] = config_echo;
    if (!anchors.is_null()) {
        doc["anchors"] = anchors;
    }
    doc["rows"] = nlohmann::json::array();
    for (const QualityRow& row : rows) {
        nlohmann::json entry = {{"approach", row.name},
                                {"ssim", row.ssim_value},
                                {"cnr", row.cnr},
                                {"coverage_percent", row.coverage_percent}};
        if (row.psnr_value.identical) {
            entry["psnr_db"] = "identical";
        } else {
            entry["psnr_db"] = row.psnr_value.db;
        }
        doc["rows"].push_back(std::move(entry));
    }
    std::ofstream out(file);
    if (!out) {
        throw FormatError("cannot write report: " + file.string());
    }
    out << doc.dump(2) << "\n";
}

} // namespace ctopt
