#include "ctopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ctopt/errors.hpp"

namespace ctopt {

double pixel_intensity(const ProjectionImage& proj) {
    std::vector<float> values;
    values.reserve(static_cast<std::size_t>(proj.roi.rows()) * proj.roi.cols());
    for (int r = proj.roi.row_begin; r < proj.roi.row_end; ++r)
        for (int c = proj.roi.col_begin; c < proj.roi.col_end; ++c)
            values.push_back(proj.at(r, c));
    if (values.empty()) {
        throw std::invalid_argument("pixel_intensity: empty ROI");
    }
    std::sort(values.begin(), values.end());
    // nearest-rank: element ceil(0.7 n) of the ascending sort, 1-based
    const std::size_t rank =
        static_cast<std::size_t>(std::ceil(0.7 * static_cast<double>(values.size())));
    return values[rank - 1];
}

std::vector<int> alpha_filter(std::span<const ProjectionImage> projections, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("alpha must lie in [0, 1]");
    }
    std::vector<int> survivors;
    for (const ProjectionImage& proj : projections) {
        if (proj.roi_min() >= alpha) {
            survivors.push_back(proj.id);
        }
    }
    return survivors;
}

double projection_cnr(const ProjectionImage& proj, const RoiRect& background) {
    if (proj.roi.empty()) {
        throw std::invalid_argument("projection_cnr: empty ROI");
    }
    if (background.rows() * background.cols() < 2) {
        throw std::invalid_argument("projection_cnr: background needs >= 2 pixels");
    }
    double roi_max = std::numeric_limits<double>::lowest();
    double roi_min = std::numeric_limits<double>::max();
    for (int r = proj.roi.row_begin; r < proj.roi.row_end; ++r) {
        for (int c = proj.roi.col_begin; c < proj.roi.col_end; ++c) {
            roi_max = std::max(roi_max, static_cast<double>(proj.at(r, c)));
            roi_min = std::min(roi_min, static_cast<double>(proj.at(r, c)));
        }
    }

    double sum = 0.0, sum_sq = 0.0;
    const double n = static_cast<double>(background.rows()) * background.cols();
    for (int r = background.row_begin; r < background.row_end; ++r) {
        for (int c = background.col_begin; c < background.col_end; ++c) {
            const double v = proj.at(r, c);
            sum += v;
            sum_sq += v * v;
        }
    }
    const double mean = sum / n;
    const double variance = std::max(0.0, sum_sq / n - mean * mean);
    const double sigma = std::sqrt(variance);
    if (sigma <= 0.0) {
        throw DegenerateBackgroundError(
            "projection_cnr: background has zero variance; pick a background region "
            "outside the object shadow");
    }
    return std::abs(roi_max - roi_min) / sigma;
}

RoiRect default_background(const DetectorSpec& detector) {
    RoiRect rect;
    rect.row_begin = 0;
    rect.row_end = std::max(2, detector.rows / 8);
    rect.col_begin = 0;
    rect.col_end = std::max(2, detector.cols / 8);
    return rect;
}

double min_max_normalize(double value, const ColumnRange& range) {
    const double span = range.max - range.min;
    if (span <= 0.0) {
        return 0.5;
    }
    return (value - range.min) / span;
}

int MetricTable::row_index(int candidate_id) const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].candidate_id == candidate_id) {
            return static_cast<int>(i);
        }
    }
    throw std::invalid_argument("metric table has no candidate " + std::to_string(candidate_id));
}

MetricTable build_metric_table(const ProjectionStack& stack, const CompletenessMatrix& c,
                               double alpha, const RoiRect& background) {
    const std::vector<int> survivors = alpha_filter(stack.projections, alpha);
    if (survivors.size() < 2) {
        throw InsufficientCandidatesError("alpha filter left fewer than two candidates");
    }

    MetricTable table;
    table.alpha = alpha;
    table.m_bits = c.m();
    table.pixel_intensity_range = {std::numeric_limits<double>::max(),
                                   std::numeric_limits<double>::lowest()};
    table.cnr_range = table.pixel_intensity_range;

    for (int id : survivors) {
        const ProjectionImage& proj = stack.by_id(id);
        MetricRow row;
        row.candidate_id = id;
        row.pixel_intensity_raw = pixel_intensity(proj);
        row.cnr_raw = projection_cnr(proj, background);
        const int matrix_row = c.row_index(id);
        const auto bits = c.row(matrix_row);
        row.completeness_bits.assign(bits.begin(), bits.end());
        row.coverage_bit_count = c.popcount_row(matrix_row);

        table.pixel_intensity_range.min =
            std::min(table.pixel_intensity_range.min, row.pixel_intensity_raw);
        table.pixel_intensity_range.max =
            std::max(table.pixel_intensity_range.max, row.pixel_intensity_raw);
        table.cnr_range.min = std::min(table.cnr_range.min, row.cnr_raw);
        table.cnr_range.max = std::max(table.cnr_range.max, row.cnr_raw);
        table.rows.push_back(std::move(row));
    }

    for (MetricRow& row : table.rows) {
        row.pixel_intensity = min_max_normalize(row.pixel_intensity_raw,
                                                table.pixel_intensity_range);
        row.cnr = min_max_normalize(row.cnr_raw, table.cnr_range);
    }
    return table;
}

MetricTable build_metric_table(const ProjectionStack& stack, const CompletenessMatrix& c,
                               double alpha) {
    return build_metric_table(stack, c, alpha, default_background(stack.detector));
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& csv_file) {
    std::filesystem::path p = csv_file;
    p.replace_extension(".bits");
    return p;
}

constexpr char kBitsMagic[8] = {'C', 'T', 'B', 'I', 'T', 'S', '0', '1'};

} // namespace

void MetricTable::save(const std::filesystem::path& csv_file) const {
    std::ofstream out(csv_file);
    if (!out) {
        throw FormatError("cannot write metric table: " + csv_file.string());
    }
    out << "# alpha=" << alpha << " m_bits=" << m_bits
        << " pi_min=" << pixel_intensity_range.min << " pi_max=" << pixel_intensity_range.max
        << " cnr_min=" << cnr_range.min << " cnr_max=" << cnr_range.max << "\n";
    out << "candidate_id,pixel_intensity_raw,cnr_raw,pixel_intensity,cnr,coverage_bits\n";
    char line[256];
    for (const MetricRow& row : rows) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%d\n", row.candidate_id,
                      row.pixel_intensity_raw, row.cnr_raw, row.pixel_intensity, row.cnr,
                      row.coverage_bit_count);
        out << line;
    }

    std::ofstream bits(sidecar_path(csv_file), std::ios::binary);
    if (!bits) {
        throw FormatError("cannot write metric bit sidecar: " +
                          sidecar_path(csv_file).string());
    }
    bits.write(kBitsMagic, sizeof(kBitsMagic));
    const std::int64_t n = static_cast<std::int64_t>(rows.size());
    const std::int64_t m64 = m_bits;
    bits.write(reinterpret_cast<const char*>(&n), sizeof(n));
    bits.write(reinterpret_cast<const char*>(&m64), sizeof(m64));
    for (const MetricRow& row : rows) {
        bits.write(reinterpret_cast<const char*>(row.completeness_bits.data()),
                   static_cast<std::streamsize>(row.completeness_bits.size() *
                                                sizeof(std::uint64_t)));
    }
}

MetricTable MetricTable::load(const std::filesystem::path& csv_file) {
    std::ifstream in(csv_file);
    if (!in) {
        throw FormatError("cannot open metric table: " + csv_file.string());
    }
    MetricTable table;
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw FormatError("metric table missing header comment: " + csv_file.string());
    }
    if (std::sscanf(line.c_str(), "# alpha=%lf m_bits=%d pi_min=%lf pi_max=%lf cnr_min=%lf cnr_max=%lf",
                    &table.alpha, &table.m_bits, &table.pixel_intensity_range.min,
                    &table.pixel_intensity_range.max, &table.cnr_range.min,
                    &table.cnr_range.max) != 6) {
        throw FormatError("malformed metric table header: " + csv_file.string());
    }
    std::getline(in, line); // column names
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        MetricRow row;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%d", &row.candidate_id,
                        &row.pixel_intensity_raw, &row.cnr_raw, &row.pixel_intensity,
                        &row.cnr, &row.coverage_bit_count) != 6) {
            throw FormatError("malformed metric table row: " + line);
        }
        table.rows.push_back(std::move(row));
    }

    std::ifstream bits(sidecar_path(csv_file), std::ios::binary);
    if (!bits) {
        throw FormatError("missing metric bit sidecar: " + sidecar_path(csv_file).string());
    }
    char magic[8];
    bits.read(magic, sizeof(magic));
    if (bits.gcount() != sizeof(magic) || std::memcmp(magic, kBitsMagic, sizeof(kBitsMagic)) != 0) {
        throw FormatError("not a metric bit sidecar: " + sidecar_path(csv_file).string());
    }
    std::int64_t n = 0, m64 = 0;
    bits.read(reinterpret_cast<char*>(&n), sizeof(n));
    bits.read(reinterpret_cast<char*>(&m64), sizeof(m64));
    if (!bits || n != static_cast<std::int64_t>(table.rows.size()) || m64 != table.m_bits) {
        throw FormatError("metric bit sidecar does not match table: " +
                          sidecar_path(csv_file).string());
    }
    const std::size_t words = static_cast<std::size_t>((table.m_bits + 63) / 64);
    for (MetricRow& row : table.rows) {
        row.completeness_bits.resize(words);
        bits.read(reinterpret_cast<char*>(row.completeness_bits.data()),
                  static_cast<std::streamsize>(words * sizeof(std::uint64_t)));
        if (static_cast<std::size_t>(bits.gcount()) != words * sizeof(std::uint64_t)) {
            throw FormatError("metric bit sidecar truncated: " +
                              sidecar_path(csv_file).string());
        }
    }
    return table;
}

} // namespace ctopt
