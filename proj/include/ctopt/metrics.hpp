#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ctopt/completeness.hpp"
#include "ctopt/projection.hpp"

namespace ctopt {

/// 0.70 quantile (nearest rank) of the ROI pixel values. Higher means less
/// attenuation for the view.
double pixel_intensity(const ProjectionImage& proj);

/// Ids of the candidates whose minimum ROI pixel is >= alpha, input order
/// preserved.
std::vector<int> alpha_filter(std::span<const ProjectionImage> projections, double alpha);

/// |Max - Min| over the ROI divided by the population standard deviation of
/// the background rectangle. Throws DegenerateBackgroundError when the
/// background has no variance.
double projection_cnr(const ProjectionImage& proj, const RoiRect& background);

/// Detector-corner rectangle used as the CNR background by default; sized to
/// stay outside the object shadow for the shipped configurations.
RoiRect default_background(const DetectorSpec& detector);

struct MetricRow {
    int candidate_id = -1;
    double pixel_intensity_raw = 0.0;
    double cnr_raw = 0.0;
    double pixel_intensity = 0.0; // min-max normalized over survivors
    double cnr = 0.0;             // min-max normalized over survivors
    std::vector<std::uint64_t> completeness_bits; // packed, m bits
    int coverage_bit_count = 0;
};

struct ColumnRange {
    double min = 0.0;
    double max = 0.0;
};

/// Per-candidate feature rows for the selector: alpha-filtered, scalar
/// metrics min-max normalized, completeness bit-rows attached.
struct MetricTable {
    std::vector<MetricRow> rows;
    int m_bits = 0;
    double alpha = 0.0;
    ColumnRange pixel_intensity_range;
    ColumnRange cnr_range;

    int row_index(int candidate_id) const; // throws std::invalid_argument

    /// CSV of scalar metrics + a binary sidecar holding the packed bit rows.
    void save(const std::filesystem::path& csv_file) const;
    static MetricTable load(const std::filesystem::path& csv_file);
};

/// Builds the table. Throws InsufficientCandidatesError when fewer than two
/// candidates survive the alpha filter.
MetricTable build_metric_table(const ProjectionStack& stack, const CompletenessMatrix& c,
                               double alpha, const RoiRect& background);
MetricTable build_metric_table(const ProjectionStack& stack, const CompletenessMatrix& c,
                               double alpha);

/// x -> (x - min)/(max - min); a constant column maps to all 0.5.
double min_max_normalize(double value, const ColumnRange& range);

} // namespace ctopt
