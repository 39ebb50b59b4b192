#include "ctopt/completeness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ctopt/errors.hpp"
#include "ctopt/parallel.hpp"

namespace ctopt {

Hemisphere sample_hemisphere(int m) {
    if (m < 1) {
        throw std::invalid_argument("sample_hemisphere: m must be >= 1");
    }
    constexpr double golden_angle = 2.399963229728653;
    Hemisphere hemi;
    hemi.vectors.reserve(m);
    for (int i = 0; i < m; ++i) {
        const double z = (i + 0.5) / m;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        hemi.vectors.push_back(Vec3{r * std::cos(phi), r * std::sin(phi), z}.normalized());
    }
    return hemi;
}

CompletenessMatrix::CompletenessMatrix(std::vector<int> candidate_ids, int m,
                                       double delta_gamma_deg, const Vec3& p)
    : candidate_ids_(std::move(candidate_ids)), m_(m), words_per_row_((m + 63) / 64),
      delta_gamma_deg_(delta_gamma_deg), p_(p),
      bits_(candidate_ids_.size() * static_cast<std::size_t>(words_per_row_), 0) {
    if (m < 1) {
        throw std::invalid_argument("completeness matrix needs m >= 1");
    }
    if (delta_gamma_deg <= 0.0 || delta_gamma_deg >= 90.0) {
        throw std::invalid_argument("delta_gamma must lie in (0, 90) degrees");
    }
}

int CompletenessMatrix::row_index(int candidate_id) const {
    const auto it = std::find(candidate_ids_.begin(), candidate_ids_.end(), candidate_id);
    if (it == candidate_ids_.end()) {
        throw std::invalid_argument("unknown candidate id " + std::to_string(candidate_id));
    }
    return static_cast<int>(it - candidate_ids_.begin());
}

int CompletenessMatrix::popcount_row(int row_index) const {
    int count = 0;
    for (std::uint64_t word : row(row_index)) {
        count += std::popcount(word);
    }
    return count;
}

bool central_ray_hits_detector(const Pose& pose, const Vec3& p) {
    const Vec3 normal = pose.detector_normal();
    const double plane_offset = (pose.detector_center - pose.source_position).dot(normal);
    const Vec3 ray = p - pose.source_position;
    const double depth = ray.dot(normal);
    if (depth * plane_offset <= 0.0) {
        return false;
    }
    const double t = plane_offset / depth;
    const Vec3 hit = pose.source_position + ray * t - pose.detector_center;
    const double col =
        hit.dot(pose.detector_u_axis) / pose.pixel_pitch + 0.5 * (pose.detector_cols - 1);
    const double row =
        hit.dot(pose.detector_v_axis) / pose.pixel_pitch + 0.5 * (pose.detector_rows - 1);
    return row >= -0.5 && row <= pose.detector_rows - 0.5 && col >= -0.5 &&
           col <= pose.detector_cols - 0.5;
}

CompletenessMatrix completeness_matrix_from_sources(std::span<const Vec3> sources,
                                                    std::span<const int> candidate_ids,
                                                    const Hemisphere& hemisphere,
                                                    const Vec3& p, double delta_gamma_deg,
                                                    int threads) {
    if (sources.size() != candidate_ids.size()) {
        throw std::invalid_argument("sources and candidate ids must align");
    }
    CompletenessMatrix c(std::vector<int>(candidate_ids.begin(), candidate_ids.end()),
                         hemisphere.m(), delta_gamma_deg, p);
    // sin(delta_gamma) is the one float constant of the whole scan.
    const double sin_dg = std::sin(delta_gamma_deg * M_PI / 180.0);
    parallel_for(0, static_cast<int>(sources.size()), threads, [&](int i) {
        const Vec3 d = viewing_direction(sources[i], p);
        for (int j = 0; j < hemisphere.m(); ++j) {
            if (std::abs(d.dot(hemisphere.vectors[j])) < sin_dg) {
                c.set_bit(i, j);
            }
        }
    });
    return c;
}

CompletenessMatrix completeness_matrix(std::span<const Pose> poses,
                                       const Hemisphere& hemisphere, const Vec3& p,
                                       double delta_gamma_deg, int id_base, int threads) {
    std::vector<Vec3> sources;
    std::vector<int> ids;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        if (central_ray_hits_detector(poses[i], p)) {
            sources.push_back(poses[i].source_position);
            ids.push_back(id_base + static_cast<int>(i));
        }
    }
    return completeness_matrix_from_sources(sources, ids, hemisphere, p, delta_gamma_deg,
                                            threads);
}

void CoverageMask::add_row(std::span<const std::uint64_t> row) {
    for (std::size_t w = 0; w < words_.size(); ++w) {
        words_[w] |= row[w];
    }
}

int CoverageMask::gain(std::span<const std::uint64_t> row) const {
    int count = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) {
        count += std::popcount(row[w] & ~words_[w]);
    }
    return count;
}

int CoverageMask::count() const {
    int total = 0;
    for (std::uint64_t word : words_) {
        total += std::popcount(word);
    }
    return total;
}

double coverage(const CompletenessMatrix& c, std::span<const int> subset_ids) {
    CoverageMask mask(c.words_per_row());
    for (int id : subset_ids) {
        mask.add_row(c.row(c.row_index(id)));
    }
    return static_cast<double>(mask.count()) / c.m();
}

int marginal_gain(const CompletenessMatrix& c, std::span<const int> subset_ids,
                  int candidate_id) {
    if (std::find(subset_ids.begin(), subset_ids.end(), candidate_id) != subset_ids.end()) {
        throw std::invalid_argument("candidate " + std::to_string(candidate_id) +
                                    " is already selected");
    }
    CoverageMask mask(c.words_per_row());
    for (int id : subset_ids) {
        mask.add_row(c.row(c.row_index(id)));
    }
    return mask.gain(c.row(c.row_index(candidate_id)));
}

namespace {

constexpr char kMagic[8] = {'C', 'T', 'C', 'M', 'P', 'L', '0', '1'};

} // namespace

void CompletenessMatrix::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write completeness matrix: " + file.string());
    }
    out.write(kMagic, sizeof(kMagic));
    const std::int64_t n = rows();
    const std::int64_t m64 = m_;
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&m64), sizeof(m64));
    out.write(reinterpret_cast<const char*>(&delta_gamma_deg_), sizeof(delta_gamma_deg_));
    const double p[3] = {p_.x, p_.y, p_.z};
    out.write(reinterpret_cast<const char*>(p), sizeof(p));
    out.write(reinterpret_cast<const char*>(candidate_ids_.data()),
              static_cast<std::streamsize>(candidate_ids_.size() * sizeof(int)));
    out.write(reinterpret_cast<const char*>(bits_.data()),
              static_cast<std::streamsize>(bits_.size() * sizeof(std::uint64_t)));
}

CompletenessMatrix CompletenessMatrix::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open completeness matrix: " + file.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not a completeness matrix file: " + file.string());
    }
    std::int64_t n = 0, m64 = 0;
    double dg = 0.0;
    double p[3] = {0, 0, 0};
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&m64), sizeof(m64));
    in.read(reinterpret_cast<char*>(&dg), sizeof(dg));
    in.read(reinterpret_cast<char*>(p), sizeof(p));
    if (!in || n < 0 || m64 < 1) {
        throw FormatError("corrupt completeness header: " + file.string());
    }
    std::vector<int> ids(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(ids.data()),
            static_cast<std::streamsize>(ids.size() * sizeof(int)));
    CompletenessMatrix c(std::move(ids), static_cast<int>(m64), dg, Vec3{p[0], p[1], p[2]});
    in.read(reinterpret_cast<char*>(c.bits_.data()),
            static_cast<std::streamsize>(c.bits_.size() * sizeof(std::uint64_t)));
    if (static_cast<std::size_t>(in.gcount()) != c.bits_.size() * sizeof(std::uint64_t)) {
        throw FormatError("completeness matrix truncated: " + file.string());
    }
    return c;
}

void CompletenessMatrix::write_popcount_csv(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) {
        throw FormatError("cannot write popcount csv: " + file.string());
    }
    out << "candidate_id,covered_directions\n";
    for (int i = 0; i < rows(); ++i) {
        out << candidate_ids_[i] << "," << popcount_row(i) << "\n";
    }
}

} // namespace ctopt
