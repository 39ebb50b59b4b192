#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ctopt/geometry.hpp"
#include "ctopt/vec3.hpp"

namespace ctopt {

/// Quasi-uniform sample of the upper unit hemisphere (Radon-plane normals;
/// the lower half is redundant by symmetry of |d^T u|).
struct Hemisphere {
    std::vector<Vec3> vectors;

    int m() const { return static_cast<int>(vectors.size()); }
};

/// Deterministic Fibonacci lattice with all z >= 0.
Hemisphere sample_hemisphere(int m);

/// Boolean N x M matrix: bit (i, j) set when candidate i's viewing direction
/// is within delta_gamma of perpendicular to hemisphere vector j. Rows are
/// packed into 64-bit words for word-parallel coverage scans.
class CompletenessMatrix {
  public:
    CompletenessMatrix() = default;
    CompletenessMatrix(std::vector<int> candidate_ids, int m, double delta_gamma_deg,
                       const Vec3& p);

    int rows() const { return static_cast<int>(candidate_ids_.size()); }
    int m() const { return m_; }
    double delta_gamma_deg() const { return delta_gamma_deg_; }
    const Vec3& p() const { return p_; }
    const std::vector<int>& candidate_ids() const { return candidate_ids_; }
    int words_per_row() const { return words_per_row_; }

    std::span<const std::uint64_t> row(int row_index) const {
        return {bits_.data() + static_cast<std::size_t>(row_index) * words_per_row_,
                static_cast<std::size_t>(words_per_row_)};
    }
    std::span<std::uint64_t> row(int row_index) {
        return {bits_.data() + static_cast<std::size_t>(row_index) * words_per_row_,
                static_cast<std::size_t>(words_per_row_)};
    }

    void set_bit(int row_index, int col) {
        row(row_index)[col >> 6] |= std::uint64_t{1} << (col & 63);
    }
    bool bit(int row_index, int col) const {
        return (row(row_index)[col >> 6] >> (col & 63)) & 1u;
    }

    /// Row index for a candidate id; throws std::invalid_argument if unknown.
    int row_index(int candidate_id) const;
    int popcount_row(int row_index) const;

    /// Binary persistence: fixed header (N, M, delta_gamma, P) + packed rows.
    void save(const std::filesystem::path& file) const;
    static CompletenessMatrix load(const std::filesystem::path& file);

    /// Per-candidate popcounts for inspection.
    void write_popcount_csv(const std::filesystem::path& file) const;

  private:
    std::vector<int> candidate_ids_;
    int m_ = 0;
    int words_per_row_ = 0;
    double delta_gamma_deg_ = 0.0;
    Vec3 p_;
    std::vector<std::uint64_t> bits_;
};

/// True when the central ray source->p of the pose lands on the detector.
bool central_ray_hits_detector(const Pose& pose, const Vec3& p);

/// Algorithm: for each source i and hemisphere vector u_j set the bit when
/// |d_i . u_j| < sin(delta_gamma). No detector filtering; ids must align
/// with sources. Rows build in parallel (threads = 0 picks the hardware
/// count); the result is independent of the thread count.
CompletenessMatrix completeness_matrix_from_sources(std::span<const Vec3> sources,
                                                    std::span<const int> candidate_ids,
                                                    const Hemisphere& hemisphere,
                                                    const Vec3& p, double delta_gamma_deg,
                                                    int threads = 0);

/// Same, but keeps only poses whose central ray hits the detector; candidate
/// ids are the kept pose indices offset by `id_base`.
CompletenessMatrix completeness_matrix(std::span<const Pose> poses,
                                       const Hemisphere& hemisphere, const Vec3& p,
                                       double delta_gamma_deg, int id_base = 0,
                                       int threads = 0);

/// Fraction of hemisphere vectors covered by at least one subset member.
double coverage(const CompletenessMatrix& c, std::span<const int> subset_ids);

/// Number of columns newly covered by adding `candidate_id` to the subset.
/// Throws std::invalid_argument when the candidate is already selected.
int marginal_gain(const CompletenessMatrix& c, std::span<const int> subset_ids,
                  int candidate_id);

/// Running OR-accumulator over matrix rows for incremental selection loops.
class CoverageMask {
  public:
    explicit CoverageMask(int words = 0) : words_(words, 0) {}

    void add_row(std::span<const std::uint64_t> row);
    int gain(std::span<const std::uint64_t> row) const;
    int count() const;
    int size_words() const { return static_cast<int>(words_.size()); }

  private:
    std::vector<std::uint64_t> words_;
};

} // namespace ctopt
