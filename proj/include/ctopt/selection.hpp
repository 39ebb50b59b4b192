#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctopt/adamw.hpp"
#include "ctopt/completeness.hpp"
#include "ctopt/gru.hpp"
#include "ctopt/metrics.hpp"

namespace ctopt {

/// Target-score weights; completeness dominates by design.
struct SelectorWeights {
    double pixel_intensity = 1.0;
    double cnr = 1.0;
    double completeness = 16.0;
};

struct GruHyper {
    int hidden_size = 64;
    int num_layers = 2;
    int max_loops = 34;
    AdamWParams adamw;
};

/// Mutable state of the sequential selection: chosen ids, per-candidate
/// feature sequences (one row appended per iteration, masked batches all
/// zeros) and the running coverage accumulator.
struct SelectionState {
    const MetricTable* table = nullptr;
    const CompletenessMatrix* completeness = nullptr;
    int k = 0;
    SelectorWeights weights;
    int max_loops = 34;
    std::uint64_t seed = 0;

    std::vector<int> selected;                 // ordered candidate ids
    std::vector<char> masked;                  // indexed by table row
    std::vector<Eigen::MatrixXd> batch_steps;  // [t] = (m+2) x candidates
    CoverageMask covered;

    static SelectionState init(const MetricTable& table, const CompletenessMatrix& c,
                               int k, const SelectorWeights& weights, int max_loops,
                               std::uint64_t seed);

    int feature_size() const { return table->m_bits + 2; }
    /// Feature vector of one table row: [pixel_intensity, cnr, bits...].
    Eigen::VectorXd feature_row(int row) const;
    int unselected_count() const;
};

/// Per-candidate training targets in [0, 1]:
///   (w_pi * pi + w_cnr * cnr + w_cov * gain/max_gain) / (w_pi + w_cnr + w_cov)
/// with masked candidates scored 0 and gain normalized by the current best.
std::vector<double> compute_targets(const SelectionState& state);

/// Lowest-id argmax over unmasked rows; returns the table row index.
int select_argmax(std::span<const double> scores, std::span<const char> masked);

struct IterationLog {
    int chosen_id = -1;
    std::vector<double> loss_curve;
    double coverage = 0.0;
    std::string stop_reason;
};

/// One optimization iteration: full-batch training loops until the loss
/// rises above the previous loop or max_loops is hit, then argmax selection,
/// batch growth and masking. Returns the chosen candidate id.
int run_iteration(SelectionState& state, GruModel& model, AdamWState& optimizer,
                  IterationLog* log = nullptr);

struct SelectionResult {
    std::string method;
    std::vector<int> ids;
    std::vector<IterationLog> iterations;

    void save(const std::filesystem::path& file) const;
    static SelectionResult load(const std::filesystem::path& file);
};

/// k iterations of the GRU-driven selection from a fresh seeded model.
/// The trained model is copied out when `trained_model` is given.
SelectionResult optimize_trajectory(const MetricTable& table, const CompletenessMatrix& c,
                                    int k, const GruHyper& hyper,
                                    const SelectorWeights& weights, std::uint64_t seed,
                                    GruModel* trained_model = nullptr);

/// Coverage-aware greedy baseline: iteratively picks the argmax of the same
/// target score the GRU is trained against.
SelectionResult greedy_select(const CompletenessMatrix& c, const MetricTable& table, int k,
                              const SelectorWeights& weights);

} // namespace ctopt
