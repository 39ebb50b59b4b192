#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ctopt {

/// One stacked GRU layer: update gate z, reset gate r and candidate state h'
/// with input-to-hidden (*_in) and hidden-to-hidden (*_rec) maps.
struct GruLayer {
    Eigen::MatrixXd update_in, update_rec;
    Eigen::MatrixXd reset_in, reset_rec;
    Eigen::MatrixXd state_in, state_rec;
    Eigen::VectorXd update_bias, reset_bias, state_bias;
};

/// Stacked GRU with a linear+sigmoid readout on the final hidden state.
/// The same struct doubles as gradient storage (identical layout).
struct GruModel {
    int input_size = 0;
    int hidden_size = 0;
    std::vector<GruLayer> layers;
    Eigen::VectorXd readout_weight;
    double readout_bias = 0.0;

    /// All parameters uniform in [-1/sqrt(hidden), 1/sqrt(hidden)], seeded.
    static GruModel init(int input_size, int hidden_size, int num_layers,
                         std::uint64_t seed);

    /// Same shapes, all zeros.
    static GruModel zeros_like(const GruModel& other);

    std::size_t parameter_count() const;

    /// Flat binary with a shape header.
    void save(const std::filesystem::path& file) const;
    static GruModel load(const std::filesystem::path& file);
};

/// Parameters (or gradients) as one flat vector, fixed ordering.
Eigen::VectorXd flatten(const GruModel& model);
void unflatten(const Eigen::VectorXd& flat, GruModel& model);

using FeatureSequence = std::vector<Eigen::VectorXd>;

/// Recurrence per layer, h0 = 0:
///   z = sigmoid(W_z x + U_z h_prev + b_z)
///   r = sigmoid(W_r x + U_r h_prev + b_r)
///   h' = tanh(W_h x + U_h (r .* h_prev) + b_h)
///   h  = (1 - z) .* h_prev + z .* h'
/// Output: sigmoid(w . h_top_last + b), strictly inside (0, 1).
double gru_forward(const FeatureSequence& sequence, const GruModel& model);

/// Batched forward over time-aligned sequences; steps[t] stacks the t-th
/// input of every batch as columns.
struct GruForwardCache {
    // [t][layer], each hidden x batch
    std::vector<std::vector<Eigen::MatrixXd>> update, reset, state, hidden;
    Eigen::VectorXd logits;
    Eigen::VectorXd probs;
};
GruForwardCache gru_forward_batched(std::span<const Eigen::MatrixXd> steps,
                                    const GruModel& model);

/// Mean binary cross entropy with probabilities clamped to
/// [1e-7, 1 - 1e-7].
double bce_loss(const Eigen::VectorXd& probs, const Eigen::VectorXd& targets);

/// Reverse-mode gradients of bce_loss(gru_forward(batches), targets) for
/// every parameter. Sequences must be time-aligned (equal lengths).
struct GradientResult {
    GruModel gradients;
    double loss = 0.0;
};
GradientResult gru_gradients(const std::vector<FeatureSequence>& batches,
                             const std::vector<double>& targets, const GruModel& model);

/// Batched flavor used by the selection loop.
GradientResult gru_gradients_batched(std::span<const Eigen::MatrixXd> steps,
                                     const Eigen::VectorXd& targets, const GruModel& model);

} // namespace ctopt
