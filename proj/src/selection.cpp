#include "ctopt/selection.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ctopt/errors.hpp"
#include "ctopt/rng.hpp"

namespace ctopt {

SelectionState SelectionState::init(const MetricTable& table, const CompletenessMatrix& c,
                                    int k, const SelectorWeights& weights, int max_loops,
                                    std::uint64_t seed) {
    if (k < 1 || k > static_cast<int>(table.rows.size())) {
        throw std::invalid_argument("k must lie in [1, surviving candidates]");
    }
    if (table.m_bits != c.m()) {
        throw std::invalid_argument("metric table and completeness matrix disagree on M");
    }
    SelectionState state;
    state.table = &table;
    state.completeness = &c;
    state.k = k;
    state.weights = weights;
    state.max_loops = max_loops;
    state.seed = seed;
    state.masked.assign(table.rows.size(), 0);
    state.covered = CoverageMask((table.m_bits + 63) / 64);

    // First iteration: every batch is the candidate's own single feature row.
    Eigen::MatrixXd step(state.feature_size(), static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t row = 0; row < table.rows.size(); ++row) {
        step.col(static_cast<Eigen::Index>(row)) = state.feature_row(static_cast<int>(row));
    }
    state.batch_steps.push_back(std::move(step));
    return state;
}

Eigen::VectorXd SelectionState::feature_row(int row) const {
    const MetricRow& r = table->rows[row];
    Eigen::VectorXd features(feature_size());
    features[0] = r.pixel_intensity;
    features[1] = r.cnr;
    for (int bit = 0; bit < table->m_bits; ++bit) {
        features[2 + bit] =
            (r.completeness_bits[bit >> 6] >> (bit & 63)) & 1u ? 1.0 : 0.0;
    }
    return features;
}

int SelectionState::unselected_count() const {
    return static_cast<int>(masked.size()) -
           static_cast<int>(std::count(masked.begin(), masked.end(), char{1}));
}

namespace {

std::vector<double> targets_for(const MetricTable& table, const CoverageMask& covered,
                                std::span<const char> masked,
                                const SelectorWeights& weights) {
    const double weight_sum = weights.pixel_intensity + weights.cnr + weights.completeness;
    if (weight_sum <= 0.0) {
        throw std::invalid_argument("selector weights must sum to a positive value");
    }
    std::vector<int> gains(table.rows.size(), 0);
    int max_gain = 0;
    for (std::size_t row = 0; row < table.rows.size(); ++row) {
        if (masked[row]) {
            continue;
        }
        gains[row] = covered.gain(table.rows[row].completeness_bits);
        max_gain = std::max(max_gain, gains[row]);
    }
    std::vector<double> scores(table.rows.size(), 0.0);
    for (std::size_t row = 0; row < table.rows.size(); ++row) {
        if (masked[row]) {
            continue; // already selected -> score 0
        }
        const MetricRow& r = table.rows[row];
        const double cov = max_gain > 0 ? static_cast<double>(gains[row]) / max_gain : 0.0;
        scores[row] = (weights.pixel_intensity * r.pixel_intensity + weights.cnr * r.cnr +
                       weights.completeness * cov) /
                      weight_sum;
    }
    return scores;
}

} // namespace

std::vector<double> compute_targets(const SelectionState& state) {
    return targets_for(*state.table, state.covered, state.masked, state.weights);
}

int select_argmax(std::span<const double> scores, std::span<const char> masked) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t row = 0; row < scores.size(); ++row) {
        if (!masked[row] && scores[row] > best_score) {
            best_score = scores[row];
            best = static_cast<int>(row);
        }
    }
    if (best < 0) {
        throw ExhaustedError("no unselected candidate remains");
    }
    return best;
}

namespace {

void grow_and_mask(SelectionState& state, int winner_row) {
    const Eigen::VectorXd winner = state.feature_row(winner_row);
    Eigen::MatrixXd step(state.feature_size(), state.batch_steps.front().cols());
    for (Eigen::Index col = 0; col < step.cols(); ++col) {
        if (state.masked[static_cast<std::size_t>(col)]) {
            step.col(col).setZero();
        } else {
            step.col(col) = winner;
        }
    }
    state.batch_steps.push_back(std::move(step));

    state.masked[winner_row] = 1;
    for (Eigen::MatrixXd& past : state.batch_steps) {
        past.col(winner_row).setZero();
    }
    state.selected.push_back(state.table->rows[winner_row].candidate_id);
    state.covered.add_row(state.table->rows[winner_row].completeness_bits);
}

} // namespace

int run_iteration(SelectionState& state, GruModel& model, AdamWState& optimizer,
                  IterationLog* log) {
    if (static_cast<int>(state.selected.size()) >= state.k) {
        throw std::invalid_argument("selection already holds k candidates");
    }
    if (state.unselected_count() == 0) {
        throw ExhaustedError("no unselected candidate remains");
    }

    const std::vector<double> target_scores = compute_targets(state);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(target_scores.size()));
    for (std::size_t i = 0; i < target_scores.size(); ++i) {
        targets[static_cast<Eigen::Index>(i)] = target_scores[i];
    }

    std::vector<double> losses;
    std::string stop_reason = "max_loops";
    double previous = std::numeric_limits<double>::infinity();
    for (int loop = 0; loop < state.max_loops; ++loop) {
        GradientResult grad = gru_gradients_batched(state.batch_steps, targets, model);
        losses.push_back(grad.loss);
        if (grad.loss > previous) {
            stop_reason = "loss_increase"; // stop before applying this loop's update
            break;
        }
        adamw_step(model, grad.gradients, optimizer);
        previous = grad.loss;
    }

    const GruForwardCache cache = gru_forward_batched(state.batch_steps, model);
    std::vector<double> probs(cache.probs.data(), cache.probs.data() + cache.probs.size());
    const int winner_row = select_argmax(probs, state.masked);
    const int winner_id = state.table->rows[winner_row].candidate_id;
    grow_and_mask(state, winner_row);

    if (log != nullptr) {
        log->chosen_id = winner_id;
        log->loss_curve = std::move(losses);
        log->coverage = static_cast<double>(state.covered.count()) / state.table->m_bits;
        log->stop_reason = std::move(stop_reason);
    }
    return winner_id;
}

SelectionResult optimize_trajectory(const MetricTable& table, const CompletenessMatrix& c,
                                    int k, const GruHyper& hyper,
                                    const SelectorWeights& weights, std::uint64_t seed,
                                    GruModel* trained_model) {
    SelectionState state =
        SelectionState::init(table, c, k, weights, hyper.max_loops, seed);
    GruModel model =
        GruModel::init(state.feature_size(), hyper.hidden_size, hyper.num_layers, seed);
    AdamWState optimizer = AdamWState::init(model.parameter_count(), hyper.adamw);

    SelectionResult result;
    result.method = "gru";
    for (int iteration = 0; iteration < k; ++iteration) {
        IterationLog log;
        result.ids.push_back(run_iteration(state, model, optimizer, &log));
        result.iterations.push_back(std::move(log));
    }
    if (trained_model != nullptr) {
        *trained_model = std::move(model);
    }
    return result;
}

SelectionResult greedy_select(const CompletenessMatrix& c, const MetricTable& table, int k,
                              const SelectorWeights& weights) {
    if (k < 1 || k > static_cast<int>(table.rows.size())) {
        throw std::invalid_argument("k must lie in [1, surviving candidates]");
    }
    std::vector<char> masked(table.rows.size(), 0);
    CoverageMask covered((table.m_bits + 63) / 64);

    SelectionResult result;
    result.method = "greedy";
    for (int iteration = 0; iteration < k; ++iteration) {
        const std::vector<double> scores = targets_for(table, covered, masked, weights);
        const int row = select_argmax(scores, masked);
        masked[row] = 1;
        covered.add_row(table.rows[row].completeness_bits);

        IterationLog log;
        log.chosen_id = table.rows[row].candidate_id;
        log.coverage = static_cast<double>(covered.count()) / table.m_bits;
        log.stop_reason = "greedy";
        result.ids.push_back(log.chosen_id);
        result.iterations.push_back(std::move(log));
    }
    return result;
}

void SelectionResult::save(const std::filesystem::path& file) const {
    nlohmann::json doc;
    doc["method"] = method;
    doc["ids"] = ids;
    doc["iterations"] = nlohmann::json::array();
    for (const IterationLog& log : iterations) {
        doc["iterations"].push_back({{"chosen_id", log.chosen_id},
                                     {"loss_curve", log.loss_curve},
                                     {"coverage", log.coverage},
                                     {"stop_reason", log.stop_reason}});
    }
    std::ofstream out(file);
    if (!out) {
        throw FormatError("cannot write selection log: " + file.string());
    }
    out << doc.dump(2) << "\n";
}

SelectionResult SelectionResult::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw FormatError("cannot open selection log: " + file.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
        SelectionResult result;
        result.method = doc.at("method").get<std::string>();
        result.ids = doc.at("ids").get<std::vector<int>>();
        for (const nlohmann::json& entry : doc.at("iterations")) {
            IterationLog log;
            log.chosen_id = entry.at("chosen_id").get<int>();
            log.loss_curve = entry.at("loss_curve").get<std::vector<double>>();
            log.coverage = entry.at("coverage").get<double>();
            log.stop_reason = entry.at("stop_reason").get<std::string>();
            result.iterations.push_back(std::move(log));
        }
        return result;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed selection log " + file.string() + ": " + e.what());
    }
}

} // namespace ctopt
