#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "ctopt/errors.hpp"
#include "ctopt/rng.hpp"
#include "ctopt/selection.hpp"

using namespace ctopt;

namespace {

FeatureSequence random_sequence(int length, int features, CounterRng& rng) {
    FeatureSequence seq;
    for (int t = 0; t < length; ++t) {
        Eigen::VectorXd x(features);
        for (int i = 0; i < features; ++i) {
            x[i] = rng.next_double(-1, 1);
        }
        seq.push_back(std::move(x));
    }
    return seq;
}

/// Metric table with synthetic normalized scalars and bit rows; candidate
/// ids are the row indices.
MetricTable synthetic_table(const std::vector<double>& pi, const std::vector<double>& cnr,
                            const std::vector<std::vector<int>>& bit_cols, int m) {
    MetricTable table;
    table.m_bits = m;
    table.alpha = 0.0;
    const int words = (m + 63) / 64;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        MetricRow row;
        row.candidate_id = static_cast<int>(i);
        row.pixel_intensity_raw = row.pixel_intensity = pi[i];
        row.cnr_raw = row.cnr = cnr[i];
        row.completeness_bits.assign(words, 0);
        for (int col : bit_cols[i]) {
            row.completeness_bits[col >> 6] |= std::uint64_t{1} << (col & 63);
            ++row.coverage_bit_count;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

CompletenessMatrix matrix_from_table(const MetricTable& table) {
    std::vector<int> ids;
    for (const MetricRow& row : table.rows) {
        ids.push_back(row.candidate_id);
    }
    CompletenessMatrix c(ids, table.m_bits, 1.0, Vec3{});
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (int j = 0; j < table.m_bits; ++j) {
            if ((table.rows[i].completeness_bits[j >> 6] >> (j & 63)) & 1u) {
                c.set_bit(static_cast<int>(i), j);
            }
        }
    }
    return c;
}

MetricTable random_table(int n, int m, std::uint64_t seed, double fill = 0.25) {
    CounterRng rng(seed);
    std::vector<double> pi(n), cnr(n);
    std::vector<std::vector<int>> cols(n);
    for (int i = 0; i < n; ++i) {
        pi[i] = rng.next_double();
        cnr[i] = rng.next_double();
        for (int j = 0; j < m; ++j) {
            if (rng.next_double() < fill) {
                cols[i].push_back(j);
            }
        }
    }
    return synthetic_table(pi, cnr, cols, m);
}

} // namespace

TEST_CASE("gru forward: zero parameters give exactly one half") {
    const GruModel zero = GruModel::zeros_like(GruModel::init(6, 8, 2, 1));
    CounterRng rng(2);
    const FeatureSequence seq = random_sequence(4, 6, rng);
    CHECK(gru_forward(seq, zero) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gru forward: output strictly inside (0,1); equal batches agree") {
    const GruModel model = GruModel::init(5, 12, 3, 99);
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureSequence seq = random_sequence(1 + trial % 5, 5, rng);
        const double p = gru_forward(seq, model);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(gru_forward(seq, model) == p);
    }

    // two identical batches in one batched pass produce identical outputs
    const FeatureSequence seq = random_sequence(3, 5, rng);
    const GradientResult r = gru_gradients({seq, seq}, {0.3, 0.3}, model);
    CHECK(r.loss == r.loss); // finite
}

TEST_CASE("gru forward: shape mismatches rejected") {
    const GruModel model = GruModel::init(5, 8, 2, 7);
    CounterRng rng(4);
    CHECK_THROWS_AS(gru_forward(random_sequence(2, 4, rng), model), std::invalid_argument);
    CHECK_THROWS_AS(gru_forward(FeatureSequence{}, model), std::invalid_argument);
    CHECK_THROWS_AS(gru_gradients({}, {}, model), std::invalid_argument);
    CHECK_THROWS_AS(gru_gradients({random_sequence(2, 5, rng)}, {0.5, 0.5}, model),
                    std::invalid_argument);
}

TEST_CASE("bce loss: analytic anchors") {
    // p = 0.5 for a zero model; y = 0.5 -> loss = ln 2
    const GruModel zero = GruModel::zeros_like(GruModel::init(4, 6, 1, 1));
    CounterRng rng(5);
    const FeatureSequence seq = random_sequence(2, 4, rng);
    const GradientResult r = gru_gradients({seq}, {0.5}, zero);
    CHECK(std::abs(r.loss - std::log(2.0)) < 1e-12);

    // saturated correct predictions cost (almost) nothing post-clamp
    GruModel confident = zero;
    confident.readout_bias = 30.0; // h stays zero, so p = sigmoid(30) ~ 1
    CHECK(gru_gradients({seq}, {1.0}, confident).loss < 1e-6);
    confident.readout_bias = -30.0;
    CHECK(gru_gradients({seq}, {0.0}, confident).loss < 1e-6);
}

TEST_CASE("gru gradients match central finite differences") {
    const int features = 10, hidden = 8, layers = 2;
    const GruModel model = GruModel::init(features, hidden, layers, 2024);
    CounterRng rng(2025);
    std::vector<FeatureSequence> batches;
    std::vector<double> targets;
    for (int b = 0; b < 3; ++b) {
        batches.push_back(random_sequence(3, features, rng));
        targets.push_back(rng.next_double());
    }

    const GradientResult analytic = gru_gradients(batches, targets, model);
    const Eigen::VectorXd grad_flat = flatten(analytic.gradients);
    Eigen::VectorXd theta = flatten(model);

    const double step = 1e-5;
    GruModel probe = model;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd shifted = theta;
        shifted[i] = theta[i] + step;
        unflatten(shifted, probe);
        const double loss_plus = gru_gradients(batches, targets, probe).loss;
        shifted[i] = theta[i] - step;
        unflatten(shifted, probe);
        const double loss_minus = gru_gradients(batches, targets, probe).loss;
        const double fd = (loss_plus - loss_minus) / (2.0 * step);
        const double denom = std::max({std::abs(fd), std::abs(grad_flat[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad_flat[i]) / denom);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("adamw: no-op and decay-only anchors") {
    GruModel model = GruModel::init(4, 6, 1, 3);
    const GruModel zero_grad = GruModel::zeros_like(model);
    const Eigen::VectorXd before = flatten(model);

    AdamWParams params;
    params.weight_decay = 0.0;
    AdamWState state = AdamWState::init(model.parameter_count(), params);
    adamw_step(model, zero_grad, state);
    CHECK((flatten(model) - before).lpNorm<Eigen::Infinity>() == 0.0);

    // decay only: theta' = theta (1 - lr wd)
    params.weight_decay = 0.01;
    params.learning_rate = 0.1;
    state = AdamWState::init(model.parameter_count(), params);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(before.size());
    unflatten(ones, model);
    adamw_step(model, zero_grad, state);
    CHECK((flatten(model).array() - 0.999).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adamw: constant gradient drives unit-lr-sized steps") {
    GruModel model = GruModel::init(4, 6, 1, 3);
    GruModel grad = GruModel::zeros_like(model);
    Eigen::VectorXd g = Eigen::VectorXd::Constant(flatten(model).size(), 0.37);
    unflatten(g, grad);

    AdamWParams params;
    params.learning_rate = 0.01;
    params.weight_decay = 0.0;
    AdamWState state = AdamWState::init(model.parameter_count(), params);
    double previous = flatten(model)[0];
    double step_size = 0.0;
    for (int i = 0; i < 500; ++i) {
        adamw_step(model, grad, state);
        const double current = flatten(model)[0];
        step_size = previous - current;
        previous = current;
    }
    CHECK(step_size == doctest::Approx(params.learning_rate).epsilon(0.05));
}

TEST_CASE("targets: weighted average of the three normalized metrics") {
    // candidate 0: everything 1 -> score 1; candidate 1: cov only -> 16/18
    MetricTable table = synthetic_table({1.0, 0.0}, {1.0, 0.0},
                                        {{0, 1, 2, 3}, {4, 5, 6, 7}}, 16);
    CompletenessMatrix c = matrix_from_table(table);
    SelectionState state = SelectionState::init(table, c, 2, SelectorWeights{}, 4, 1);
    const std::vector<double> scores = compute_targets(state);
    CHECK(scores[0] == doctest::Approx(1.0));
    CHECK(scores[1] == doctest::Approx(16.0 / 18.0));

    // after selecting candidate 0 it scores zero
    state.masked[0] = 1;
    state.selected.push_back(0);
    state.covered.add_row(table.rows[0].completeness_bits);
    const std::vector<double> after = compute_targets(state);
    CHECK(after[0] == 0.0);
    CHECK(after[1] == doctest::Approx(16.0 / 18.0));
}

TEST_CASE("targets: all-zero marginal gains contribute nothing") {
    MetricTable table = synthetic_table({0.5, 0.25}, {0.5, 0.75}, {{0, 1}, {0, 1}}, 8);
    CompletenessMatrix c = matrix_from_table(table);
    SelectionState state = SelectionState::init(table, c, 2, SelectorWeights{}, 4, 1);
    state.covered.add_row(table.rows[0].completeness_bits); // both rows now redundant
    const std::vector<double> scores = compute_targets(state);
    CHECK(scores[0] == doctest::Approx((0.5 + 0.5) / 18.0));
    CHECK(scores[1] == doctest::Approx((0.25 + 0.75) / 18.0));
}

TEST_CASE("oracle-readout iteration matches the greedy first pick") {
    const MetricTable table = random_table(14, 32, 606);
    const CompletenessMatrix c = matrix_from_table(table);
    const SelectorWeights coverage_only{0.0, 0.0, 16.0};

    SelectionState state = SelectionState::init(table, c, 3, coverage_only, 4, 1);
    // a perfect oracle readout of the targets reduces selection to argmax
    const std::vector<double> targets = compute_targets(state);
    const int row = select_argmax(targets, state.masked);

    const SelectionResult greedy = greedy_select(c, table, 1, coverage_only);
    CHECK(table.rows[row].candidate_id == greedy.ids[0]);

    // and that is the max-marginal-gain candidate
    int best_gain = -1, best_row = -1;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const int gain = c.popcount_row(static_cast<int>(i));
        if (gain > best_gain) {
            best_gain = gain;
            best_row = static_cast<int>(i);
        }
    }
    CHECK(row == best_row);
}

TEST_CASE("run_iteration: trains, selects, grows and masks") {
    const MetricTable table = random_table(10, 24, 17);
    const CompletenessMatrix c = matrix_from_table(table);
    GruHyper hyper;
    hyper.hidden_size = 12;
    hyper.num_layers = 2;
    hyper.max_loops = 34;

    SelectionState state = SelectionState::init(table, c, 3, SelectorWeights{}, hyper.max_loops, 5);
    GruModel model = GruModel::init(state.feature_size(), hyper.hidden_size,
                                    hyper.num_layers, 5);
    AdamWState opt = AdamWState::init(model.parameter_count(), hyper.adamw);

    IterationLog log;
    const int chosen = run_iteration(state, model, opt, &log);
    CHECK(chosen == log.chosen_id);
    CHECK(state.selected == std::vector<int>{chosen});
    CHECK(state.batch_steps.size() == 2);
    REQUIRE(!log.loss_curve.empty());
    CHECK(log.loss_curve.size() <= 34);
    for (double loss : log.loss_curve) {
        CHECK(std::isfinite(loss));
    }
    CHECK((log.stop_reason == "loss_increase" || log.stop_reason == "max_loops"));

    // masked batch is all zeros at every time step
    const int row = 0 <= chosen && chosen < 10 ? chosen : 0;
    for (const Eigen::MatrixXd& step : state.batch_steps) {
        CHECK(step.col(row).cwiseAbs().maxCoeff() == 0.0);
    }
    // unmasked batches got the winner's feature row appended
    const int other = (row + 1) % 10;
    CHECK((state.batch_steps[1].col(other) - state.feature_row(row)).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("optimize_trajectory: k distinct ids, deterministic, coverage grows") {
    const MetricTable table = random_table(12, 32, 99);
    const CompletenessMatrix c = matrix_from_table(table);
    GruHyper hyper;
    hyper.hidden_size = 10;
    hyper.num_layers = 2;
    hyper.max_loops = 8;

    const SelectionResult a = optimize_trajectory(table, c, 5, hyper, SelectorWeights{}, 42);
    const SelectionResult b = optimize_trajectory(table, c, 5, hyper, SelectorWeights{}, 42);
    CHECK(a.ids == b.ids);
    REQUIRE(a.ids.size() == 5);

    std::vector<int> sorted = a.ids;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()); // distinct

    for (std::size_t i = 1; i < a.iterations.size(); ++i) {
        CHECK(a.iterations[i].coverage >= a.iterations[i - 1].coverage);
    }
    CHECK(a.iterations.front().coverage ==
          doctest::Approx(static_cast<double>(
                              c.popcount_row(c.row_index(a.ids.front()))) /
                          c.m()));

    const SelectionResult other = optimize_trajectory(table, c, 5, hyper, SelectorWeights{}, 43);
    CHECK(a.ids.size() == other.ids.size()); // may or may not differ, but runs

    CHECK_THROWS_AS(optimize_trajectory(table, c, 13, hyper, SelectorWeights{}, 1),
                    std::invalid_argument);
}

TEST_CASE("optimize_trajectory: the last unselected candidate is forced") {
    const MetricTable table = random_table(4, 16, 3);
    const CompletenessMatrix c = matrix_from_table(table);
    GruHyper hyper;
    hyper.hidden_size = 6;
    hyper.num_layers = 1;
    hyper.max_loops = 3;
    const SelectionResult all = optimize_trajectory(table, c, 4, hyper, SelectorWeights{}, 7);
    std::vector<int> sorted = all.ids;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("greedy: disjoint rows accumulate coverage linearly") {
    // 5 candidates, 2 private columns each
    std::vector<std::vector<int>> cols = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}};
    const MetricTable table =
        synthetic_table({0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, cols, 10);
    const CompletenessMatrix c = matrix_from_table(table);
    const SelectionResult result = greedy_select(c, table, 3, SelectorWeights{0, 0, 1});
    CHECK(result.iterations.back().coverage == doctest::Approx(6.0 / 10.0));
    CHECK(coverage(c, result.ids) == doctest::Approx(6.0 / 10.0));
}

TEST_CASE("greedy: coverage non-decreasing in k and ties break to the lowest id") {
    const MetricTable table = random_table(15, 48, 2026);
    const CompletenessMatrix c = matrix_from_table(table);
    double previous = 0.0;
    for (int k = 1; k <= 10; ++k) {
        const SelectionResult r = greedy_select(c, table, k, SelectorWeights{});
        const double cov = coverage(c, r.ids);
        CHECK(cov >= previous);
        previous = cov;
    }

    // exact tie: two identical rows, lowest id wins
    const MetricTable tied = synthetic_table({0.5, 0.5, 0.1}, {0.5, 0.5, 0.1},
                                             {{0, 1}, {0, 1}, {2}}, 8);
    const CompletenessMatrix ct = matrix_from_table(tied);
    CHECK(greedy_select(ct, tied, 1, SelectorWeights{}).ids[0] == 0);
}

TEST_CASE("greedy reaches at least (1 - 1/e) of the exhaustive optimum") {
    const double bound = 1.0 - 1.0 / std::exp(1.0);
    for (int instance = 0; instance < 10; ++instance) {
        const int n = 12, m = 16, k = 3;
        const MetricTable table = random_table(n, m, 5000 + instance, 0.3);
        const CompletenessMatrix c = matrix_from_table(table);

        const SelectionResult greedy = greedy_select(c, table, k, SelectorWeights{0, 0, 1});
        const double achieved = coverage(c, greedy.ids);

        double best = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                for (int d = b + 1; d < n; ++d) {
                    best = std::max(best, coverage(c, std::vector<int>{a, b, d}));
                }
        CHECK(achieved >= bound * best - 1e-12);
    }
}

TEST_CASE("selection logs round-trip through JSON") {
    const MetricTable table = random_table(8, 16, 12);
    const CompletenessMatrix c = matrix_from_table(table);
    const SelectionResult result = greedy_select(c, table, 3, SelectorWeights{});
    const auto file = std::filesystem::temp_directory_path() / "ctopt_sel_test.json";
    result.save(file);
    const SelectionResult loaded = SelectionResult::load(file);
    CHECK(loaded.method == result.method);
    CHECK(loaded.ids == result.ids);
    REQUIRE(loaded.iterations.size() == result.iterations.size());
    CHECK(loaded.iterations.back().coverage ==
          doctest::Approx(result.iterations.back().coverage));
    std::filesystem::remove(file);
}

TEST_CASE("model checkpoints round-trip bit exactly") {
    const GruModel model = GruModel::init(9, 7, 3, 77);
    const auto file = std::filesystem::temp_directory_path() / "ctopt_model_test.bin";
    model.save(file);
    const GruModel loaded = GruModel::load(file);
    CHECK(loaded.input_size == model.input_size);
    CHECK(loaded.hidden_size == model.hidden_size);
    CHECK((flatten(loaded) - flatten(model)).norm() == 0.0);

    std::filesystem::resize_file(file, 16);
    CHECK_THROWS_AS(GruModel::load(file), FormatError);
    std::filesystem::remove(file);
}
