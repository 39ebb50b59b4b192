#include "ctopt/gru.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ctopt/errors.hpp"
#include "ctopt/rng.hpp"

namespace ctopt {

namespace {

constexpr double kProbClamp = 1e-7;

template <typename Model, typename Fn>
void for_each_parameter_block(Model& model, Fn&& fn) {
    for (auto& layer : model.layers) {
        fn(layer.update_in);
        fn(layer.update_rec);
        fn(layer.update_bias);
        fn(layer.reset_in);
        fn(layer.reset_rec);
        fn(layer.reset_bias);
        fn(layer.state_in);
        fn(layer.state_rec);
        fn(layer.state_bias);
    }
    fn(model.readout_weight);
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) {
    return 1.0 / (1.0 + (-x.array()).exp());
}

} // namespace

GruModel GruModel::init(int input_size, int hidden_size, int num_layers,
                        std::uint64_t seed) {
    if (input_size < 1 || hidden_size < 1 || num_layers < 1) {
        throw std::invalid_argument("gru dimensions must be positive");
    }
    GruModel model;
    model.input_size = input_size;
    model.hidden_size = hidden_size;
    model.layers.resize(num_layers);
    for (int l = 0; l < num_layers; ++l) {
        const int in = l == 0 ? input_size : hidden_size;
        GruLayer& layer = model.layers[l];
        layer.update_in = Eigen::MatrixXd::Zero(hidden_size, in);
        layer.update_rec = Eigen::MatrixXd::Zero(hidden_size, hidden_size);
        layer.update_bias = Eigen::VectorXd::Zero(hidden_size);
        layer.reset_in = Eigen::MatrixXd::Zero(hidden_size, in);
        layer.reset_rec = Eigen::MatrixXd::Zero(hidden_size, hidden_size);
        layer.reset_bias = Eigen::VectorXd::Zero(hidden_size);
        layer.state_in = Eigen::MatrixXd::Zero(hidden_size, in);
        layer.state_rec = Eigen::MatrixXd::Zero(hidden_size, hidden_size);
        layer.state_bias = Eigen::VectorXd::Zero(hidden_size);
    }
    model.readout_weight = Eigen::VectorXd::Zero(hidden_size);
    model.readout_bias = 0.0;

    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    CounterRng rng(mix_keys(seed, 0x6d6f64656cull)); // "model"
    Eigen::VectorXd flat(model.parameter_count());
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        flat[i] = rng.next_double(-bound, bound);
    }
    unflatten(flat, model);
    return model;
}

GruModel GruModel::zeros_like(const GruModel& other) {
    GruModel model = other;
    for_each_parameter_block(model, [](auto& block) { block.setZero(); });
    model.readout_bias = 0.0;
    return model;
}

std::size_t GruModel::parameter_count() const {
    std::size_t n = 1; // readout bias
    for_each_parameter_block(*this, [&n](const auto& block) {
        n += static_cast<std::size_t>(block.size());
    });
    return n;
}

Eigen::VectorXd flatten(const GruModel& model) {
    Eigen::VectorXd flat(model.parameter_count());
    Eigen::Index offset = 0;
    for_each_parameter_block(model, [&](const auto& block) {
        flat.segment(offset, block.size()) =
            Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
        offset += block.size();
    });
    flat[offset] = model.readout_bias;
    return flat;
}

void unflatten(const Eigen::VectorXd& flat, GruModel& model) {
    if (static_cast<std::size_t>(flat.size()) != model.parameter_count()) {
        throw std::invalid_argument("flat parameter vector has the wrong length");
    }
    Eigen::Index offset = 0;
    for_each_parameter_block(model, [&](auto& block) {
        Eigen::Map<Eigen::VectorXd>(block.data(), block.size()) =
            flat.segment(offset, block.size());
        offset += block.size();
    });
    model.readout_bias = flat[offset];
}

GruForwardCache gru_forward_batched(std::span<const Eigen::MatrixXd> steps,
                                    const GruModel& model) {
    if (steps.empty()) {
        throw std::invalid_argument("gru_forward: empty sequence");
    }
    const int num_layers = static_cast<int>(model.layers.size());
    const Eigen::Index batch = steps.front().cols();
    const Eigen::Index hidden = model.hidden_size;

    GruForwardCache cache;
    const std::size_t T = steps.size();
    cache.update.resize(T);
    cache.reset.resize(T);
    cache.state.resize(T);
    cache.hidden.resize(T);

    for (std::size_t t = 0; t < T; ++t) {
        if (steps[t].rows() != model.input_size || steps[t].cols() != batch) {
            throw std::invalid_argument("gru_forward: input step shape mismatch");
        }
        cache.update[t].resize(num_layers);
        cache.reset[t].resize(num_layers);
        cache.state[t].resize(num_layers);
        cache.hidden[t].resize(num_layers);

        const Eigen::MatrixXd* layer_input = &steps[t];
        for (int l = 0; l < num_layers; ++l) {
            const GruLayer& p = model.layers[l];
            const Eigen::MatrixXd h_prev = t == 0
                                               ? Eigen::MatrixXd::Zero(hidden, batch)
                                               : cache.hidden[t - 1][l];
            const Eigen::MatrixXd& x = *layer_input;

            Eigen::MatrixXd z = sigmoid(((p.update_in * x + p.update_rec * h_prev).colwise() +
                                         p.update_bias));
            Eigen::MatrixXd r = sigmoid(((p.reset_in * x + p.reset_rec * h_prev).colwise() +
                                         p.reset_bias));
            Eigen::MatrixXd hbar =
                ((p.state_in * x + p.state_rec * (r.array() * h_prev.array()).matrix())
                     .colwise() +
                 p.state_bias)
                    .array()
                    .tanh();
            Eigen::MatrixXd h = ((1.0 - z.array()) * h_prev.array() +
                                 z.array() * hbar.array())
                                    .matrix();

            cache.update[t][l] = std::move(z);
            cache.reset[t][l] = std::move(r);
            cache.state[t][l] = std::move(hbar);
            cache.hidden[t][l] = std::move(h);
            layer_input = &cache.hidden[t][l];
        }
    }

    const Eigen::MatrixXd& top = cache.hidden[T - 1][num_layers - 1];
    cache.logits = (model.readout_weight.transpose() * top).transpose();
    cache.logits.array() += model.readout_bias;
    cache.probs = 1.0 / (1.0 + (-cache.logits.array()).exp());
    return cache;
}

double gru_forward(const FeatureSequence& sequence, const GruModel& model) {
    std::vector<Eigen::MatrixXd> steps;
    steps.reserve(sequence.size());
    for (const Eigen::VectorXd& x : sequence) {
        steps.push_back(x);
    }
    return gru_forward_batched(steps, model).probs[0];
}

double bce_loss(const Eigen::VectorXd& probs, const Eigen::VectorXd& targets) {
    if (probs.size() != targets.size() || probs.size() == 0) {
        throw std::invalid_argument("bce_loss: probability/target size mismatch");
    }
    const auto p = probs.array().min(1.0 - kProbClamp).max(kProbClamp);
    const auto y = targets.array();
    return (-(y * p.log() + (1.0 - y) * (1.0 - p).log())).mean();
}

GradientResult gru_gradients_batched(std::span<const Eigen::MatrixXd> steps,
                                     const Eigen::VectorXd& targets, const GruModel& model) {
    GruForwardCache cache = gru_forward_batched(steps, model);
    const Eigen::Index batch = cache.probs.size();
    if (targets.size() != batch) {
        throw std::invalid_argument("gru_gradients: target count mismatch");
    }

    GradientResult result;
    result.loss = bce_loss(cache.probs, targets);
    result.gradients = GruModel::zeros_like(model);
    GruModel& g = result.gradients;

    // dL/dlogit for sigmoid + clamped BCE; zero where the clamp is active.
    Eigen::VectorXd dlogits(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const double p = cache.probs[b];
        dlogits[b] = (p < kProbClamp || p > 1.0 - kProbClamp)
                         ? 0.0
                         : (p - targets[b]) / static_cast<double>(batch);
    }

    const int num_layers = static_cast<int>(model.layers.size());
    const std::size_t T = steps.size();
    const Eigen::Index hidden = model.hidden_size;

    const Eigen::MatrixXd& top = cache.hidden[T - 1][num_layers - 1];
    g.readout_weight = top * dlogits;
    g.readout_bias = dlogits.sum();

    // dh[l]: gradient wrt h^l_t; starts with the readout pull on the top layer.
    std::vector<Eigen::MatrixXd> dh(num_layers, Eigen::MatrixXd::Zero(hidden, batch));
    dh[num_layers - 1] = model.readout_weight * dlogits.transpose();

    const Eigen::MatrixXd zero_h = Eigen::MatrixXd::Zero(hidden, batch);
    for (std::size_t ti = T; ti-- > 0;) {
        for (int l = num_layers - 1; l >= 0; --l) {
            const GruLayer& p = model.layers[l];
            const Eigen::MatrixXd& z = cache.update[ti][l];
            const Eigen::MatrixXd& r = cache.reset[ti][l];
            const Eigen::MatrixXd& hbar = cache.state[ti][l];
            const Eigen::MatrixXd& h_prev = ti == 0 ? zero_h : cache.hidden[ti - 1][l];
            const Eigen::MatrixXd& x = l == 0 ? steps[ti] : cache.hidden[ti][l - 1];

            const Eigen::ArrayXXd dh_cur = dh[l].array();
            const Eigen::MatrixXd da_z =
                (dh_cur * (hbar.array() - h_prev.array()) * z.array() * (1.0 - z.array()))
                    .matrix();
            const Eigen::MatrixXd da_h =
                (dh_cur * z.array() * (1.0 - hbar.array().square())).matrix();
            const Eigen::MatrixXd drh = p.state_rec.transpose() * da_h;
            const Eigen::MatrixXd da_r =
                (drh.array() * h_prev.array() * r.array() * (1.0 - r.array())).matrix();

            Eigen::MatrixXd dh_prev = (dh_cur * (1.0 - z.array())).matrix();
            dh_prev.array() += drh.array() * r.array();
            dh_prev += p.update_rec.transpose() * da_z + p.reset_rec.transpose() * da_r;

            GruLayer& gl = g.layers[l];
            gl.update_in += da_z * x.transpose();
            gl.update_rec += da_z * h_prev.transpose();
            gl.update_bias += da_z.rowwise().sum();
            gl.reset_in += da_r * x.transpose();
            gl.reset_rec += da_r * h_prev.transpose();
            gl.reset_bias += da_r.rowwise().sum();
            gl.state_in += da_h * x.transpose();
            gl.state_rec += da_h * (r.array() * h_prev.array()).matrix().transpose();
            gl.state_bias += da_h.rowwise().sum();

            dh[l] = std::move(dh_prev);
            if (l > 0) {
                dh[l - 1] += p.update_in.transpose() * da_z + p.reset_in.transpose() * da_r +
                             p.state_in.transpose() * da_h;
            }
        }
    }
    return result;
}

GradientResult gru_gradients(const std::vector<FeatureSequence>& batches,
                             const std::vector<double>& targets, const GruModel& model) {
    if (batches.empty()) {
        throw std::invalid_argument("gru_gradients: no batches");
    }
    if (batches.size() != targets.size()) {
        throw std::invalid_argument("gru_gradients: batch/target count mismatch");
    }
    const std::size_t T = batches.front().size();
    for (const FeatureSequence& seq : batches) {
        if (seq.size() != T || T == 0) {
            throw std::invalid_argument("gru_gradients: sequences must be time-aligned");
        }
    }
    std::vector<Eigen::MatrixXd> steps(
        T, Eigen::MatrixXd(model.input_size, static_cast<Eigen::Index>(batches.size())));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t b = 0; b < batches.size(); ++b) {
            steps[t].col(static_cast<Eigen::Index>(b)) = batches[b][t];
        }
    }
    Eigen::VectorXd y(static_cast<Eigen::Index>(targets.size()));
    for (std::size_t b = 0; b < targets.size(); ++b) {
        y[static_cast<Eigen::Index>(b)] = targets[b];
    }
    return gru_gradients_batched(steps, y, model);
}

namespace {

constexpr char kModelMagic[8] = {'C', 'T', 'G', 'R', 'U', '0', '0', '1'};

} // namespace

void GruModel::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw FormatError("cannot write model checkpoint: " + file.string());
    }
    out.write(kModelMagic, sizeof(kModelMagic));
    const std::int32_t header[3] = {static_cast<std::int32_t>(input_size),
                                    static_cast<std::int32_t>(hidden_size),
                                    static_cast<std::int32_t>(layers.size())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    const Eigen::VectorXd flat = flatten(*this);
    const std::int64_t n = flat.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

GruModel GruModel::load(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open model checkpoint: " + file.string());
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kModelMagic, sizeof(kModelMagic)) != 0) {
        throw FormatError("not a model checkpoint: " + file.string());
    }
    std::int32_t header[3];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    std::int64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || header[0] < 1 || header[1] < 1 || header[2] < 1) {
        throw FormatError("corrupt model header: " + file.string());
    }
    GruModel model = GruModel::init(header[0], header[1], header[2], 0);
    if (n != static_cast<std::int64_t>(model.parameter_count())) {
        throw FormatError("model checkpoint parameter count mismatch: " + file.string());
    }
    Eigen::VectorXd flat(n);
    in.read(reinterpret_cast<char*>(flat.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != static_cast<std::size_t>(n) * sizeof(double)) {
        throw FormatError("model checkpoint truncated: " + file.string());
    }
    unflatten(flat, model);
    return model;
}

} // namespace ctopt
