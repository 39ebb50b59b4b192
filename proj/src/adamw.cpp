#include "ctopt/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace ctopt {

AdamWState AdamWState::init(std::size_t parameter_count, const AdamWParams& params) {
    AdamWState state;
    state.first_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count));
    state.second_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count));
    state.step = 0;
    state.params = params;
    return state;
}

void adamw_step(GruModel& model, const GruModel& gradients, AdamWState& state) {
    Eigen::VectorXd theta = flatten(model);
    const Eigen::VectorXd g = flatten(gradients);
    if (theta.size() != g.size() || theta.size() != state.first_moment.size()) {
        throw std::invalid_argument("adamw_step: parameter/gradient shape mismatch");
    }
    const AdamWParams& p = state.params;
    ++state.step;

    state.first_moment = p.beta1 * state.first_moment + (1.0 - p.beta1) * g;
    state.second_moment =
        (p.beta2 * state.second_moment.array() + (1.0 - p.beta2) * g.array().square())
            .matrix();

    const double correction1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
    const Eigen::ArrayXd m_hat = state.first_moment.array() / correction1;
    const Eigen::ArrayXd v_hat = state.second_moment.array() / correction2;

    theta.array() -= p.learning_rate *
                     (m_hat / (v_hat.sqrt() + p.epsilon) + p.weight_decay * theta.array());
    unflatten(theta, model);
}

} // namespace ctopt
