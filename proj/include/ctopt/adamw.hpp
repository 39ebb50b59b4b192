#pragma once

#include <Eigen/Dense>

#include "ctopt/gru.hpp"

namespace ctopt {

struct AdamWParams {
    double learning_rate = 0.002677;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// First/second moment accumulators over the flattened parameter vector.
struct AdamWState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    long step = 0;
    AdamWParams params;

    static AdamWState init(std::size_t parameter_count, const AdamWParams& params);
};

/// Decoupled weight decay update:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
void adamw_step(GruModel& model, const GruModel& gradients, AdamWState& state);

} // namespace ctopt
