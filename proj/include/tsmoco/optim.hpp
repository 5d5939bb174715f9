#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tsmoco/tensor.hpp"

namespace tsmoco {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter first/second moment estimates. Lazily sized to the parameter
// list on the first step; the step counter strictly increases.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};

// Standard Adam update with bias correction. Every parameter must carry a
// populated gradient (a zero gradient counts; an absent one is a contract
// violation). Gradients are left untouched; the caller zeroes them.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg);

void zero_grads(std::vector<Tensor>& params);

// Central finite-difference validation of reverse-mode gradients.
//
// build_loss must rebuild the loss graph from the current parameter values
// and be deterministic for fixed parameters. Returns
//   max over parameter entries of |analytic - fd| / max(1, |fd|)
// with fd the central difference at step h.
double check_gradients(const std::function<Tensor()>& build_loss, std::vector<Tensor> params,
                       double h);

}  // namespace tsmoco
