#include "tsmoco/optim.hpp"

#include <cmath>
#include <string>

namespace tsmoco {

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            state.m[p].assign(params[p].values().size(), 0.0);
            state.v[p].assign(params[p].values().size(), 0.0);
        }
    }
    if (state.m.size() != params.size()) {
        throw GraphError("adam_step: state tracks " + std::to_string(state.m.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = params[p];
        if (!t.has_grad()) {
            throw GraphError("adam_step: parameter " + std::to_string(p) +
                             " has no gradient; run backward first");
        }
        auto val = t.values_mut();
        auto g = t.grad();
        auto& m = state.m[p];
        auto& v = state.v[p];
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            val[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (Tensor& t : params) t.zero_grad();
}

double check_gradients(const std::function<Tensor()>& build_loss, std::vector<Tensor> params,
                       double h) {
    // Analytic pass.
    for (Tensor& p : params) p.zero_grad();
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = build_loss();
        tape.backward(loss);
    }
    analytic.reserve(params.size());
    for (Tensor& p : params) {
        if (p.has_grad()) {
            analytic.emplace_back(p.grad().begin(), p.grad().end());
        } else {
            analytic.emplace_back(p.values().size(), 0.0);
        }
        p.zero_grad();
    }

    // Central differences, one entry at a time.
    const auto eval = [&build_loss]() {
        NoGrad ng;
        return build_loss().item();
    };
    double max_rel = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto val = params[p].values_mut();
        for (std::size_t i = 0; i < val.size(); ++i) {
            const double orig = val[i];
            val[i] = orig + h;
            const double lp = eval();
            val[i] = orig - h;
            const double lm = eval();
            val[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double rel = std::fabs(analytic[p][i] - fd) / std::max(1.0, std::fabs(fd));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace tsmoco
