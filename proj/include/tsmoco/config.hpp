#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "tsmoco/objective.hpp"

namespace tsmoco {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Every hyperparameter of the training pipeline, plus the knobs the models
// need that are not architecture-derived. Loaded from a flat JSON object;
// unknown keys are rejected so parameter-name typos fail loudly.
struct TrainConfig {
    double lambda = 1.0;  // weight of the contrast loss
    double tau = 0.9;     // momentum weight (accepted under alias "kappa")
    int horizon = 6;      // K, future timesteps split off for reconstruction
    double p_m = 0.5;     // masked fraction
    int alpha = 1;        // positional-embedding toggle, 0 or 1

    int depth = 2;
    int d_model = 32;
    int d_ff = 64;
    int n_heads = 4;

    int batch_size = 4;
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    int pretrain_epochs = 100;
    int lineval_epochs = 100;
    int early_stop_patience = 20;
    std::uint64_t seed = 42;

    bool normalize = true;  // per-channel z-scoring from train-split statistics
    RecLossForm rec_loss_form = RecLossForm::mean;

    void validate() const;                 // ranges only
    void validate_for(int timesteps) const;  // additionally checks K <= T-1
};

TrainConfig load_config(const std::string& path);
std::string config_to_json(const TrainConfig& cfg);  // resolved, for manifests

}  // namespace tsmoco
