#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsmoco/config.hpp"
#include "tsmoco/dataset.hpp"
#include "tsmoco/encoder.hpp"
#include "tsmoco/recon.hpp"

namespace tsmoco {

// Raised when a training loss goes non-finite; carries enough context to
// diagnose the blow-up.
struct TrainAbortError : std::runtime_error {
    int step;
    double lr;
    std::vector<double> recent_losses;
    TrainAbortError(int step_, double lr_, std::vector<double> recent, const std::string& msg)
        : std::runtime_error(msg), step(step_), lr(lr_), recent_losses(std::move(recent)) {}
};

struct MetricsRecord {
    std::string phase;
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<double> val_accuracy;  // eval phases only
    double wall_ms = 0.0;
};

// Per-channel z-scoring statistics, fit on the train split and applied to
// every split. An empty instance applies the identity.
struct ChannelStats {
    std::vector<double> mean, stddev;
    static ChannelStats fit(const Dataset& ds, const std::vector<int>& indices);
    Tensor apply(const Tensor& window) const;
};

// Label-free view handed to the self-supervised phase; pretraining can only
// reach windows through it, never the label array.
class UnlabeledWindows {
   public:
    explicit UnlabeledWindows(const Dataset& ds, const ChannelStats& stats)
        : ds_(&ds), stats_(&stats) {}
    int timesteps() const { return ds_->timesteps; }
    Tensor window(int i) const { return stats_->apply(ds_->window(i)); }

   private:
    const Dataset* ds_;
    const ChannelStats* stats_;
};

// Combined self-supervised loss for one (normalized) window: teacher and
// student contexts over the past, future reconstruction from the student
// context, L_Rec + lambda * L_MC. The mask is drawn from mask_rng.
Tensor ss_window_loss(const Tensor& window, const EncoderParams& student,
                      const EncoderParams& teacher, const ReconParams& recon,
                      const TrainConfig& cfg, Rng& mask_rng);

struct PretrainResult {
    EncoderParams student;
    EncoderParams teacher;
    ReconParams recon;
    std::vector<MetricsRecord> history;
};

// Momentum-contrast pretraining on the train split. The teacher starts as an
// exact copy of the student, never joins the optimizer, and moves only via
// the EMA update once per optimizer step.
PretrainResult pretrain(const Dataset& ds, const TrainConfig& cfg);

struct LinearEvalResult {
    Tensor classifier_w;  // [D x C]
    Tensor classifier_b;  // [C]
    double test_accuracy = 0.0;
    std::vector<MetricsRecord> history;
};

// Frozen-encoder linear probe: contexts of the full, non-augmented windows
// are computed once, then a single linear layer is trained with
// cross-entropy, early-stopped on validation loss with best-weights restore.
LinearEvalResult linear_eval(const EncoderParams& encoder, const Dataset& ds,
                             const TrainConfig& cfg);

struct SupervisedResult {
    EncoderParams encoder;
    Tensor classifier_w;
    Tensor classifier_b;
    double test_accuracy = 0.0;
    std::vector<MetricsRecord> history;
};

// Fully supervised baseline: identical encoder architecture plus a dense
// head, trained end-to-end with cross-entropy (capped at pretrain_epochs,
// same early stopping contract).
SupervisedResult supervised_train(const Dataset& ds, const TrainConfig& cfg);

// Stratified random baseline: predictions drawn i.i.d. from the empirical
// train-label distribution. Cycles over test_labels until at least min_draws
// predictions were scored.
double random_classifier(const std::vector<int>& train_labels,
                         const std::vector<int>& test_labels, std::uint64_t seed,
                         int min_draws = 1);

// Linear probe over a freshly initialized, never-trained encoder.
double random_encoder_probe(const Dataset& ds, const TrainConfig& cfg);

// ---- ablation sweep ----

struct SweepDimension {
    std::string name;            // kappa | lambda | K | p_M | alpha
    std::vector<double> values;  // candidate values (entries equal to the base are skipped)
};

struct SweepRow {
    std::string varied;  // "base" or e.g. "kappa=0.99"
    TrainConfig cfg;
    std::vector<double> accuracies;  // one per seed
    double mean_accuracy = 0.0;
    bool failed = false;
    std::string error;
};

// Overwrites one hyperparameter by grid name; throws ConfigError on an
// unknown name.
void apply_hyperparameter(TrainConfig& cfg, const std::string& name, double value);

// Parses a sweep grid JSON file: {"seeds": n, "vary": {name: [values...]}}.
// Dimension order follows the file; unknown hyperparameter names throw
// ConfigError before any run starts.
std::vector<SweepDimension> load_sweep_grid(const std::string& path, int& num_seeds);

// One-at-a-time grid: the base row first, then each dimension's variants
// with every other hyperparameter at its base value. Runs
// pretrain + linear_eval per (row, seed) job with seed = base.seed +
// job_index; failed jobs mark their row FAILED and the sweep continues.
std::vector<SweepRow> ablation_sweep(const Dataset& ds, const TrainConfig& base,
                                     const std::vector<SweepDimension>& grid, int num_seeds,
                                     int max_workers);

}  // namespace tsmoco
