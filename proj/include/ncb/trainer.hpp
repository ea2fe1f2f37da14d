#pragma once

// Mini-batch training: AdamW with decoupled weight decay, linear warmup to a
// constant learning rate, global-norm gradient clipping, deterministic
// per-epoch shuffles. All math in f64.

#include <functional>

#include "ncb/losses.hpp"

namespace ncb {

struct TrainConfig {
    double lr = 1e-3;  // desk-scale default; paper_preset() matches the reference setup
    int epochs = 20;
    int batch_size = 32;
    double warmup_fraction = 0.10;
    double clip_norm = 1.0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.01;
    uint64_t seed = 42;

    static TrainConfig desk_preset() { return {}; }
    static TrainConfig paper_preset() {
        TrainConfig cfg;
        cfg.lr = 2e-5;
        cfg.batch_size = 256;
        cfg.epochs = 5;
        return cfg;
    }
};

struct AdamState {
    std::vector<double> m, v;
    int64_t t = 0;
    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Scales g in place so its global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_gradients(std::vector<double>& g, double max_norm);

// Linear 0 -> lr over the first warmup_fraction * total_steps steps, constant
// lr afterwards.
double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg);

void adamw_step(std::vector<double>& theta, const std::vector<double>& grads, AdamState& state,
                double lr, const TrainConfig& cfg);

struct StepLog {
    int64_t step = 0;  // 1-based
    LossBreakdown loss;
    double grad_norm = 0.0;  // post-clip
    double lr = 0.0;
};

struct TrainResult {
    int64_t steps = 0;
    double epoch_first_mean = 0.0;  // mean composite loss over the first epoch
    double epoch_final_mean = 0.0;
    LossBreakdown last;
};

// Deterministic given cfg.seed. Throws data_error with a batch dump when the
// loss or any gradient turns non-finite.
TrainResult train(const std::vector<TrainExample>& dataset, ModelParams& params,
                  const TrainConfig& cfg, const LossConfig& loss_cfg, const UnitTable& table,
                  const std::function<void(const StepLog&)>& on_step = {},
                  const std::function<void(int, const ModelParams&)>& on_epoch = {});

}  // namespace ncb
