#include "ncb/trainer.hpp"

#include <cmath>
#include <sstream>

namespace ncb {

double clip_gradients(std::vector<double>& g, double max_norm) {
    double sq = 0.0;
    for (double x : g) sq += x * x;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double scale = max_norm / norm;
        for (double& x : g) x *= scale;
    }
    return norm;
}

double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
    double warmup = cfg.warmup_fraction * (double)total_steps;
    if (warmup <= 0.0 || (double)step >= warmup) return cfg.lr;
    return cfg.lr * (double)step / warmup;
}

void adamw_step(std::vector<double>& theta, const std::vector<double>& grads, AdamState& state,
                double lr, const TrainConfig& cfg) {
    if (theta.size() != grads.size() || theta.size() != state.m.size()) {
        throw data_error("adamw_step: size mismatch");
    }
    state.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, (double)state.t);
    double bc2 = 1.0 - std::pow(cfg.beta2, (double)state.t);
    for (size_t i = 0; i < theta.size(); i++) {
        double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * theta[i]);
    }
}

static std::string dump_batch(const std::vector<TrainExample>& batch, int64_t step) {
    std::ostringstream os;
    os << "non-finite loss or gradient at step " << step << "; batch queries:";
    size_t shown = std::min<size_t>(batch.size(), 8);
    for (size_t i = 0; i < shown; i++) os << "\n  [" << i << "] " << batch[i].query_text;
    if (batch.size() > shown) os << "\n  ... (" << batch.size() - shown << " more)";
    return os.str();
}

TrainResult train(const std::vector<TrainExample>& dataset, ModelParams& params,
                  const TrainConfig& cfg, const LossConfig& loss_cfg, const UnitTable& table,
                  const std::function<void(const StepLog&)>& on_step,
                  const std::function<void(int, const ModelParams&)>& on_epoch) {
    if (dataset.empty()) throw data_error("train: empty dataset");
    if (cfg.batch_size < 1 || cfg.epochs < 1) throw data_error("train: bad config");

    int64_t batches_per_epoch = (int64_t)((dataset.size() + cfg.batch_size - 1) / cfg.batch_size);
    int64_t total_steps = batches_per_epoch * cfg.epochs;
    LossWeights w = LossWeights::composite(loss_cfg);

    AdamState state(params.theta().size());
    std::vector<double> grads(params.theta().size());
    Rng rng(cfg.seed);
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); i++) order[i] = i;

    TrainResult res;
    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; epoch++) {
        rng.shuffle(order);
        double epoch_sum = 0.0;
        int64_t epoch_batches = 0;
        for (size_t start = 0; start < order.size(); start += (size_t)cfg.batch_size) {
            size_t stop = std::min(order.size(), start + (size_t)cfg.batch_size);
            std::vector<TrainExample> batch;
            batch.reserve(stop - start);
            for (size_t i = start; i < stop; i++) batch.push_back(dataset[order[i]]);

            std::fill(grads.begin(), grads.end(), 0.0);
            LossBreakdown loss = evaluate_batch(batch, params, loss_cfg, w, table, &grads);
            step += 1;

            bool finite = std::isfinite(loss.total);
            for (size_t i = 0; finite && i < grads.size(); i++) finite = std::isfinite(grads[i]);
            if (!finite) throw data_error(dump_batch(batch, step));

            double pre = clip_gradients(grads, cfg.clip_norm);
            double lr = lr_at(step, total_steps, cfg);
            adamw_step(params.theta(), grads, state, lr, cfg);

            epoch_sum += loss.total;
            epoch_batches += 1;
            if (on_step) {
                StepLog log;
                log.step = step;
                log.loss = loss;
                log.grad_norm = std::min(pre, cfg.clip_norm);
                log.lr = lr;
                on_step(log);
            }
            res.last = loss;
        }
        double mean = epoch_sum / (double)epoch_batches;
        if (epoch == 0) res.epoch_first_mean = mean;
        res.epoch_final_mean = mean;
        if (on_epoch) on_epoch(epoch, params);
    }
    res.steps = step;
    return res;
}

}  // namespace ncb
