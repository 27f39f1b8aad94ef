#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "chains.hpp"
#include "fid.hpp"

namespace lexchain {

struct TrainConfig {
    // Loss weights, indexed like Task: relationship, circumstances,
    // forward, backward.
    double lambda_relationship = 0.6;
    double lambda_circumstances = 0.8;
    double lambda_forward = 1.4;
    double lambda_backward = 1.2;
    int batch_size = 128;
    int grad_accum_steps = 1;
    int max_epochs = 20;
    double warmup_ratio = 0.01;
    double peak_lr = 1e-3;
    double weight_decay = 0.01; // skipped for norm gains and biases
    double clip_norm = 1.0;     // global gradient-norm clip; 0 disables
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 1;
    int eval_every = 0;    // optimizer steps between validations; 0 = each epoch
    int val_max_cases = 0; // cap validation cases for model selection; 0 = all

    std::array<double, 4> lambdas() const {
        return {lambda_relationship, lambda_circumstances, lambda_forward,
                lambda_backward};
    }
    void validate() const;
};

// Linear warmup to peak_lr over ceil(warmup_ratio * total_steps) steps,
// then linear decay to zero at total_steps.
double lr_at(long step, long total_steps, const TrainConfig &cfg);

// Weighted multi-task loss; tasks absent from the batch contribute zero.
double total_loss(const std::array<std::optional<double>, 4> &task_means,
                  const std::array<double, 4> &lambdas);

// Decoupled weight decay Adam.
class AdamW {
public:
    AdamW(const ParamStore &store, const TrainConfig &cfg);
    void step(ParamStore &store, const GradAccum &grads, double lr);
    long steps_taken() const { return t_; }

private:
    GradAccum m_;
    GradAccum v_;
    TrainConfig cfg_;
    std::vector<bool> decay_mask_; // false for norm gains and biases
    long t_ = 0;
};

struct TrainOutcome {
    std::string checkpoint_path; // best validation checkpoint
    double best_val_metric = -1.0;
    long best_val_step = -1;
    long steps = 0;
    double last_total_loss = 0.0;
    std::array<double, 4> last_task_loss{0, 0, 0, 0};
};

// Joint multi-task training with per-epoch shuffling, gradient
// accumulation, warmup schedule and best-checkpoint selection by mean
// macro-F1 over articles/charges/penalty on the validation split. Writes
// best.ckpt under out_dir and streams JSONL log records to `log`.
// Divergence (non-finite loss) aborts with the best checkpoint retained.
TrainOutcome train_model(Model &model, const TrainConfig &cfg,
                         const ChainSettings &settings, const PromptSet &prompts,
                         const std::vector<CaseRecord> &train_cases,
                         const std::vector<CaseRecord> &val_cases, const Vocab &vocab,
                         const LabelSpace &space, const CheckpointMeta &meta,
                         const std::string &out_dir, std::ostream *log,
                         int n_threads);

} // namespace lexchain
