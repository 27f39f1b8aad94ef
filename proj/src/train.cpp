#include "train.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace lexchain {

using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
    for (double l : lambdas())
        if (l < 0.0 || !std::isfinite(l)) throw ConfigError("loss weights must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (grad_accum_steps < 1) throw ConfigError("grad_accum_steps must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (warmup_ratio < 0.0 || warmup_ratio > 1.0)
        throw ConfigError("warmup_ratio must be in [0, 1]");
    if (peak_lr <= 0.0) throw ConfigError("peak_lr must be > 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

double lr_at(long step, long total_steps, const TrainConfig &cfg) {
    if (total_steps <= 0) throw ConfigError("lr schedule needs total_steps > 0");
    if (step < 0) step = 0;
    if (step > total_steps) step = total_steps;
    long warmup = static_cast<long>(
        std::ceil(cfg.warmup_ratio * static_cast<double>(total_steps)));
    if (warmup > 0 && step <= warmup)
        return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
    if (total_steps == warmup) return cfg.peak_lr;
    return cfg.peak_lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

double total_loss(const std::array<std::optional<double>, 4> &task_means,
                  const std::array<double, 4> &lambdas) {
    double total = 0.0;
    for (size_t t = 0; t < 4; ++t)
        if (task_means[t]) total += lambdas[t] * *task_means[t];
    return total;
}

AdamW::AdamW(const ParamStore &store, const TrainConfig &cfg)
    : m_(store), v_(store), cfg_(cfg) {
    decay_mask_.reserve(store.entries().size());
    for (const auto &e : store.entries()) {
        const std::string &p = e.path;
        bool is_norm_or_bias =
            (p.size() >= 4 && (p.compare(p.size() - 4, 4, "gain") == 0 ||
                               p.compare(p.size() - 4, 4, "bias") == 0)) ||
            (p.size() >= 3 && (p.compare(p.size() - 3, 3, ".b1") == 0 ||
                               p.compare(p.size() - 3, 3, ".b2") == 0));
        decay_mask_.push_back(!is_norm_or_bias);
    }
}

void AdamW::step(ParamStore &store, const GradAccum &grads, double lr) {
    ++t_;
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));

    // Global gradient-norm clipping keeps occasional sharp batches from
    // poisoning the Adam second moments.
    double scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto &g : grads.g)
            for (double v : g.a) sq += v * v;
        double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
    }

    for (int p = 0; p < store.count(); ++p) {
        auto &theta = store.value(p).a;
        const auto &g = grads.g[static_cast<size_t>(p)].a;
        auto &m = m_.g[static_cast<size_t>(p)].a;
        auto &v = v_.g[static_cast<size_t>(p)].a;
        const double wd = decay_mask_[static_cast<size_t>(p)] ? cfg_.weight_decay : 0.0;
        for (size_t i = 0; i < theta.size(); ++i) {
            double gi = g[i] * scale;
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            theta[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) + wd * theta[i]);
        }
    }
}

namespace {

double run_validation(const Model &model, const ChainSettings &settings,
                      const PromptSet &prompts, const std::vector<CaseRecord> &val_cases,
                      const Vocab &vocab, const LabelSpace &space, int val_max_cases,
                      int n_threads) {
    std::vector<CaseRecord> subset;
    const std::vector<CaseRecord> *cases = &val_cases;
    if (val_max_cases > 0 && static_cast<long>(val_cases.size()) > val_max_cases) {
        subset.assign(val_cases.begin(), val_cases.begin() + val_max_cases);
        cases = &subset;
    }
    ChainContext ctx{model, vocab, space, prompts, settings};
    EvalResult result = evaluate_cases(ctx, *cases, /*gold_intermediates=*/false,
                                       n_threads);
    return result.report.mean_judgment_f1();
}

} // namespace

TrainOutcome train_model(Model &model, const TrainConfig &cfg,
                         const ChainSettings &settings, const PromptSet &prompts,
                         const std::vector<CaseRecord> &train_cases,
                         const std::vector<CaseRecord> &val_cases, const Vocab &vocab,
                         const LabelSpace &space, const CheckpointMeta &meta,
                         const std::string &out_dir, std::ostream *log,
                         int n_threads) {
    cfg.validate();
    if (train_cases.empty()) throw DataError("training split is empty");
    if (val_cases.empty()) throw DataError("validation split is empty");

    std::vector<SeqExample> examples;
    for (const auto &rec : train_cases) {
        auto ex = build_training_examples(rec, vocab, space, prompts, settings,
                                          model.cfg.max_suffix_len);
        examples.insert(examples.end(), std::make_move_iterator(ex.begin()),
                        std::make_move_iterator(ex.end()));
    }
    if (examples.empty()) throw DataError("no training examples were built");

    const long per_step = static_cast<long>(cfg.batch_size) * cfg.grad_accum_steps;
    const long steps_per_epoch =
        (static_cast<long>(examples.size()) + per_step - 1) / per_step;
    const long total_steps = steps_per_epoch * cfg.max_epochs;
    const auto lambdas = cfg.lambdas();

    TrainOutcome outcome;
    outcome.checkpoint_path = out_dir + "/best.ckpt";
    AdamW opt(model.params, cfg);
    Rng shuffle_rng(cfg.seed);
    GradAccum step_grads(model.params);
    long step = 0;

    auto log_line = [log](const json &j) {
        if (log) *log << j.dump() << '\n';
    };
    auto validate_and_checkpoint = [&](long at_step) {
        double metric = run_validation(model, settings, prompts, val_cases, vocab,
                                       space, cfg.val_max_cases, n_threads);
        bool best = metric > outcome.best_val_metric;
        if (best) {
            outcome.best_val_metric = metric;
            outcome.best_val_step = at_step;
            save_checkpoint(model, meta, outcome.checkpoint_path);
        }
        json j;
        j["step"] = at_step;
        j["val_mean_f1"] = metric;
        j["best"] = best;
        log_line(j);
    };

    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        size_t cursor = 0;
        while (cursor < order.size()) {
            TaskBatchGrads acc(model.params);
            try {
                for (int micro = 0;
                     micro < cfg.grad_accum_steps && cursor < order.size(); ++micro) {
                    size_t take = std::min(static_cast<size_t>(cfg.batch_size),
                                           order.size() - cursor);
                    std::vector<SeqExample> micro_batch;
                    micro_batch.reserve(take);
                    for (size_t i = 0; i < take; ++i)
                        micro_batch.push_back(examples[order[cursor + i]]);
                    cursor += take;
                    accumulate_task_grads(model, micro_batch, acc, n_threads);
                }
            } catch (const NumericError &e) {
                json j;
                j["step"] = step + 1;
                j["event"] = "divergence";
                log_line(j);
                throw NumericError(std::string(e.what()) + "; last good checkpoint: " +
                                   (outcome.best_val_step >= 0 ? outcome.checkpoint_path
                                                               : "none"));
            }

            std::array<std::optional<double>, 4> task_means;
            step_grads.set_zero();
            for (size_t t = 0; t < 4; ++t) {
                if (acc.sums[t].tokens == 0) continue;
                task_means[t] = acc.sums[t].mean();
                // d(weighted total)/dθ = Σ λ_t / N_t * Σ_example dθ
                step_grads.add_scaled(acc.grads[t],
                                      lambdas[t] /
                                          static_cast<double>(acc.sums[t].tokens));
            }
            double loss = total_loss(task_means, lambdas);
            if (!std::isfinite(loss)) {
                json j;
                j["step"] = step + 1;
                j["event"] = "divergence";
                log_line(j);
                throw NumericError(
                    "training diverged (non-finite loss) at step " +
                    std::to_string(step + 1) + "; last good checkpoint: " +
                    (outcome.best_val_step >= 0 ? outcome.checkpoint_path : "none"));
            }

            ++step;
            double lr = lr_at(step, total_steps, cfg);
            opt.step(model.params, step_grads, lr);

            outcome.last_total_loss = loss;
            json j;
            j["step"] = step;
            j["lr"] = lr;
            j["loss"] = loss;
            const char *names[4] = {"loss_relationship", "loss_circumstances",
                                    "loss_forward", "loss_backward"};
            for (size_t t = 0; t < 4; ++t) {
                outcome.last_task_loss[t] = task_means[t] ? *task_means[t] : 0.0;
                if (task_means[t]) j[names[t]] = *task_means[t];
            }
            log_line(j);

            if (cfg.eval_every > 0 && step % cfg.eval_every == 0)
                validate_and_checkpoint(step);
        }
        if (cfg.eval_every == 0) validate_and_checkpoint(step);
    }
    if (cfg.eval_every > 0 && step % cfg.eval_every != 0) validate_and_checkpoint(step);
    if (outcome.best_val_step < 0) validate_and_checkpoint(step);
    outcome.steps = step;
    return outcome;
}

} // namespace lexchain
