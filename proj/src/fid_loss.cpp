#include <cmath>
#include <memory>

#include "errors.hpp"
#include "fid.hpp"
#include "threads.hpp"

namespace lexchain {

Tape::CrossEntropy example_forward(Tape &tape, const Model &model, const SeqExample &ex) {
    const ModelConfig &cfg = model.cfg;
    if (static_cast<int>(ex.target_ids.size()) + 1 > cfg.max_output_len)
        throw DataError("example " + ex.example_id + ": target length " +
                        std::to_string(ex.target_ids.size()) +
                        " does not fit max_output_len " +
                        std::to_string(cfg.max_output_len));

    Paragraphs paragraphs =
        build_paragraphs(ex.fact_ids, ex.suffix_ids, cfg.paragraphs, cfg.paragraph_tokens);

    // Encode each paragraph independently over its valid prefix; padded
    // tail rows carry nothing and are simply left out of the memory.
    std::vector<Tape::NodeId> blocks;
    for (int pi = 0; pi < paragraphs.count; ++pi) {
        const auto &ids = paragraphs.ids[static_cast<size_t>(pi)];
        const auto &valid = paragraphs.valid[static_cast<size_t>(pi)];
        int t = 0;
        while (t < static_cast<int>(valid.size()) && valid[static_cast<size_t>(t)]) ++t;
        if (t == 0) continue;
        std::vector<int> live(ids.begin(), ids.begin() + t);
        std::vector<uint8_t> mask(static_cast<size_t>(t) * t, 1);

        Tape::NodeId x = tape.add_positions(tape.embed(model.emb, live), model.enc_pos);
        for (const auto &layer : model.enc_layers) {
            Tape::NodeId a = tape.layer_norm(x, layer.attn.norm_gain, layer.attn.norm_bias);
            Tape::NodeId att =
                tape.attention(tape.linear(a, layer.attn.wq), tape.linear(a, layer.attn.wk),
                               tape.linear(a, layer.attn.wv), cfg.n_heads, mask);
            x = tape.add(x, tape.linear(att, layer.attn.wo));
            Tape::NodeId f = tape.layer_norm(x, layer.ffn.norm_gain, layer.ffn.norm_bias);
            Tape::NodeId h = tape.gelu(tape.add_bias(tape.linear(f, layer.ffn.w1), layer.ffn.b1));
            x = tape.add(x, tape.add_bias(tape.linear(h, layer.ffn.w2), layer.ffn.b2));
        }
        blocks.push_back(tape.layer_norm(x, model.enc_norm_gain, model.enc_norm_bias));
    }
    Tape::NodeId memory = tape.concat_rows(blocks);
    std::vector<uint8_t> memory_mask(static_cast<size_t>(tape.val(memory).rows), 1);

    // Teacher forcing: [PAD]-started shifted input, target plus [EOS].
    std::vector<int> dec_input;
    dec_input.reserve(ex.target_ids.size() + 1);
    dec_input.push_back(Vocab::pad_id);
    dec_input.insert(dec_input.end(), ex.target_ids.begin(), ex.target_ids.end());
    std::vector<int> targets = ex.target_ids;
    targets.push_back(Vocab::eos_id);

    const int t = static_cast<int>(dec_input.size());
    std::vector<uint8_t> causal(static_cast<size_t>(t) * t, 0);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j <= i; ++j) causal[static_cast<size_t>(i) * t + j] = 1;
    const int mem_rows = tape.val(memory).rows;
    std::vector<uint8_t> cross(static_cast<size_t>(t) * mem_rows);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < mem_rows; ++j)
            cross[static_cast<size_t>(i) * mem_rows + j] = memory_mask[static_cast<size_t>(j)];

    Tape::NodeId y = tape.add_positions(tape.embed(model.emb, dec_input), model.dec_pos);
    for (const auto &layer : model.dec_layers) {
        Tape::NodeId a =
            tape.layer_norm(y, layer.self_attn.norm_gain, layer.self_attn.norm_bias);
        Tape::NodeId att = tape.attention(tape.linear(a, layer.self_attn.wq),
                                          tape.linear(a, layer.self_attn.wk),
                                          tape.linear(a, layer.self_attn.wv), cfg.n_heads,
                                          causal);
        y = tape.add(y, tape.linear(att, layer.self_attn.wo));

        Tape::NodeId c =
            tape.layer_norm(y, layer.cross_attn.norm_gain, layer.cross_attn.norm_bias);
        Tape::NodeId catt = tape.attention(tape.linear(c, layer.cross_attn.wq),
                                           tape.linear(memory, layer.cross_attn.wk),
                                           tape.linear(memory, layer.cross_attn.wv),
                                           cfg.n_heads, cross);
        y = tape.add(y, tape.linear(catt, layer.cross_attn.wo));

        Tape::NodeId f = tape.layer_norm(y, layer.ffn.norm_gain, layer.ffn.norm_bias);
        Tape::NodeId h = tape.gelu(tape.add_bias(tape.linear(f, layer.ffn.w1), layer.ffn.b1));
        y = tape.add(y, tape.add_bias(tape.linear(h, layer.ffn.w2), layer.ffn.b2));
    }
    y = tape.layer_norm(y, model.dec_norm_gain, model.dec_norm_bias);
    Tape::NodeId logits = tape.tied_logits(y, model.emb);
    Tape::CrossEntropy ce = tape.cross_entropy_sum(logits, targets);
    if (!std::isfinite(ce.sum_nll))
        throw NumericError("non-finite loss for example " + ex.example_id);
    return ce;
}

double loss_and_grads(const Model &model, std::span<const SeqExample> batch,
                      GradAccum &grads, int n_threads) {
    if (batch.empty()) throw DataError("loss_and_grads: empty batch");
    struct Slice {
        double sum_nll = 0.0;
        long tokens = 0;
        std::unique_ptr<GradAccum> grads;
    };
    std::vector<Slice> slices(static_cast<size_t>(n_threads) < batch.size()
                                  ? static_cast<size_t>(n_threads)
                                  : batch.size());
    parallel_slices(batch.size(), n_threads, [&](int s, size_t begin, size_t end) {
        Slice &slice = slices[static_cast<size_t>(s)];
        slice.grads = std::make_unique<GradAccum>(model.params);
        for (size_t i = begin; i < end; ++i) {
            Tape tape(model.params);
            Tape::CrossEntropy ce = example_forward(tape, model, batch[i]);
            tape.backward(ce, 1.0);
            tape.flush_param_grads(*slice.grads, 1.0);
            slice.sum_nll += ce.sum_nll;
            slice.tokens += ce.tokens;
        }
    });
    double sum_nll = 0.0;
    long tokens = 0;
    for (const auto &s : slices) {
        sum_nll += s.sum_nll;
        tokens += s.tokens;
    }
    double inv = 1.0 / static_cast<double>(tokens);
    for (const auto &s : slices) grads.add_scaled(*s.grads, inv);
    return sum_nll * inv;
}

void accumulate_task_grads(const Model &model, std::span<const SeqExample> batch,
                           TaskBatchGrads &acc, int n_threads) {
    struct Slice {
        std::array<TaskLossSums, 4> sums;
        std::unique_ptr<TaskBatchGrads> grads;
    };
    if (batch.empty()) return;
    std::vector<Slice> slices(static_cast<size_t>(n_threads) < batch.size()
                                  ? static_cast<size_t>(n_threads)
                                  : batch.size());
    parallel_slices(batch.size(), n_threads, [&](int s, size_t begin, size_t end) {
        Slice &slice = slices[static_cast<size_t>(s)];
        slice.grads = std::make_unique<TaskBatchGrads>(model.params);
        for (size_t i = begin; i < end; ++i) {
            const SeqExample &ex = batch[i];
            size_t task = static_cast<size_t>(ex.task);
            Tape tape(model.params);
            Tape::CrossEntropy ce = example_forward(tape, model, ex);
            tape.backward(ce, 1.0);
            tape.flush_param_grads(slice.grads->grads[task], 1.0);
            slice.sums[task].sum_nll += ce.sum_nll;
            slice.sums[task].tokens += ce.tokens;
        }
    });
    for (const auto &s : slices)
        for (size_t task = 0; task < 4; ++task) {
            if (s.sums[task].tokens == 0) continue;
            acc.sums[task].sum_nll += s.sums[task].sum_nll;
            acc.sums[task].tokens += s.sums[task].tokens;
            acc.grads[task].add_scaled(s.grads->grads[task], 1.0);
        }
}

} // namespace lexchain
