#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labels.hpp"
#include "net.hpp"
#include "tape.hpp"

namespace lexchain {

// K paragraphs of equal padded length; each one is a fact chunk of up to M
// tokens with the [SEP] subject/priors/prompt suffix replicated behind it.
struct Paragraphs {
    std::vector<std::vector<int>> ids;     // K rows of length len
    std::vector<std::vector<uint8_t>> valid; // 1 = real token, 0 = [PAD]
    int count = 0; // K
    int len = 0;
    bool truncated = false; // fact exceeded K*M and was cut
};

Paragraphs build_paragraphs(const std::vector<int> &fact_ids,
                            const std::vector<int> &suffix_ids, int k, int m);

// Paragraph representations stacked into one (K*len) x d_model memory.
// h(i) views the i-th paragraph block.
struct EncodedFact {
    Mat memory;
    std::vector<uint8_t> mask; // validity per memory row
    int count = 0;             // K
    int len = 0;

    std::span<const double> h(int paragraph, int row, int d) const {
        return {memory.row(paragraph * len + row), static_cast<size_t>(d)};
    }
};

// Encode each paragraph independently; no cross-paragraph attention.
// Throws NumericError naming the layer if activations go non-finite.
EncodedFact encode(const Model &model, const Paragraphs &paragraphs);

// Per-layer cross-attention keys/values over the encoded memory, computed
// once per generated sequence.
struct CrossCache {
    std::vector<Mat> k, v;
};
CrossCache build_cross_cache(const Model &model, const EncodedFact &enc);

// Next-token distribution given the decoder prefix (prefix[0] is the
// [PAD] start token). Sums to 1 within 1e-6.
std::vector<double> decode_step(const Model &model, const EncodedFact &enc,
                                const std::vector<int> &prefix);

struct Generated {
    std::vector<int> ids;             // emitted tokens, [EOS] excluded
    std::vector<double> logprobs;     // one per decoding step, EOS step included
    bool hit_max_len = false;

    double sum_logprob() const {
        double s = 0.0;
        for (double lp : logprobs) s += lp;
        return s;
    }
    // Length-normalized confidence used for chain selection.
    double mean_logprob() const {
        return logprobs.empty() ? 0.0 : sum_logprob() / static_cast<double>(logprobs.size());
    }
};

// Greedy argmax decoding, ties broken by lowest token id; stops at [EOS]
// or after max_len steps.
Generated greedy_decode(const Model &model, const EncodedFact &enc, int max_len);

// One training/inference instance.
struct SeqExample {
    Task task = Task::forward_judgment;
    std::string example_id;
    std::vector<int> fact_ids;
    std::vector<int> suffix_ids;
    std::vector<int> target_ids; // without the trailing [EOS]
};

// Teacher-forced forward pass on the tape; returns the summed NLL over the
// target (incl. the [EOS] step).
Tape::CrossEntropy example_forward(Tape &tape, const Model &model, const SeqExample &ex);

struct TaskLossSums {
    double sum_nll = 0.0;
    long tokens = 0;

    double mean() const { return tokens > 0 ? sum_nll / static_cast<double>(tokens) : 0.0; }
};

// Mean NLL over all non-pad target tokens of the batch plus exact
// gradients of that mean. Deterministic for a fixed thread count: each
// thread accumulates its contiguous slice, slices merge in order.
double loss_and_grads(const Model &model, std::span<const SeqExample> batch,
                      GradAccum &grads, int n_threads = 1);

// Same forward/backward machinery, but gradients and sums are kept per
// task so the weighted multi-task loss can be assembled exactly.
struct TaskBatchGrads {
    std::array<TaskLossSums, 4> sums;
    std::array<GradAccum, 4> grads;

    explicit TaskBatchGrads(const ParamStore &store)
        : grads{GradAccum(store), GradAccum(store), GradAccum(store), GradAccum(store)} {}
};

void accumulate_task_grads(const Model &model, std::span<const SeqExample> batch,
                           TaskBatchGrads &acc, int n_threads = 1);

} // namespace lexchain
