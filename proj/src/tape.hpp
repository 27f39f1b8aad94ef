#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "params.hpp"

namespace lexchain {

// Reverse-mode autodiff over whole matrices. Each op records a closure
// that propagates gradients to its inputs; backward() replays them in
// reverse. One tape is built per training example, so tapes never need to
// be thread-safe themselves.
class Tape {
public:
    using NodeId = int;

    explicit Tape(const ParamStore &params) : params_(params) {}

    const Mat &val(NodeId n) const { return nodes_[static_cast<size_t>(n)].val; }
    Mat &grad(NodeId n) { return nodes_[static_cast<size_t>(n)].grad; }

    // Token embedding lookup: rows of the embedding matrix.
    NodeId embed(int emb_param, const std::vector<int> &ids);
    // x + learned positions 0..rows-1 from a positional table.
    NodeId add_positions(NodeId x, int pos_param);
    // x * W
    NodeId linear(NodeId x, int w_param);
    // x + row-broadcast bias
    NodeId add_bias(NodeId x, int b_param);
    NodeId add(NodeId a, NodeId b);
    NodeId layer_norm(NodeId x, int gain_param, int bias_param);
    NodeId gelu(NodeId x);
    NodeId concat_rows(const std::vector<NodeId> &parts);
    // Multi-head scaled dot-product attention over already-projected
    // q/k/v. mask[i*Tk+j] != 0 means query i may attend key j; a fully
    // masked query row yields a zero output row.
    NodeId attention(NodeId q, NodeId k, NodeId v, int n_heads,
                     const std::vector<uint8_t> &mask);
    // Weight-tied output projection: x * E^T.
    NodeId tied_logits(NodeId x, int emb_param);

    struct CrossEntropy {
        NodeId logits = -1;
        size_t index = 0;     // which recorded cross-entropy this is
        double sum_nll = 0.0; // sum over counted rows
        long tokens = 0;      // rows with target != ignore
    };
    // Row-wise softmax cross entropy against `targets`; rows with target
    // < 0 are excluded. Stores softmax probabilities for backward.
    CrossEntropy cross_entropy_sum(NodeId logits, const std::vector<int> &targets);

    // Seed d(sum_nll)/d(logits) scaled by `scale` and run all recorded
    // closures in reverse. May be called once per tape.
    void backward(const CrossEntropy &ce, double scale);

    // Parameter gradients accumulated by this tape (sparse; only touched
    // params appear). Adds them into `out` scaled by `scale`.
    void flush_param_grads(GradAccum &out, double scale) const;

    const ParamStore &params() const { return params_; }

private:
    struct Node {
        Mat val;
        Mat grad;
    };

    NodeId push(Mat val) {
        Node n;
        n.grad = Mat(val.rows, val.cols);
        n.val = std::move(val);
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    Mat &pgrad(int param_id);

    const ParamStore &params_;
    std::vector<Node> nodes_;
    std::vector<std::function<void()>> backward_steps_;
    std::unordered_map<int, Mat> param_grads_;
    // Saved softmax probabilities for the cross-entropy seed.
    std::vector<Mat> ce_probs_;
    std::vector<std::vector<int>> ce_targets_;
};

} // namespace lexchain
