#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "params.hpp"
#include "vocab.hpp"

namespace lexchain {

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int ffn_dim = 128;
    int paragraphs = 3;         // K
    int paragraph_tokens = 768; // M words of fact per paragraph
    int max_output_len = 64;
    int max_suffix_len = 64; // token budget for [SEP] subject/priors/prompt
    int vocab_size = 0;
    uint64_t seed = 1;

    int max_fact_len() const { return paragraphs * paragraph_tokens; }
    int max_paragraph_len() const { return paragraph_tokens + max_suffix_len; }
    void validate() const; // throws ConfigError

    // Tiny 1-layer preset used by the numeric test suites.
    static ModelConfig desk_preset();
};

// Parameter id handles for one attention sublayer / feed-forward block.
struct AttnIds {
    int norm_gain, norm_bias, wq, wk, wv, wo;
};
struct FfnIds {
    int norm_gain, norm_bias, w1, b1, w2, b2;
};
struct EncLayerIds {
    AttnIds attn;
    FfnIds ffn;
};
struct DecLayerIds {
    AttnIds self_attn;
    AttnIds cross_attn;
    FfnIds ffn;
};

// The full encoder-decoder with per-paragraph encoding and a decoder that
// cross-attends over the concatenated paragraph representations. The
// output projection is weight-tied to the token embedding.
struct Model {
    ModelConfig cfg;
    ParamStore params;

    int emb = -1;     // vocab_size x d_model
    int enc_pos = -1; // per-paragraph positions, restart every paragraph
    int dec_pos = -1;
    std::vector<EncLayerIds> enc_layers;
    std::vector<DecLayerIds> dec_layers;
    int enc_norm_gain = -1, enc_norm_bias = -1;
    int dec_norm_gain = -1, dec_norm_bias = -1;

    explicit Model(ModelConfig config); // allocates zeroed parameters
    void init_weights();                // deterministic from cfg.seed
};

struct CheckpointMeta {
    uint64_t vocab_hash = 0;
    uint64_t label_hash = 0;
    std::string ablation = "full";
    PromptSet prompts;
};

// Self-describing binary container: versioned header (JSON: config, vocab
// and label-vocab hashes, prompts, ablation, parameter shapes by path)
// followed by raw little-endian float32 parameter data. Writes are atomic
// (temp file + rename).
void save_checkpoint(const Model &model, const CheckpointMeta &meta,
                     const std::string &path);
Model load_checkpoint(const std::string &path, CheckpointMeta &meta_out);

} // namespace lexchain
