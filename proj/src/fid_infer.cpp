#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "fid.hpp"
#include "netmath.hpp"

namespace lexchain {

Paragraphs build_paragraphs(const std::vector<int> &fact_ids,
                            const std::vector<int> &suffix_ids, int k, int m) {
    Paragraphs out;
    out.count = k;
    size_t capacity = static_cast<size_t>(k) * static_cast<size_t>(m);
    size_t fact_len = fact_ids.size();
    if (fact_len > capacity) {
        fact_len = capacity;
        out.truncated = true;
    }
    // The suffix (subject/priors/prompt) leads each paragraph, FID-style,
    // so those fields sit at fixed positions regardless of chunk length.
    // All paragraphs share one padded length so they stack into a matrix.
    size_t longest_chunk = fact_len < static_cast<size_t>(m) ? fact_len
                                                             : static_cast<size_t>(m);
    out.len = static_cast<int>(longest_chunk + suffix_ids.size());
    for (int p = 0; p < k; ++p) {
        size_t begin = static_cast<size_t>(p) * m;
        size_t end = begin + m < fact_len ? begin + m : fact_len;
        std::vector<int> ids;
        std::vector<uint8_t> valid;
        ids.reserve(static_cast<size_t>(out.len));
        ids.insert(ids.end(), suffix_ids.begin(), suffix_ids.end());
        if (begin < end)
            ids.insert(ids.end(), fact_ids.begin() + static_cast<long>(begin),
                       fact_ids.begin() + static_cast<long>(end));
        valid.assign(ids.size(), 1);
        while (static_cast<int>(ids.size()) < out.len) {
            ids.push_back(Vocab::pad_id);
            valid.push_back(0);
        }
        out.ids.push_back(std::move(ids));
        out.valid.push_back(std::move(valid));
    }
    return out;
}

namespace {

Mat embed_rows(const Mat &emb, const std::vector<int> &ids) {
    Mat out(static_cast<int>(ids.size()), emb.cols);
    for (size_t t = 0; t < ids.size(); ++t) {
        const double *src = emb.row(ids[t]);
        double *dst = out.row(static_cast<int>(t));
        for (int j = 0; j < emb.cols; ++j) dst[j] = src[j];
    }
    return out;
}

void add_positions_inplace(Mat &x, const Mat &pos, const char *what) {
    if (x.rows > pos.rows)
        throw ConfigError(std::string(what) + " length " + std::to_string(x.rows) +
                          " exceeds positional table " + std::to_string(pos.rows));
    for (int t = 0; t < x.rows; ++t) {
        const double *p = pos.row(t);
        double *dst = x.row(t);
        for (int j = 0; j < x.cols; ++j) dst[j] += p[j];
    }
}

Mat layer_norm_rows(const Mat &x, const Mat &gain, const Mat &bias) {
    Mat out(x.rows, x.cols);
    const int d = x.cols;
    for (int t = 0; t < x.rows; ++t) {
        const double *row = x.row(t);
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += row[j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            double c = row[j] - mean;
            var += c * c;
        }
        var /= d;
        double is = 1.0 / std::sqrt(var + kLayerNormEps);
        double *o = out.row(t);
        for (int j = 0; j < d; ++j)
            o[j] = (row[j] - mean) * is * gain.a[static_cast<size_t>(j)] +
                   bias.a[static_cast<size_t>(j)];
    }
    return out;
}

// Matches Tape::attention exactly, minus the bookkeeping.
Mat attention_rows(const Mat &q, const Mat &k, const Mat &v, int n_heads,
                   const std::vector<uint8_t> &mask) {
    const int tq = q.rows, tk = k.rows, d = q.cols;
    const int dh = d / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat out(tq, d);
    std::vector<double> prow(static_cast<size_t>(tk));
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < tq; ++i) {
            const double *qrow = q.row(i) + off;
            const uint8_t *mrow = mask.data() + static_cast<size_t>(i) * tk;
            double maxv = -1e300;
            bool any = false;
            for (int j = 0; j < tk; ++j) {
                if (!mrow[j]) continue;
                const double *krow = k.row(j) + off;
                double s = 0.0;
                for (int t = 0; t < dh; ++t) s += qrow[t] * krow[t];
                s *= scale;
                prow[static_cast<size_t>(j)] = s;
                if (!any || s > maxv) maxv = s;
                any = true;
            }
            if (!any) continue;
            double denom = 0.0;
            for (int j = 0; j < tk; ++j) {
                if (!mrow[j]) {
                    prow[static_cast<size_t>(j)] = 0.0;
                    continue;
                }
                prow[static_cast<size_t>(j)] = std::exp(prow[static_cast<size_t>(j)] - maxv);
                denom += prow[static_cast<size_t>(j)];
            }
            double inv = 1.0 / denom;
            double *orow = out.row(i) + off;
            for (int j = 0; j < tk; ++j) {
                double p = prow[static_cast<size_t>(j)] * inv;
                if (p != 0.0) {
                    const double *vrow = v.row(j) + off;
                    for (int t = 0; t < dh; ++t) orow[t] += p * vrow[t];
                }
            }
        }
    }
    return out;
}

void add_inplace(Mat &x, const Mat &delta) {
    for (size_t i = 0; i < x.a.size(); ++i) x.a[i] += delta.a[i];
}

Mat linear_bias(const Mat &x, const Mat &w, const Mat &b) {
    Mat out;
    matmul(x, w, out);
    for (int t = 0; t < out.rows; ++t) {
        double *row = out.row(t);
        for (int j = 0; j < out.cols; ++j) row[j] += b.a[static_cast<size_t>(j)];
    }
    return out;
}

void check_finite(const Mat &m, const std::string &where) {
    if (!all_finite(m)) throw NumericError("non-finite activation in " + where);
}

void self_attn_sublayer(const Model &model, Mat &x, const AttnIds &ids,
                        const std::vector<uint8_t> &mask, const std::string &where) {
    const ParamStore &p = model.params;
    Mat normed = layer_norm_rows(x, p.value(ids.norm_gain), p.value(ids.norm_bias));
    Mat q, k, v;
    matmul(normed, p.value(ids.wq), q);
    matmul(normed, p.value(ids.wk), k);
    matmul(normed, p.value(ids.wv), v);
    Mat att = attention_rows(q, k, v, model.cfg.n_heads, mask);
    Mat o;
    matmul(att, p.value(ids.wo), o);
    add_inplace(x, o);
    check_finite(x, where);
}

void ffn_sublayer(const Model &model, Mat &x, const FfnIds &ids, const std::string &where) {
    const ParamStore &p = model.params;
    Mat normed = layer_norm_rows(x, p.value(ids.norm_gain), p.value(ids.norm_bias));
    Mat h = linear_bias(normed, p.value(ids.w1), p.value(ids.b1));
    for (auto &v : h.a) v = gelu_scalar(v);
    Mat o = linear_bias(h, p.value(ids.w2), p.value(ids.b2));
    add_inplace(x, o);
    check_finite(x, where);
}

} // namespace

// Valid tokens form a prefix of every paragraph (suffix + chunk, pads at
// the end), so the transformer only runs over that prefix; padded rows
// stay zero and are masked out of cross-attention anyway.
static int valid_prefix(const std::vector<uint8_t> &valid) {
    int n = 0;
    while (n < static_cast<int>(valid.size()) && valid[static_cast<size_t>(n)]) ++n;
    return n;
}

EncodedFact encode(const Model &model, const Paragraphs &paragraphs) {
    const ParamStore &p = model.params;
    EncodedFact enc;
    enc.count = paragraphs.count;
    enc.len = paragraphs.len;
    enc.memory = Mat(paragraphs.count * paragraphs.len, model.cfg.d_model);
    enc.mask.reserve(enc.memory.rows >= 0 ? static_cast<size_t>(enc.memory.rows) : 0);

    for (int pi = 0; pi < paragraphs.count; ++pi) {
        const auto &ids = paragraphs.ids[static_cast<size_t>(pi)];
        const auto &valid = paragraphs.valid[static_cast<size_t>(pi)];
        const int t = valid_prefix(valid);
        enc.mask.insert(enc.mask.end(), valid.begin(), valid.end());
        if (t == 0) continue;
        std::vector<int> live(ids.begin(), ids.begin() + t);
        Mat x = embed_rows(p.value(model.emb), live);
        add_positions_inplace(x, p.value(model.enc_pos), "encoder paragraph");
        std::vector<uint8_t> mask(static_cast<size_t>(t) * t, 1);
        for (size_t l = 0; l < model.enc_layers.size(); ++l) {
            const auto &layer = model.enc_layers[l];
            std::string where = "enc." + std::to_string(l);
            self_attn_sublayer(model, x, layer.attn, mask, where + ".attn");
            ffn_sublayer(model, x, layer.ffn, where + ".ffn");
        }
        Mat h = layer_norm_rows(x, p.value(model.enc_norm_gain), p.value(model.enc_norm_bias));
        check_finite(h, "enc.final");
        for (int i = 0; i < t; ++i) {
            double *dst = enc.memory.row(pi * paragraphs.len + i);
            const double *src = h.row(i);
            for (int j = 0; j < h.cols; ++j) dst[j] = src[j];
        }
    }
    return enc;
}

CrossCache build_cross_cache(const Model &model, const EncodedFact &enc) {
    CrossCache cache;
    cache.k.reserve(model.dec_layers.size());
    cache.v.reserve(model.dec_layers.size());
    for (const auto &layer : model.dec_layers) {
        Mat k, v;
        matmul(enc.memory, model.params.value(layer.cross_attn.wk), k);
        matmul(enc.memory, model.params.value(layer.cross_attn.wv), v);
        cache.k.push_back(std::move(k));
        cache.v.push_back(std::move(v));
    }
    return cache;
}

namespace {

// Final hidden states for a decoder prefix; cache must be built from the
// same EncodedFact.
Mat decoder_hidden(const Model &model, const EncodedFact &enc, const CrossCache &cache,
                   const std::vector<int> &prefix) {
    if (prefix.empty()) throw DataError("decoder prefix must start with the start token");
    if (static_cast<int>(prefix.size()) > model.cfg.max_output_len)
        throw DataError("decoder prefix length " + std::to_string(prefix.size()) +
                        " exceeds max_output_len " +
                        std::to_string(model.cfg.max_output_len));
    const ParamStore &p = model.params;
    const int t = static_cast<int>(prefix.size());
    Mat y = embed_rows(p.value(model.emb), prefix);
    add_positions_inplace(y, p.value(model.dec_pos), "decoder prefix");

    std::vector<uint8_t> causal(static_cast<size_t>(t) * t, 0);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j <= i; ++j) causal[static_cast<size_t>(i) * t + j] = 1;
    const int mem_rows = enc.memory.rows;
    std::vector<uint8_t> cross(static_cast<size_t>(t) * mem_rows);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < mem_rows; ++j)
            cross[static_cast<size_t>(i) * mem_rows + j] = enc.mask[static_cast<size_t>(j)];

    for (size_t l = 0; l < model.dec_layers.size(); ++l) {
        const auto &layer = model.dec_layers[l];
        std::string where = "dec." + std::to_string(l);
        self_attn_sublayer(model, y, layer.self_attn, causal, where + ".self");
        {
            // Cross-attention with precomputed memory keys/values.
            Mat normed = layer_norm_rows(y, p.value(layer.cross_attn.norm_gain),
                                         p.value(layer.cross_attn.norm_bias));
            Mat q;
            matmul(normed, p.value(layer.cross_attn.wq), q);
            Mat att = attention_rows(q, cache.k[l], cache.v[l], model.cfg.n_heads, cross);
            Mat o;
            matmul(att, p.value(layer.cross_attn.wo), o);
            add_inplace(y, o);
            check_finite(y, where + ".cross");
        }
        ffn_sublayer(model, y, layer.ffn, where + ".ffn");
    }
    return layer_norm_rows(y, p.value(model.dec_norm_gain), p.value(model.dec_norm_bias));
}

std::vector<double> next_token_distribution(const Model &model, const EncodedFact &enc,
                                            const CrossCache &cache,
                                            const std::vector<int> &prefix) {
    Mat h = decoder_hidden(model, enc, cache, prefix);
    const Mat &emb = model.params.value(model.emb);
    const double *last = h.row(h.rows - 1);
    std::vector<double> logits(static_cast<size_t>(emb.rows));
    for (int v = 0; v < emb.rows; ++v) {
        const double *erow = emb.row(v);
        double acc = 0.0;
        for (int j = 0; j < emb.cols; ++j) acc += last[j] * erow[j];
        logits[static_cast<size_t>(v)] = acc;
    }
    double maxv = logits[0];
    for (double v : logits) maxv = std::max(maxv, v);
    if (!std::isfinite(maxv)) throw NumericError("non-finite logits in decoder output");
    double denom = 0.0;
    for (auto &v : logits) {
        v = std::exp(v - maxv);
        denom += v;
    }
    double inv = 1.0 / denom;
    for (auto &v : logits) v *= inv;
    return logits;
}

} // namespace

std::vector<double> decode_step(const Model &model, const EncodedFact &enc,
                                const std::vector<int> &prefix) {
    CrossCache cache = build_cross_cache(model, enc);
    return next_token_distribution(model, enc, cache, prefix);
}

Generated greedy_decode(const Model &model, const EncodedFact &enc, int max_len) {
    if (max_len < 1 || max_len > model.cfg.max_output_len)
        throw ConfigError("greedy_decode max_len must be in [1, max_output_len]");
    CrossCache cache = build_cross_cache(model, enc);
    Generated gen;
    std::vector<int> prefix{Vocab::pad_id};
    for (int step = 0; step < max_len; ++step) {
        std::vector<double> dist = next_token_distribution(model, enc, cache, prefix);
        int best = 0;
        double best_p = dist[0];
        for (size_t v = 1; v < dist.size(); ++v)
            if (dist[v] > best_p) { // strict: ties keep the lowest id
                best_p = dist[v];
                best = static_cast<int>(v);
            }
        gen.logprobs.push_back(std::log(best_p));
        if (best == Vocab::eos_id) return gen;
        gen.ids.push_back(best);
        prefix.push_back(best);
    }
    gen.hit_max_len = true;
    return gen;
}

} // namespace lexchain
