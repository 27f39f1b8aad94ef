#include "net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "textutil.hpp"

namespace lexchain {

using json = nlohmann::ordered_json;

void ModelConfig::validate() const {
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
        throw ConfigError("d_model must be a positive multiple of n_heads");
    if (n_enc_layers < 1 || n_dec_layers < 1)
        throw ConfigError("encoder and decoder need at least one layer");
    if (ffn_dim < 1) throw ConfigError("ffn_dim must be >= 1");
    if (paragraphs < 1) throw ConfigError("paragraphs (K) must be >= 1");
    if (paragraph_tokens < 1) throw ConfigError("paragraph_tokens (M) must be >= 1");
    if (max_output_len < 2) throw ConfigError("max_output_len must be >= 2");
    if (max_suffix_len < 2) throw ConfigError("max_suffix_len must be >= 2");
    if (vocab_size < Vocab::n_reserved + 1)
        throw ConfigError("vocab_size must cover the reserved tokens");
}

ModelConfig ModelConfig::desk_preset() {
    ModelConfig c;
    c.d_model = 16;
    c.n_heads = 2;
    c.n_enc_layers = 1;
    c.n_dec_layers = 1;
    c.ffn_dim = 32;
    c.paragraphs = 3;
    c.paragraph_tokens = 32;
    c.max_output_len = 32;
    c.max_suffix_len = 48;
    return c;
}

int ParamStore::add(const std::string &path, int rows, int cols) {
    if (index_.count(path)) throw ConfigError("duplicate parameter path " + path);
    int id = static_cast<int>(entries_.size());
    entries_.push_back({path, Mat(rows, cols)});
    index_.emplace(path, id);
    return id;
}

int ParamStore::find(const std::string &path) const {
    auto it = index_.find(path);
    return it == index_.end() ? -1 : it->second;
}

int ParamStore::find_or_throw(const std::string &path) const {
    int id = find(path);
    if (id < 0) throw ConfigError("unknown parameter path " + path);
    return id;
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const auto &e : entries_) n += e.value.count();
    return n;
}

namespace {

AttnIds add_attn(ParamStore &p, const std::string &prefix, int d) {
    AttnIds ids;
    ids.norm_gain = p.add(prefix + ".norm.gain", 1, d);
    ids.norm_bias = p.add(prefix + ".norm.bias", 1, d);
    ids.wq = p.add(prefix + ".wq", d, d);
    ids.wk = p.add(prefix + ".wk", d, d);
    ids.wv = p.add(prefix + ".wv", d, d);
    ids.wo = p.add(prefix + ".wo", d, d);
    return ids;
}

FfnIds add_ffn(ParamStore &p, const std::string &prefix, int d, int ffn) {
    FfnIds ids;
    ids.norm_gain = p.add(prefix + ".norm.gain", 1, d);
    ids.norm_bias = p.add(prefix + ".norm.bias", 1, d);
    ids.w1 = p.add(prefix + ".w1", d, ffn);
    ids.b1 = p.add(prefix + ".b1", 1, ffn);
    ids.w2 = p.add(prefix + ".w2", ffn, d);
    ids.b2 = p.add(prefix + ".b2", 1, d);
    return ids;
}

} // namespace

Model::Model(ModelConfig config) : cfg(config) {
    cfg.validate();
    const int d = cfg.d_model;
    emb = params.add("embedding", cfg.vocab_size, d);
    enc_pos = params.add("enc.pos", cfg.max_paragraph_len(), d);
    dec_pos = params.add("dec.pos", cfg.max_output_len, d);
    for (int l = 0; l < cfg.n_enc_layers; ++l) {
        std::string prefix = "enc." + std::to_string(l);
        EncLayerIds ids;
        ids.attn = add_attn(params, prefix + ".attn", d);
        ids.ffn = add_ffn(params, prefix + ".ffn", d, cfg.ffn_dim);
        enc_layers.push_back(ids);
    }
    enc_norm_gain = params.add("enc.final.gain", 1, d);
    enc_norm_bias = params.add("enc.final.bias", 1, d);
    for (int l = 0; l < cfg.n_dec_layers; ++l) {
        std::string prefix = "dec." + std::to_string(l);
        DecLayerIds ids;
        ids.self_attn = add_attn(params, prefix + ".self", d);
        ids.cross_attn = add_attn(params, prefix + ".cross", d);
        ids.ffn = add_ffn(params, prefix + ".ffn", d, cfg.ffn_dim);
        dec_layers.push_back(ids);
    }
    dec_norm_gain = params.add("dec.final.gain", 1, d);
    dec_norm_bias = params.add("dec.final.bias", 1, d);
}

void Model::init_weights() {
    Rng rng(cfg.seed);
    // Embedding rows big enough that layer-norm inputs are well away from
    // the variance epsilon, yet small enough that the weight-tied logits
    // start near-uniform; projection weights fan-in scaled.
    constexpr double emb_stddev = 0.3;
    for (auto &entry : params.entries()) {
        const std::string &path = entry.path;
        bool is_gain = path.size() >= 4 && path.compare(path.size() - 4, 4, "gain") == 0;
        bool is_bias = (path.size() >= 4 && path.compare(path.size() - 4, 4, "bias") == 0) ||
                       (path.size() >= 3 && (path.compare(path.size() - 3, 3, ".b1") == 0 ||
                                             path.compare(path.size() - 3, 3, ".b2") == 0));
        if (is_gain) {
            std::fill(entry.value.a.begin(), entry.value.a.end(), 1.0);
        } else if (is_bias) {
            entry.value.set_zero();
        } else if (path == "embedding" || path == "enc.pos" || path == "dec.pos") {
            for (auto &v : entry.value.a) v = rng.normal(0.0, emb_stddev);
        } else {
            double stddev = 1.0 / std::sqrt(static_cast<double>(entry.value.rows));
            for (auto &v : entry.value.a) v = rng.normal(0.0, stddev);
        }
    }
}

namespace {

json config_to_json(const ModelConfig &c) {
    json j;
    j["d_model"] = c.d_model;
    j["n_heads"] = c.n_heads;
    j["n_enc_layers"] = c.n_enc_layers;
    j["n_dec_layers"] = c.n_dec_layers;
    j["ffn_dim"] = c.ffn_dim;
    j["paragraphs"] = c.paragraphs;
    j["paragraph_tokens"] = c.paragraph_tokens;
    j["max_output_len"] = c.max_output_len;
    j["max_suffix_len"] = c.max_suffix_len;
    j["vocab_size"] = c.vocab_size;
    j["seed"] = c.seed;
    return j;
}

ModelConfig config_from_json(const json &j) {
    ModelConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_enc_layers = j.at("n_enc_layers").get<int>();
    c.n_dec_layers = j.at("n_dec_layers").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.paragraphs = j.at("paragraphs").get<int>();
    c.paragraph_tokens = j.at("paragraph_tokens").get<int>();
    c.max_output_len = j.at("max_output_len").get<int>();
    c.max_suffix_len = j.at("max_suffix_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
}

constexpr char kMagic[8] = {'L', 'E', 'X', 'C', 'K', 'P', 'T', '1'};

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t parse_hex64(const std::string &s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

} // namespace

void save_checkpoint(const Model &model, const CheckpointMeta &meta,
                     const std::string &path) {
    json header;
    header["format"] = 1;
    header["config"] = config_to_json(model.cfg);
    header["vocab_hash"] = hex64(meta.vocab_hash);
    header["label_hash"] = hex64(meta.label_hash);
    header["ablation"] = meta.ablation;
    header["prompts"] = {{"relationship", meta.prompts.relationship},
                         {"circumstances", meta.prompts.circumstances},
                         {"forward", meta.prompts.forward},
                         {"backward", meta.prompts.backward}};
    json plist = json::array();
    for (const auto &e : model.params.entries()) {
        json p;
        p["path"] = e.path;
        p["rows"] = e.value.rows;
        p["cols"] = e.value.cols;
        plist.push_back(std::move(p));
    }
    header["params"] = std::move(plist);
    std::string header_str = header.dump();

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp);
        out.write(kMagic, sizeof kMagic);
        uint32_t hlen = static_cast<uint32_t>(header_str.size());
        out.write(reinterpret_cast<const char *>(&hlen), sizeof hlen);
        out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
        std::vector<float> buf;
        for (const auto &e : model.params.entries()) {
            buf.resize(e.value.count());
            for (size_t i = 0; i < buf.size(); ++i)
                buf[i] = static_cast<float>(e.value.a[i]);
            out.write(reinterpret_cast<const char *>(buf.data()),
                      static_cast<std::streamsize>(buf.size() * sizeof(float)));
        }
        if (!out) throw IoError("write failed for checkpoint " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot finalize checkpoint " + path + ": " + ec.message());
}

Model load_checkpoint(const std::string &path, CheckpointMeta &meta_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError(path + ": not a lexchain checkpoint");
    uint32_t hlen = 0;
    in.read(reinterpret_cast<char *>(&hlen), sizeof hlen);
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), hlen);
    if (!in) throw DataError(path + ": truncated checkpoint header");
    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception &e) {
        throw DataError(path + ": bad checkpoint header: " + e.what());
    }
    if (header.at("format").get<int>() != 1)
        throw DataError(path + ": unsupported checkpoint format");

    Model model(config_from_json(header.at("config")));
    meta_out.vocab_hash = parse_hex64(header.at("vocab_hash").get<std::string>());
    meta_out.label_hash = parse_hex64(header.at("label_hash").get<std::string>());
    meta_out.ablation = header.at("ablation").get<std::string>();
    const auto &prompts = header.at("prompts");
    meta_out.prompts.relationship = prompts.at("relationship").get<std::string>();
    meta_out.prompts.circumstances = prompts.at("circumstances").get<std::string>();
    meta_out.prompts.forward = prompts.at("forward").get<std::string>();
    meta_out.prompts.backward = prompts.at("backward").get<std::string>();

    const auto &plist = header.at("params");
    if (plist.size() != model.params.entries().size())
        throw DataError(path + ": parameter count mismatch");
    std::vector<float> buf;
    for (size_t i = 0; i < plist.size(); ++i) {
        const auto &p = plist[i];
        auto &entry = model.params.entries()[i];
        if (p.at("path").get<std::string>() != entry.path ||
            p.at("rows").get<int>() != entry.value.rows ||
            p.at("cols").get<int>() != entry.value.cols)
            throw DataError(path + ": parameter layout mismatch at " + entry.path);
        buf.resize(entry.value.count());
        in.read(reinterpret_cast<char *>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw DataError(path + ": truncated parameter data at " + entry.path);
        for (size_t t = 0; t < buf.size(); ++t) entry.value.a[t] = buf[t];
    }
    return model;
}

} // namespace lexchain
