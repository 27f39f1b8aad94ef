#include "runcfg.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "chains.hpp"
#include "errors.hpp"
#include "textutil.hpp"

namespace lexchain {

namespace {

long parse_long(const std::string &key, const std::string &value) {
    try {
        size_t used = 0;
        long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception &) {
        throw ConfigError(key + ": expected an integer, got \"" + value + "\"");
    }
}

int parse_int(const std::string &key, const std::string &value) {
    return static_cast<int>(parse_long(key, value));
}

uint64_t parse_u64(const std::string &key, const std::string &value) {
    try {
        size_t used = 0;
        unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception &) {
        throw ConfigError(key + ": expected an unsigned integer, got \"" + value + "\"");
    }
}

double parse_double(const std::string &key, const std::string &value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception &) {
        throw ConfigError(key + ": expected a number, got \"" + value + "\"");
    }
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

struct Key {
    const char *name;
    std::function<void(RunConfig &, const std::string &)> set;
    std::function<std::string(const RunConfig &)> get;
};

#define INT_KEY(name, field)                                                        \
    Key{name, [](RunConfig &c, const std::string &v) { c.field = parse_int(name, v); }, \
        [](const RunConfig &c) { return std::to_string(c.field); }}
#define LONG_KEY(name, field)                                                        \
    Key{name, [](RunConfig &c, const std::string &v) { c.field = parse_long(name, v); }, \
        [](const RunConfig &c) { return std::to_string(c.field); }}
#define U64_KEY(name, field)                                                        \
    Key{name, [](RunConfig &c, const std::string &v) { c.field = parse_u64(name, v); }, \
        [](const RunConfig &c) { return std::to_string(c.field); }}
#define DBL_KEY(name, field)                                                           \
    Key{name, [](RunConfig &c, const std::string &v) { c.field = parse_double(name, v); }, \
        [](const RunConfig &c) { return fmt_double(c.field); }}
#define STR_KEY(name, field)                                     \
    Key{name, [](RunConfig &c, const std::string &v) { c.field = v; }, \
        [](const RunConfig &c) { return c.field; }}

const std::vector<Key> &key_table() {
    static const std::vector<Key> keys = {
        INT_KEY("model.d_model", model.d_model),
        INT_KEY("model.n_heads", model.n_heads),
        INT_KEY("model.n_enc_layers", model.n_enc_layers),
        INT_KEY("model.n_dec_layers", model.n_dec_layers),
        INT_KEY("model.ffn_dim", model.ffn_dim),
        INT_KEY("model.paragraphs", model.paragraphs),
        INT_KEY("model.paragraph_tokens", model.paragraph_tokens),
        INT_KEY("model.max_output_len", model.max_output_len),
        INT_KEY("model.max_suffix_len", model.max_suffix_len),
        INT_KEY("model.vocab_size", model.vocab_size),
        U64_KEY("model.seed", model.seed),
        DBL_KEY("train.lambda_relationship", train.lambda_relationship),
        DBL_KEY("train.lambda_circumstances", train.lambda_circumstances),
        DBL_KEY("train.lambda_forward", train.lambda_forward),
        DBL_KEY("train.lambda_backward", train.lambda_backward),
        INT_KEY("train.batch_size", train.batch_size),
        INT_KEY("train.grad_accum_steps", train.grad_accum_steps),
        INT_KEY("train.max_epochs", train.max_epochs),
        DBL_KEY("train.warmup_ratio", train.warmup_ratio),
        DBL_KEY("train.peak_lr", train.peak_lr),
        DBL_KEY("train.weight_decay", train.weight_decay),
        DBL_KEY("train.clip_norm", train.clip_norm),
        DBL_KEY("train.adam_beta1", train.adam_beta1),
        DBL_KEY("train.adam_beta2", train.adam_beta2),
        DBL_KEY("train.adam_eps", train.adam_eps),
        U64_KEY("train.seed", train.seed),
        INT_KEY("train.eval_every", train.eval_every),
        INT_KEY("train.val_max_cases", train.val_max_cases),
        U64_KEY("gen.seed", gen.seed),
        LONG_KEY("gen.cases", gen.n_cases),
        DBL_KEY("gen.train_frac", gen.train_frac),
        DBL_KEY("gen.val_frac", gen.val_frac),
        DBL_KEY("gen.assistance_prob", gen.assistance_prob),
        DBL_KEY("gen.label_noise", gen.label_noise),
        STR_KEY("prompt.relationship", prompts.relationship),
        STR_KEY("prompt.circumstances", prompts.circumstances),
        STR_KEY("prompt.forward", prompts.forward),
        STR_KEY("prompt.backward", prompts.backward),
        STR_KEY("ablation", ablation),
    };
    return keys;
}

#undef INT_KEY
#undef LONG_KEY
#undef U64_KEY
#undef DBL_KEY
#undef STR_KEY

const Key *find_key(const std::string &name) {
    for (const auto &k : key_table())
        if (name == k.name) return &k;
    return nullptr;
}

} // namespace

RunConfig::RunConfig() {
    // The run-config default is a small trainable model; the ModelConfig
    // struct default keeps the document-scale paragraph geometry.
    model.vocab_size = 4000;
}

RunConfig RunConfig::from_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path);
    RunConfig cfg;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto text = trim(line);
        if (text.empty()) continue;
        auto eq = text.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value");
        std::string key{trim(text.substr(0, eq))};
        std::string value{trim(text.substr(eq + 1))};
        try {
            cfg.set(key, value);
        } catch (const ConfigError &e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

void RunConfig::set(const std::string &key, const std::string &value) {
    const Key *k = find_key(key);
    if (!k) throw ConfigError("unknown config key \"" + key + "\"");
    k->set(*this, value);
}

std::string RunConfig::get(const std::string &key) const {
    const Key *k = find_key(key);
    if (!k) throw ConfigError("unknown config key \"" + key + "\"");
    return k->get(*this);
}

bool RunConfig::has(const std::string &key) const { return find_key(key) != nullptr; }

std::map<std::string, std::string> RunConfig::snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto &k : key_table()) out[k.name] = k.get(*this);
    return out;
}

void RunConfig::validate() const {
    train.validate();
    prompts.validate();
    (void)variant_from_name(ablation);
    if (model.vocab_size < Vocab::n_reserved + 1)
        throw ConfigError("model.vocab_size too small");
}

} // namespace lexchain
