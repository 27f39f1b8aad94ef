#include "vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "errors.hpp"
#include "textutil.hpp"

namespace lexchain {

namespace {
constexpr std::string_view kReserved[] = {"[PAD]", "[EOS]", "[UNK]", "[SEP]"};
} // namespace

Vocab::Vocab() {
    for (auto r : kReserved) add(std::string(r));
}

void Vocab::add(std::string token) {
    int id = static_cast<int>(tokens_.size());
    index_.emplace(token, id);
    tokens_.push_back(std::move(token));
}

Vocab Vocab::build(const std::vector<std::string> &documents, int max_size,
                   const std::vector<std::string> &required) {
    std::map<std::string, long> freq; // ordered map gives the lexicographic tie-break
    for (const auto &doc : documents)
        for (auto &tok : tokenize(doc)) ++freq[tok];
    std::set<std::string> req;
    for (const auto &r : required)
        for (auto &tok : tokenize(r)) {
            req.insert(tok);
            freq.emplace(tok, 0);
        }
    if (n_reserved + static_cast<long>(req.size()) > max_size)
        throw ConfigError("vocab max_size " + std::to_string(max_size) +
                          " cannot hold the " +
                          std::to_string(n_reserved + req.size()) +
                          " reserved and required tokens");

    std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto &a, const auto &b) { return a.second > b.second; });
    Vocab v;
    long req_left = static_cast<long>(req.size());
    for (const auto &[tok, n] : ranked) {
        bool is_req = req.count(tok) > 0;
        if (v.index_.count(tok)) {
            if (is_req) --req_left;
            continue;
        }
        if (!is_req && v.size() + req_left >= max_size) continue;
        v.add(tok);
        if (is_req) --req_left;
        if (v.size() >= max_size) break;
    }
    return v;
}

const std::string &Vocab::token(int id) const {
    if (id < 0 || id >= size())
        throw DataError("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<size_t>(id)];
}

int Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk_id : it->second;
}

std::vector<std::string> Vocab::tokenize(std::string_view text) {
    static const std::string_view delims[] = {kGroupDelim, kItemDelim, kClauseDelim};
    std::vector<std::string> out;
    for (const auto &word : split_whitespace(text)) {
        std::string_view rest = word;
        while (!rest.empty()) {
            size_t best_pos = std::string_view::npos;
            size_t best_len = 0;
            for (auto d : delims) {
                size_t pos = rest.find(d);
                if (pos != std::string_view::npos &&
                    (best_pos == std::string_view::npos || pos < best_pos)) {
                    best_pos = pos;
                    best_len = d.size();
                }
            }
            if (best_pos == std::string_view::npos) {
                out.emplace_back(rest);
                break;
            }
            if (best_pos > 0) out.emplace_back(rest.substr(0, best_pos));
            out.emplace_back(rest.substr(best_pos, best_len));
            rest = rest.substr(best_pos + best_len);
        }
    }
    return out;
}

std::vector<int> Vocab::encode(std::string_view text) const {
    std::vector<int> ids;
    for (auto &tok : tokenize(text)) ids.push_back(id(tok));
    return ids;
}

std::string Vocab::decode(const std::vector<int> &ids) const {
    std::vector<std::string> toks;
    toks.reserve(ids.size());
    for (int id : ids) toks.push_back(token(id));
    return join(toks, " ");
}

void Vocab::save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocab file " + path);
    for (const auto &tok : tokens_) out << tok << '\n';
}

Vocab Vocab::load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read vocab file " + path);
    Vocab v;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no < n_reserved) {
            if (line != kReserved[line_no])
                throw DataError(path + ": reserved token row " + std::to_string(line_no) +
                                " must be " + std::string(kReserved[line_no]));
        } else {
            if (v.index_.count(line)) throw DataError(path + ": duplicate token " + line);
            v.add(line);
        }
        ++line_no;
    }
    if (line_no < n_reserved) throw DataError(path + ": vocab file truncated");
    return v;
}

uint64_t Vocab::hash() const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto &tok : tokens_) {
        for (char c : tok) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= '\n';
        h *= 1099511628211ULL;
    }
    return h;
}

TaskDescription PromptSet::describe(Task t) const {
    switch (t) {
    case Task::relationship: return {t, relationship};
    case Task::circumstances: return {t, circumstances};
    case Task::forward_judgment: return {t, forward};
    case Task::backward_judgment: return {t, backward};
    }
    throw ConfigError("unknown task");
}

std::array<std::string, 4> PromptSet::all() const {
    return {relationship, circumstances, forward, backward};
}

void PromptSet::validate() const {
    auto prompts = all();
    for (size_t i = 0; i < prompts.size(); ++i) {
        if (trim(prompts[i]).empty()) throw ConfigError("task prompts must be non-empty");
        for (size_t j = i + 1; j < prompts.size(); ++j)
            if (prompts[i] == prompts[j])
                throw ConfigError("task prompts must be pairwise distinct; \"" +
                                  prompts[i] + "\" repeats");
    }
}

std::vector<int> AssembledInput::full() const {
    std::vector<int> ids = fact_ids;
    ids.insert(ids.end(), suffix_ids.begin(), suffix_ids.end());
    return ids;
}

AssembledInput assemble_input(const std::vector<int> &fact_tokens,
                              const std::vector<int> &subject_tokens,
                              const std::vector<std::vector<int>> &prior_outputs,
                              const std::vector<int> &task_tokens) {
    AssembledInput a;
    a.fact_ids = fact_tokens;
    auto append_field = [&a](const std::vector<int> &ids) {
        a.suffix_ids.push_back(Vocab::sep_id);
        a.suffix_ids.insert(a.suffix_ids.end(), ids.begin(), ids.end());
    };
    append_field(subject_tokens);
    for (const auto &prior : prior_outputs) append_field(prior);
    append_field(task_tokens);
    return a;
}

AssembledInput assemble_input(const Vocab &vocab, std::string_view fact,
                              std::string_view subject,
                              const std::vector<std::string> &prior_outputs,
                              const TaskDescription &task) {
    std::vector<std::vector<int>> priors;
    priors.reserve(prior_outputs.size());
    for (const auto &p : prior_outputs) priors.push_back(vocab.encode(p));
    return assemble_input(vocab.encode(fact), vocab.encode(subject), priors,
                          vocab.encode(task.prompt));
}

} // namespace lexchain
