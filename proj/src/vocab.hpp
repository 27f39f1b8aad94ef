#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "labels.hpp"

namespace lexchain {

// Word-level token vocabulary. Ids 0..3 are reserved and never reassigned.
class Vocab {
public:
    static constexpr int pad_id = 0;
    static constexpr int eos_id = 1;
    static constexpr int unk_id = 2;
    static constexpr int sep_id = 3;
    static constexpr int n_reserved = 4;

    Vocab();

    // Deterministic construction: tokens ranked by frequency, ties broken
    // lexicographically, truncated to max_size. `required` tokens (prompt
    // words, label surfaces) are always kept.
    static Vocab build(const std::vector<std::string> &documents, int max_size,
                       const std::vector<std::string> &required);

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string &token(int id) const;
    int id(std::string_view token) const; // unk_id for out-of-vocabulary

    // Whitespace split plus separating the label-sequence delimiters into
    // standalone tokens, so rendered targets stay reversible.
    static std::vector<std::string> tokenize(std::string_view text);

    std::vector<int> encode(std::string_view text) const;
    // Space-joined tokens; reserved markers are emitted literally.
    std::string decode(const std::vector<int> &ids) const;

    void save(const std::string &path) const;
    static Vocab load(const std::string &path);

    // FNV-1a over the token list; stored in checkpoints to detect mismatches.
    uint64_t hash() const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;

    void add(std::string token);
};

// A task prompt d: the semantic cue appended to every encoder input.
struct TaskDescription {
    Task kind;
    std::string prompt;
};

struct PromptSet {
    std::string relationship = "relations";
    std::string circumstances = "circumstances";
    std::string forward = "judge forward";
    std::string backward = "judge backward";

    TaskDescription describe(Task t) const;
    std::array<std::string, 4> all() const;
    void validate() const; // prompts must be pairwise distinct and non-empty
};

// One encoder input, kept in two parts: the fact prefix that gets split
// into paragraphs, and the suffix ([SEP] subject [SEP] priors... [SEP]
// prompt) that is replicated into every paragraph.
struct AssembledInput {
    std::vector<int> fact_ids;
    std::vector<int> suffix_ids;

    // fact [SEP] subject [SEP] prior_1 ... [SEP] prompt
    std::vector<int> full() const;
};

AssembledInput assemble_input(const std::vector<int> &fact_tokens,
                              const std::vector<int> &subject_tokens,
                              const std::vector<std::vector<int>> &prior_outputs,
                              const std::vector<int> &task_tokens);

AssembledInput assemble_input(const Vocab &vocab, std::string_view fact,
                              std::string_view subject,
                              const std::vector<std::string> &prior_outputs,
                              const TaskDescription &task);

} // namespace lexchain
