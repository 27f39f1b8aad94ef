#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fid.hpp"
#include "labels.hpp"
#include "metrics.hpp"
#include "vocab.hpp"

namespace lexchain {

// The full chain and the five ablations.
enum class Variant {
    full,
    no_relationships, // relationship task removed everywhere
    no_circumstances, // circumstance task removed everywhere
    no_forward,       // judgment comes from the backward chain only
    no_backward,      // judgment comes from the forward chain only
    no_chains,        // all four tasks, but no intermediate results flow
};

const char *variant_name(Variant v);
Variant variant_from_name(const std::string &name); // throws ConfigError

struct ChainSettings {
    bool train_relationship = true;
    bool train_circumstances = true;
    bool feed_relationship = true;
    bool feed_circumstances = true;
    bool run_forward = true;
    bool run_backward = true;

    static ChainSettings for_variant(Variant v);
};

// Everything needed to run chains against a trained model.
struct ChainContext {
    const Model &model;
    const Vocab &vocab;
    const LabelSpace &space;
    PromptSet prompts;
    ChainSettings settings;
};

// Training example construction. Chain-level teacher forcing: downstream
// inputs embed rendered *gold* intermediate sequences. Priors share the
// suffix budget max_suffix_len with the subject and prompt.
std::vector<SeqExample> build_training_examples(const CaseRecord &rec,
                                                const Vocab &vocab,
                                                const LabelSpace &space,
                                                const PromptSet &prompts,
                                                const ChainSettings &settings,
                                                int max_suffix_len);

struct DefendantChains {
    std::string name;
    std::string circumstances_text;
    LabelFragment circumstances_parse;
    std::string forward_text;
    std::string backward_text;
    std::optional<double> forward_confidence;  // mean per-token log-prob
    std::optional<double> backward_confidence;
    LabelFragment forward_parse;
    LabelFragment backward_parse;
    std::string selected; // "forward" or "backward"

    const LabelFragment &selected_judgment() const {
        return selected == "backward" ? backward_parse : forward_parse;
    }
};

struct CaseChains {
    std::string case_id;
    std::string relationship_text;
    LabelFragment relationship_parse;
    std::vector<DefendantChains> defendants;
    long generations = 0; // decode calls issued for this case
};

// First level: one relationship generation for the whole case, then one
// circumstance generation per defendant (conditioned on the predicted
// relationships).
CaseChains run_first_level(const ChainContext &ctx, const CaseRecord &rec,
                           bool gold_intermediates);

// Second level for one defendant: forward prediction and backward
// verification, conditioned on the first-level outputs.
void run_second_level(const ChainContext &ctx, const CaseRecord &rec,
                      const DefendantRecord &def, CaseChains &chains,
                      DefendantChains &out, bool gold_intermediates);

// Confidence selection between the two chains; ties go forward.
std::string select_chain(const std::optional<double> &forward_confidence,
                         const std::optional<double> &backward_confidence);

// Both levels for every defendant.
CaseChains run_case(const ChainContext &ctx, const CaseRecord &rec,
                    bool gold_intermediates);

struct EvalResult {
    MetricReport report;
    std::vector<CaseChains> predictions;
};

// Chains + metrics over a whole split. Cases may be processed in parallel;
// outputs are stored by case index so results are scheduling-independent.
EvalResult evaluate_cases(const ChainContext &ctx, const std::vector<CaseRecord> &cases,
                          bool gold_intermediates, int n_threads = 1);

// JSONL dump, one line per defendant.
void save_predictions(const std::vector<CaseChains> &predictions,
                      const LabelSpace &space, const std::string &path);

} // namespace lexchain
