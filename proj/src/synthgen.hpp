#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "labels.hpp"
#include "rng.hpp"

namespace lexchain {

// One crime template: the action phrase that appears in fact text and the
// judgment labels it triggers.
struct CrimeRule {
    std::string charge;              // primary charge surface
    std::string phrase;              // action phrase following the name
    std::vector<std::string> articles;
    std::vector<std::string> extra_charges;
    int base_penalty = 0;            // penalty class before circumstance offsets
};

struct CircumstanceRule {
    std::string label;  // circumstance surface
    std::string phrase; // cue phrase following the name
    int offset = 0;     // signed penalty class adjustment
};

// Deterministic map from surface cues to labels, shared by the generator
// and the reconstruction oracle.
struct RuleTable {
    std::vector<CrimeRule> crimes;
    std::vector<CircumstanceRule> circumstances;
    std::string assistance_phrase; // "<name> PHRASE <principal> ..."
    int assistant_penalty_offset = -1;
    int penalty_classes = 11;

    int clamp_penalty(int cls) const;
    // Labels of a principal committing `crime` with the given circumstance
    // ids (indices into `circumstances`).
    JudgmentLabels principal_labels(int crime, const std::vector<int> &circ_ids,
                                    const LabelSpace &space) const;
    // Labels of an assistant helping a principal who committed `crime`.
    JudgmentLabels assistant_labels(int principal_crime, const std::vector<int> &circ_ids,
                                    const LabelSpace &space) const;

    void save(const std::string &path) const;
    static RuleTable load(const std::string &path);
};

RuleTable default_rule_table();
// Label inventories implied by a rule table (22 articles, 23 charges, 11
// penalty classes, 2 relationships, 8 circumstances for the default).
LabelSpace label_space_for(const RuleTable &table);

struct GenSpec {
    uint64_t seed = 7;
    long n_cases = 2000;
    // P(defendant count = 2..7).
    std::vector<double> defendant_count_weights = {0.4940, 0.2141, 0.1122,
                                                   0.0599, 0.0599, 0.0599};
    double assistance_prob = 0.30;
    // P(number of circumstances = 0..3) per defendant.
    std::vector<double> circumstance_count_weights = {0.30, 0.35, 0.25, 0.10};
    double label_noise = 0.0; // probability of a corrupted penalty label
    double train_frac = 0.8;
    double val_frac = 0.1;
    RuleTable rules = default_rule_table();
};

CaseRecord generate_case(Rng &rng, const GenSpec &spec, const LabelSpace &space,
                         long case_index);

struct SynthCorpus {
    std::vector<CaseRecord> train, val, test;
    LabelSpace space;
    RuleTable rules;
    std::vector<std::string> warnings;

    size_t total_cases() const { return train.size() + val.size() + test.size(); }
};

// Deterministic in spec.seed; each case derives its own rng stream, so the
// output is independent of generation order.
SynthCorpus generate_corpus(const GenSpec &spec);

// Rule-based reconstruction of gold labels from surface cues alone. Returns
// one JudgmentLabels per defendant, or nullopt when a cue is missing (only
// possible under label noise or foreign text).
std::optional<std::vector<JudgmentLabels>> reconstruct_labels(
    const std::string &fact, const std::vector<std::string> &names,
    const RuleTable &rules, const LabelSpace &space);

} // namespace lexchain
