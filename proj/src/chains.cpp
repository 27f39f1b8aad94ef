#include "chains.hpp"

#include <fstream>

#include <json.hpp>

#include "errors.hpp"
#include "textutil.hpp"
#include "threads.hpp"

namespace lexchain {

using json = nlohmann::ordered_json;

const char *variant_name(Variant v) {
    switch (v) {
    case Variant::full: return "full";
    case Variant::no_relationships: return "no-relationships";
    case Variant::no_circumstances: return "no-circumstances";
    case Variant::no_forward: return "no-forward";
    case Variant::no_backward: return "no-backward";
    case Variant::no_chains: return "no-chains";
    }
    return "?";
}

Variant variant_from_name(const std::string &name) {
    for (Variant v : {Variant::full, Variant::no_relationships, Variant::no_circumstances,
                      Variant::no_forward, Variant::no_backward, Variant::no_chains})
        if (name == variant_name(v)) return v;
    throw ConfigError("unknown ablation variant \"" + name + "\"");
}

ChainSettings ChainSettings::for_variant(Variant v) {
    ChainSettings s;
    switch (v) {
    case Variant::full: break;
    case Variant::no_relationships:
        s.train_relationship = false;
        s.feed_relationship = false;
        break;
    case Variant::no_circumstances:
        s.train_circumstances = false;
        s.feed_circumstances = false;
        break;
    case Variant::no_forward: s.run_forward = false; break;
    case Variant::no_backward: s.run_backward = false; break;
    case Variant::no_chains:
        s.feed_relationship = false;
        s.feed_circumstances = false;
        break;
    }
    return s;
}

namespace {

std::string join_names(const CaseRecord &rec) {
    std::vector<std::string> names;
    names.reserve(rec.defendants.size());
    for (const auto &d : rec.defendants) names.push_back(d.name);
    return join(names, " ");
}

// assemble_input with the model's suffix budget enforced: prior sequences
// (which may be arbitrary decoder output at inference) get an equal share
// of whatever the subject and prompt leave over, longer ones truncated.
AssembledInput assemble_budgeted(const Vocab &vocab, int max_suffix_len,
                                 std::string_view fact, std::string_view subject,
                                 const std::vector<std::string> &priors,
                                 const TaskDescription &task) {
    std::vector<int> subject_ids = vocab.encode(subject);
    std::vector<int> prompt_ids = vocab.encode(task.prompt);
    std::vector<std::vector<int>> prior_ids;
    prior_ids.reserve(priors.size());
    for (const auto &p : priors) prior_ids.push_back(vocab.encode(p));

    long fixed = 2 + static_cast<long>(subject_ids.size()) +
                 static_cast<long>(prompt_ids.size()) +
                 static_cast<long>(prior_ids.size());
    long budget = max_suffix_len - fixed;
    if (budget < 0)
        throw ConfigError("subject and prompt need " + std::to_string(fixed) +
                          " suffix tokens but max_suffix_len is " +
                          std::to_string(max_suffix_len));
    if (!prior_ids.empty()) {
        size_t share = static_cast<size_t>(budget) / prior_ids.size();
        for (auto &ids : prior_ids)
            if (ids.size() > share) ids.resize(share);
    }
    return assemble_input(vocab.encode(fact), subject_ids, prior_ids, prompt_ids);
}

SeqExample make_example(const Vocab &vocab, int max_suffix_len, const CaseRecord &rec,
                        Task task, std::string_view subject,
                        const std::vector<std::string> &priors, const PromptSet &prompts,
                        std::string_view target, std::string_view defendant) {
    AssembledInput in = assemble_budgeted(vocab, max_suffix_len, rec.fact, subject,
                                          priors, prompts.describe(task));
    SeqExample ex;
    ex.task = task;
    ex.example_id = rec.case_id + "/" + std::string(defendant.empty() ? "*" : defendant) +
                    "/" + task_name(task);
    ex.fact_ids = std::move(in.fact_ids);
    ex.suffix_ids = std::move(in.suffix_ids);
    ex.target_ids = vocab.encode(target);
    return ex;
}

} // namespace

std::vector<SeqExample> build_training_examples(const CaseRecord &rec,
                                                const Vocab &vocab,
                                                const LabelSpace &space,
                                                const PromptSet &prompts,
                                                const ChainSettings &settings,
                                                int max_suffix_len) {
    std::vector<SeqExample> out;
    std::string gold_rel = render_case_relationships(rec, space);
    if (settings.train_relationship)
        out.push_back(make_example(vocab, max_suffix_len, rec, Task::relationship,
                                   join_names(rec), {}, prompts, gold_rel, {}));
    for (const auto &def : rec.defendants) {
        std::string gold_circ = render_circumstance_set(def.gold.circumstances, space);
        if (settings.train_circumstances) {
            std::vector<std::string> priors;
            if (settings.feed_relationship) priors.push_back(gold_rel);
            out.push_back(make_example(vocab, max_suffix_len, rec, Task::circumstances,
                                       def.name, priors, prompts, gold_circ, def.name));
        }
        std::vector<std::string> judgment_priors;
        if (settings.feed_relationship) judgment_priors.push_back(gold_rel);
        if (settings.feed_circumstances) judgment_priors.push_back(gold_circ);
        if (settings.run_forward)
            out.push_back(make_example(
                vocab, max_suffix_len, rec, Task::forward_judgment, def.name,
                judgment_priors, prompts,
                render_judgment(def.gold, Task::forward_judgment, space), def.name));
        if (settings.run_backward)
            out.push_back(make_example(
                vocab, max_suffix_len, rec, Task::backward_judgment, def.name,
                judgment_priors, prompts,
                render_judgment(def.gold, Task::backward_judgment, space), def.name));
    }
    return out;
}

namespace {

struct GenOutcome {
    std::string text;
    double confidence = 0.0;
};

GenOutcome generate(const ChainContext &ctx, const CaseRecord &rec,
                    std::string_view subject, const std::vector<std::string> &priors,
                    Task task, long &generations) {
    AssembledInput in =
        assemble_budgeted(ctx.vocab, ctx.model.cfg.max_suffix_len, rec.fact, subject,
                          priors, ctx.prompts.describe(task));
    Paragraphs paragraphs = build_paragraphs(in.fact_ids, in.suffix_ids,
                                             ctx.model.cfg.paragraphs,
                                             ctx.model.cfg.paragraph_tokens);
    EncodedFact enc = encode(ctx.model, paragraphs);
    Generated gen = greedy_decode(ctx.model, enc, ctx.model.cfg.max_output_len);
    ++generations;
    GenOutcome out;
    out.text = ctx.vocab.decode(gen.ids);
    out.confidence = gen.mean_logprob();
    return out;
}

} // namespace

CaseChains run_first_level(const ChainContext &ctx, const CaseRecord &rec,
                           bool gold_intermediates) {
    CaseChains chains;
    chains.case_id = rec.case_id;
    const ChainSettings &s = ctx.settings;

    if (s.train_relationship) {
        GenOutcome rel = generate(ctx, rec, join_names(rec), {}, Task::relationship,
                                  chains.generations);
        chains.relationship_text = rel.text;
        chains.relationship_parse =
            parse_label_sequence(rel.text, Task::relationship, ctx.space);
    }
    // The relationship sequence seen by downstream inputs: predicted, or
    // gold when mirroring gold-annotation evaluation.
    std::string rel_for_input = gold_intermediates
                                    ? render_case_relationships(rec, ctx.space)
                                    : chains.relationship_text;

    for (const auto &def : rec.defendants) {
        DefendantChains dc;
        dc.name = def.name;
        if (s.train_circumstances) {
            std::vector<std::string> priors;
            if (s.feed_relationship) priors.push_back(rel_for_input);
            GenOutcome circ = generate(ctx, rec, def.name, priors, Task::circumstances,
                                       chains.generations);
            dc.circumstances_text = circ.text;
            dc.circumstances_parse =
                parse_label_sequence(circ.text, Task::circumstances, ctx.space);
        }
        chains.defendants.push_back(std::move(dc));
    }
    return chains;
}

std::string select_chain(const std::optional<double> &forward_confidence,
                         const std::optional<double> &backward_confidence) {
    if (forward_confidence && backward_confidence)
        return *backward_confidence > *forward_confidence ? "backward" : "forward";
    if (backward_confidence) return "backward";
    return "forward";
}

void run_second_level(const ChainContext &ctx, const CaseRecord &rec,
                      const DefendantRecord &def, CaseChains &chains,
                      DefendantChains &out, bool gold_intermediates) {
    const ChainSettings &s = ctx.settings;
    std::vector<std::string> priors;
    if (s.feed_relationship)
        priors.push_back(gold_intermediates ? render_case_relationships(rec, ctx.space)
                                            : chains.relationship_text);
    if (s.feed_circumstances)
        priors.push_back(gold_intermediates
                             ? render_circumstance_set(def.gold.circumstances, ctx.space)
                             : out.circumstances_text);

    if (s.run_forward) {
        GenOutcome fwd = generate(ctx, rec, def.name, priors, Task::forward_judgment,
                                  chains.generations);
        out.forward_text = fwd.text;
        out.forward_confidence = fwd.confidence;
        out.forward_parse =
            parse_label_sequence(fwd.text, Task::forward_judgment, ctx.space);
    }
    if (s.run_backward) {
        GenOutcome bwd = generate(ctx, rec, def.name, priors, Task::backward_judgment,
                                  chains.generations);
        out.backward_text = bwd.text;
        out.backward_confidence = bwd.confidence;
        out.backward_parse =
            parse_label_sequence(bwd.text, Task::backward_judgment, ctx.space);
    }
    out.selected = select_chain(out.forward_confidence, out.backward_confidence);
}

CaseChains run_case(const ChainContext &ctx, const CaseRecord &rec,
                    bool gold_intermediates) {
    CaseChains chains = run_first_level(ctx, rec, gold_intermediates);
    for (size_t i = 0; i < rec.defendants.size(); ++i)
        run_second_level(ctx, rec, rec.defendants[i], chains, chains.defendants[i],
                         gold_intermediates);
    return chains;
}

EvalResult evaluate_cases(const ChainContext &ctx, const std::vector<CaseRecord> &cases,
                          bool gold_intermediates, int n_threads) {
    std::vector<CaseChains> predictions(cases.size());
    parallel_slices(cases.size(), n_threads, [&](int, size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            predictions[i] = run_case(ctx, cases[i], gold_intermediates);
    });

    std::vector<std::vector<int>> art_pred, art_gold, chg_pred, chg_gold;
    std::vector<std::vector<int>> rel_pred, rel_gold, circ_pred, circ_gold;
    std::vector<std::optional<int>> pen_pred;
    std::vector<int> pen_gold;
    for (size_t i = 0; i < cases.size(); ++i) {
        const CaseRecord &rec = cases[i];
        const CaseChains &chains = predictions[i];
        for (size_t d = 0; d < rec.defendants.size(); ++d) {
            const DefendantRecord &def = rec.defendants[d];
            const DefendantChains &dc = chains.defendants[d];
            const LabelFragment &judgment = dc.selected_judgment();
            art_pred.push_back(judgment.articles);
            art_gold.push_back(def.gold.articles);
            chg_pred.push_back(judgment.charges);
            chg_gold.push_back(def.gold.charges);
            pen_pred.push_back(judgment.penalty);
            pen_gold.push_back(def.gold.penalty);
            if (ctx.settings.train_relationship) {
                auto rel = chains.relationship_parse.relationship_of(def.name);
                rel_pred.push_back(rel ? std::vector<int>{*rel} : std::vector<int>{});
                rel_gold.push_back({def.gold.relationship});
            }
            if (ctx.settings.train_circumstances) {
                circ_pred.push_back(dc.circumstances_parse.circumstances);
                circ_gold.push_back(def.gold.circumstances);
            }
        }
    }

    EvalResult result;
    result.report.tasks["articles"] = compute_set_metrics(art_pred, art_gold);
    result.report.tasks["charges"] = compute_set_metrics(chg_pred, chg_gold);
    result.report.tasks["penalty"] = compute_class_metrics(pen_pred, pen_gold);
    if (ctx.settings.train_relationship)
        result.report.tasks["relationship"] = compute_set_metrics(rel_pred, rel_gold);
    if (ctx.settings.train_circumstances)
        result.report.tasks["circumstances"] = compute_set_metrics(circ_pred, circ_gold);
    result.predictions = std::move(predictions);
    return result;
}

void save_predictions(const std::vector<CaseChains> &predictions,
                      const LabelSpace &space, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write predictions " + path);
    for (const auto &chains : predictions) {
        for (const auto &dc : chains.defendants) {
            const LabelFragment &judgment = dc.selected_judgment();
            json j;
            j["case_id"] = chains.case_id;
            j["defendant"] = dc.name;
            j["relationship_text"] = chains.relationship_text;
            j["circumstances_text"] = dc.circumstances_text;
            j["forward_text"] = dc.forward_text;
            j["backward_text"] = dc.backward_text;
            j["forward_confidence"] =
                dc.forward_confidence ? json(*dc.forward_confidence) : json(nullptr);
            j["backward_confidence"] =
                dc.backward_confidence ? json(*dc.backward_confidence) : json(nullptr);
            j["selected"] = dc.selected;
            j["malformed"] = {{"relationship", chains.relationship_parse.malformed},
                              {"circumstances", dc.circumstances_parse.malformed},
                              {"forward", dc.forward_parse.malformed},
                              {"backward", dc.backward_parse.malformed}};
            json jj;
            json arts = json::array(), chgs = json::array();
            for (int id : judgment.articles) arts.push_back(space.articles.surface(id));
            for (int id : judgment.charges) chgs.push_back(space.charges.surface(id));
            jj["articles"] = std::move(arts);
            jj["charges"] = std::move(chgs);
            jj["penalty"] =
                judgment.penalty ? json(space.penalties.surface(*judgment.penalty)) : json(nullptr);
            j["judgment"] = std::move(jj);
            j["case_generations"] = chains.generations;
            out << j.dump() << '\n';
        }
    }
    if (!out) throw IoError("write failed for predictions " + path);
}

} // namespace lexchain
