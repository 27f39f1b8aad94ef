#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "chains.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "synthgen.hpp"

using namespace lexchain;

namespace {

struct Fixture {
    SynthCorpus corpus;
    Vocab vocab;
    PromptSet prompts;
    Model model;

    static Fixture make() {
        GenSpec spec;
        spec.seed = 31;
        spec.n_cases = 12;
        SynthCorpus corpus = generate_corpus(spec);
        std::vector<std::string> docs;
        for (const auto &rec : corpus.train) {
            docs.push_back(rec.fact);
            docs.push_back(render_case_relationships(rec, corpus.space));
            for (const auto &d : rec.defendants) {
                docs.push_back(d.name);
                docs.push_back(render_judgment(d.gold, Task::forward_judgment,
                                               corpus.space));
                docs.push_back(
                    render_circumstance_set(d.gold.circumstances, corpus.space));
            }
        }
        PromptSet prompts;
        auto prompt_list = prompts.all();
        std::vector<std::string> required(prompt_list.begin(), prompt_list.end());
        for (const auto *v :
             {&corpus.space.articles, &corpus.space.charges, &corpus.space.penalties,
              &corpus.space.relationships, &corpus.space.circumstances})
            for (const auto &s : v->surfaces()) required.push_back(s);
        Vocab vocab = Vocab::build(docs, 600, required);

        ModelConfig mc = ModelConfig::desk_preset();
        mc.vocab_size = vocab.size();
        mc.seed = 4;
        Model model(mc);
        model.init_weights();
        return Fixture{std::move(corpus), std::move(vocab), prompts, std::move(model)};
    }

    const CaseRecord &case_with(size_t n_defendants) const {
        for (const auto &rec : corpus.train)
            if (rec.defendants.size() == n_defendants) return rec;
        return corpus.train.front();
    }

    ChainContext ctx(Variant v = Variant::full) const {
        return ChainContext{model, vocab, corpus.space, prompts,
                            ChainSettings::for_variant(v)};
    }
};

} // namespace

TEST_CASE("training example construction follows the chain recipe") {
    Fixture fx = Fixture::make();
    const CaseRecord &rec = fx.case_with(3);
    REQUIRE(rec.defendants.size() == 3);
    ChainSettings full;
    auto examples =
        build_training_examples(rec, fx.vocab, fx.corpus.space, fx.prompts, full,
                                fx.model.cfg.max_suffix_len);

    SUBCASE("a 3-defendant case yields 1 + 3 + 3 + 3 examples") {
        CHECK(examples.size() == 10);
        long r = 0, s = 0, fwd = 0, bwd = 0;
        for (const auto &ex : examples) switch (ex.task) {
            case Task::relationship: ++r; break;
            case Task::circumstances: ++s; break;
            case Task::forward_judgment: ++fwd; break;
            case Task::backward_judgment: ++bwd; break;
            }
        CHECK(r == 1);
        CHECK(s == 3);
        CHECK(fwd == 3);
        CHECK(bwd == 3);
    }

    SUBCASE("circumstance inputs embed the gold relationship sequence") {
        std::vector<int> gold_rel =
            fx.vocab.encode(render_case_relationships(rec, fx.corpus.space));
        for (const auto &ex : examples) {
            if (ex.task != Task::circumstances) continue;
            auto it = std::search(ex.suffix_ids.begin(), ex.suffix_ids.end(),
                                  gold_rel.begin(), gold_rel.end());
            CHECK(it != ex.suffix_ids.end());
        }
    }

    SUBCASE("forward targets are the canonical forward rendering") {
        for (const auto &ex : examples) {
            if (ex.task != Task::forward_judgment) continue;
            bool matched = false;
            for (const auto &d : rec.defendants) {
                auto target = fx.vocab.encode(
                    render_judgment(d.gold, Task::forward_judgment, fx.corpus.space));
                if (target == ex.target_ids) matched = true;
            }
            CHECK(matched);
        }
    }

    SUBCASE("ablations drop tasks and priors") {
        auto no_rel = build_training_examples(
            rec, fx.vocab, fx.corpus.space, fx.prompts,
            ChainSettings::for_variant(Variant::no_relationships),
            fx.model.cfg.max_suffix_len);
        CHECK(no_rel.size() == 9); // no relationship example
        auto no_fwd =
            build_training_examples(rec, fx.vocab, fx.corpus.space, fx.prompts,
                                    ChainSettings::for_variant(Variant::no_forward),
                                    fx.model.cfg.max_suffix_len);
        CHECK(no_fwd.size() == 7); // 1 + 3 + 3 backward only

        auto full_ex =
            build_training_examples(rec, fx.vocab, fx.corpus.space, fx.prompts, full,
                                fx.model.cfg.max_suffix_len);
        auto no_chain =
            build_training_examples(rec, fx.vocab, fx.corpus.space, fx.prompts,
                                    ChainSettings::for_variant(Variant::no_chains),
                                    fx.model.cfg.max_suffix_len);
        CHECK(no_chain.size() == full_ex.size()); // same tasks, no priors
        size_t full_len = 0, bare_len = 0;
        for (const auto &ex : full_ex) full_len += ex.suffix_ids.size();
        for (const auto &ex : no_chain) bare_len += ex.suffix_ids.size();
        CHECK(bare_len < full_len);
    }
}

TEST_CASE("chain settings map variants onto the right switches") {
    ChainSettings s = ChainSettings::for_variant(Variant::no_circumstances);
    CHECK_FALSE(s.train_circumstances);
    CHECK_FALSE(s.feed_circumstances);
    CHECK(s.train_relationship);
    s = ChainSettings::for_variant(Variant::no_chains);
    CHECK(s.train_relationship);
    CHECK(s.train_circumstances);
    CHECK_FALSE(s.feed_relationship);
    CHECK_FALSE(s.feed_circumstances);
    CHECK(variant_from_name("no-backward") == Variant::no_backward);
    CHECK_THROWS_AS(variant_from_name("bogus"), ConfigError);
}

TEST_CASE("a two-defendant case issues exactly 1 + 3*2 generations") {
    Fixture fx = Fixture::make();
    const CaseRecord &rec = fx.case_with(2);
    REQUIRE(rec.defendants.size() == 2);
    CaseChains chains = run_case(fx.ctx(), rec, false);
    CHECK(chains.generations == 7);
    CHECK(chains.defendants.size() == 2);
    // One shared relationship generation for the whole case.
    CHECK(chains.case_id == rec.case_id);
}

TEST_CASE("ablation variants issue the right generation counts") {
    Fixture fx = Fixture::make();
    const CaseRecord &rec = fx.case_with(2);
    CHECK(run_case(fx.ctx(Variant::no_relationships), rec, false).generations == 6);
    CHECK(run_case(fx.ctx(Variant::no_circumstances), rec, false).generations == 5);
    CHECK(run_case(fx.ctx(Variant::no_forward), rec, false).generations == 5);
    CHECK(run_case(fx.ctx(Variant::no_backward), rec, false).generations == 5);
    CHECK(run_case(fx.ctx(Variant::no_chains), rec, false).generations == 7);
}

TEST_CASE("selection prefers the higher mean log-prob and ties go forward") {
    CHECK(select_chain(-0.1, -0.5) == "forward");
    CHECK(select_chain(-0.5, -0.1) == "backward");
    CHECK(select_chain(-0.3, -0.3) == "forward");
    CHECK(select_chain(std::nullopt, -0.2) == "backward");
    CHECK(select_chain(-0.2, std::nullopt) == "forward");
}

TEST_CASE("single-chain ablations fix the selected side") {
    Fixture fx = Fixture::make();
    const CaseRecord &rec = fx.case_with(2);
    CaseChains no_fwd = run_case(fx.ctx(Variant::no_forward), rec, false);
    for (const auto &d : no_fwd.defendants) CHECK(d.selected == "backward");
    CaseChains no_bwd = run_case(fx.ctx(Variant::no_backward), rec, false);
    for (const auto &d : no_bwd.defendants) CHECK(d.selected == "forward");
}

TEST_CASE("fully malformed chains produce an empty judgment that scores wrong") {
    LabelSpace space = label_space_for(default_rule_table());
    DefendantChains dc;
    dc.forward_text = "nonsense";
    dc.forward_parse = parse_label_sequence("nonsense", Task::forward_judgment, space);
    dc.forward_confidence = -1.0;
    dc.selected = "forward";
    CHECK(dc.forward_parse.malformed);
    const LabelFragment &j = dc.selected_judgment();
    CHECK(j.articles.empty());
    CHECK_FALSE(j.penalty.has_value());
    TaskMetrics m = compute_class_metrics({j.penalty}, {3});
    CHECK(m.accuracy == 0.0);
}

TEST_CASE("gold-intermediate mode still runs every generation") {
    Fixture fx = Fixture::make();
    const CaseRecord &rec = fx.case_with(2);
    CaseChains chains = run_case(fx.ctx(), rec, true);
    CHECK(chains.generations == 7);
}

TEST_CASE("evaluation aligns chains with golds and dumps per-defendant records") {
    Fixture fx = Fixture::make();
    std::vector<CaseRecord> cases = {fx.case_with(2)};
    EvalResult result = evaluate_cases(fx.ctx(), cases, false, 2);
    CHECK(result.report.tasks.count("articles") == 1);
    CHECK(result.report.tasks.count("penalty") == 1);
    CHECK(result.report.tasks.at("articles").n_defendants == 2);

    std::string path = "chains_dump.jsonl";
    save_predictions(result.predictions, fx.corpus.space, path);
    std::ifstream in(path, std::ios::binary);
    std::string line;
    long records = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        CHECK(j.at("case_generations").get<long>() == 7);
        CHECK(j.contains("forward_confidence"));
        CHECK(j.contains("selected"));
        ++records;
    }
    CHECK(records == 2);
    std::remove(path.c_str());
}

TEST_CASE("evaluation is independent of the thread count") {
    Fixture fx = Fixture::make();
    std::vector<CaseRecord> cases(fx.corpus.train.begin(), fx.corpus.train.begin() + 4);
    EvalResult a = evaluate_cases(fx.ctx(), cases, false, 1);
    EvalResult b = evaluate_cases(fx.ctx(), cases, false, 3);
    CHECK(a.report.to_json() == b.report.to_json());
}
