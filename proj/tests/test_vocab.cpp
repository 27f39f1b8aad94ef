#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "errors.hpp"
#include "rng.hpp"
#include "vocab.hpp"

using namespace lexchain;

TEST_CASE("vocab ranks by frequency with lexicographic tie-break") {
    Vocab v = Vocab::build({"a b", "b c"}, 10, {});
    CHECK(v.id("b") == Vocab::n_reserved);     // frequency 2 comes first
    CHECK(v.id("a") == Vocab::n_reserved + 1); // then ties in lexicographic order
    CHECK(v.id("c") == Vocab::n_reserved + 2);
    CHECK(v.size() == 7);
}

TEST_CASE("vocab construction is deterministic and persists byte-identically") {
    std::vector<std::string> docs = {"x y z y", "w w q", "z z z"};
    Vocab a = Vocab::build(docs, 64, {"prompt words"});
    Vocab b = Vocab::build(docs, 64, {"prompt words"});
    a.save("vocab_a.txt");
    b.save("vocab_b.txt");
    std::ifstream fa("vocab_a.txt", std::ios::binary), fb("vocab_b.txt", std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(fa)), {});
    std::string cb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(ca == cb);
    Vocab loaded = Vocab::load("vocab_a.txt");
    CHECK(loaded.hash() == a.hash());
    std::remove("vocab_a.txt");
    std::remove("vocab_b.txt");
}

TEST_CASE("capped vocab maps rare words to [UNK]") {
    Vocab v = Vocab::build({"common common common rare"}, Vocab::n_reserved + 1, {});
    CHECK(v.id("common") == Vocab::n_reserved);
    CHECK(v.id("rare") == Vocab::unk_id);
}

TEST_CASE("required tokens survive the cap and never encode to [UNK]") {
    Vocab v = Vocab::build({"filler filler filler"}, Vocab::n_reserved + 3,
                           {"judge forward"});
    for (int id : v.encode("judge forward")) CHECK(id != Vocab::unk_id);
}

TEST_CASE("a cap below the reserved+required floor is a config error") {
    CHECK_THROWS_AS(Vocab::build({"a"}, 4, {"one two three"}), ConfigError);
}

TEST_CASE("label-sequence delimiters tokenize standalone") {
    auto toks = Vocab::tokenize("A302｜Assault｜P3 alan:None；bob:None");
    std::vector<std::string> expect = {"A302", "｜", "Assault", "｜",  "P3",  "alan",
                                       ":",    "None", "；",     "bob", ":", "None"};
    CHECK(toks == expect);
}

TEST_CASE("encode/decode round-trips in-vocab text") {
    Vocab v = Vocab::build({"alpha beta gamma ： x"}, 32, {"A302｜Assault"});
    std::string text = "alpha beta A302 ｜ Assault";
    CHECK(v.decode(v.encode(text)) == text);
}

TEST_CASE("assemble_input separates fields with single [SEP]s, no trailing") {
    std::vector<int> fact = {10, 11, 12};
    std::vector<int> subject = {20};
    std::vector<int> prompt = {30, 31};

    SUBCASE("no priors") {
        AssembledInput a = assemble_input(fact, subject, {}, prompt);
        std::vector<int> expect = {10, 11, 12, Vocab::sep_id, 20, Vocab::sep_id, 30, 31};
        CHECK(a.full() == expect);
        CHECK(a.fact_ids == fact);
    }
    SUBCASE("priors are [SEP]-separated in order") {
        std::vector<int> prior1 = {40, 41}, prior2 = {50};
        AssembledInput a = assemble_input(fact, subject, {prior1, prior2}, prompt);
        std::vector<int> expect = {10, 11, 12, Vocab::sep_id, 20, Vocab::sep_id, 40, 41,
                                   Vocab::sep_id, 50, Vocab::sep_id, 30, 31};
        CHECK(a.full() == expect);
    }
    SUBCASE("adding a prior grows the input by len(prior)+1") {
        AssembledInput bare = assemble_input(fact, subject, {}, prompt);
        std::vector<int> prior = {40, 41, 42};
        AssembledInput with = assemble_input(fact, subject, {prior}, prompt);
        CHECK(with.full().size() == bare.full().size() + prior.size() + 1);
    }
}

TEST_CASE("assembled inputs are injective over field tuples") {
    // Fields contain no [SEP]; random splits of the same token stream into
    // different field tuples must produce different assembled sequences.
    Rng rng(7);
    for (int it = 0; it < 200; ++it) {
        std::vector<int> tokens(8);
        for (auto &t : tokens) t = 4 + static_cast<int>(rng.below(20));
        size_t cut_a = 1 + rng.below(6);
        size_t cut_b = 1 + rng.below(6);
        if (cut_a == cut_b) continue;
        std::vector<int> fact_a(tokens.begin(), tokens.begin() + static_cast<long>(cut_a));
        std::vector<int> subj_a(tokens.begin() + static_cast<long>(cut_a), tokens.end());
        std::vector<int> fact_b(tokens.begin(), tokens.begin() + static_cast<long>(cut_b));
        std::vector<int> subj_b(tokens.begin() + static_cast<long>(cut_b), tokens.end());
        AssembledInput a = assemble_input(fact_a, subj_a, {}, {99});
        AssembledInput b = assemble_input(fact_b, subj_b, {}, {99});
        CHECK(a.full() != b.full());
    }
}

TEST_CASE("task prompts must be pairwise distinct") {
    PromptSet prompts;
    prompts.backward = prompts.forward;
    CHECK_THROWS_AS(prompts.validate(), ConfigError);
    PromptSet ok;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.describe(Task::relationship).prompt == ok.relationship);
}
