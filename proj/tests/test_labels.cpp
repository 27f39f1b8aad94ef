#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "errors.hpp"
#include "labels.hpp"
#include "rng.hpp"
#include "synthgen.hpp"

using namespace lexchain;

namespace {

LabelSpace tiny_space() {
    LabelSpace s;
    s.articles = LabelVocab(LabelKind::articles, {"A1", "A2", "A302"});
    s.charges = LabelVocab(LabelKind::charges, {"Assault", "C1"});
    s.penalties = LabelVocab(LabelKind::penalty,
                             {"P0", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8",
                              "P9", "P10"});
    s.relationships = LabelVocab(LabelKind::relationship, {"None", "Assistance"});
    s.circumstances = LabelVocab(
        LabelKind::circumstance,
        {"OldPeople", "DeafMuteOrBlind", "Accessory", "AttemptedCrime", "Surrender",
         "Confession", "MeritoriousService", "Recidivist"});
    return s;
}

JudgmentLabels random_labels(Rng &rng, const LabelSpace &space) {
    JudgmentLabels l;
    int n_art = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n_art; ++i)
        l.articles.push_back(static_cast<int>(rng.below(space.articles.size())));
    int n_chg = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n_chg; ++i)
        l.charges.push_back(static_cast<int>(rng.below(space.charges.size())));
    l.penalty = static_cast<int>(rng.below(space.penalties.size()));
    l.relationship = static_cast<int>(rng.below(2));
    int n_circ = static_cast<int>(rng.below(4));
    for (int i = 0; i < n_circ; ++i)
        l.circumstances.push_back(static_cast<int>(rng.below(space.circumstances.size())));
    l.normalize();
    return l;
}

} // namespace

TEST_CASE("forward rendering joins groups in article|charge|penalty order") {
    LabelSpace s = tiny_space();
    JudgmentLabels l;
    l.articles = {s.articles.id("A302")};
    l.charges = {s.charges.id("Assault")};
    l.penalty = s.penalties.id("P3");
    l.relationship = s.relationships.id("Assistance");
    l.circumstances = {s.circumstances.id("Accessory")};
    CHECK(render_judgment(l, Task::forward_judgment, s) == "A302｜Assault｜P3");
    CHECK(render_judgment(l, Task::backward_judgment, s) == "P3｜Assault｜A302");
}

TEST_CASE("multi-label sets render in vocab order") {
    LabelSpace s = tiny_space();
    JudgmentLabels l;
    l.articles = {s.articles.id("A1"), s.articles.id("A2")};
    l.charges = {s.charges.id("C1")};
    l.penalty = s.penalties.id("P0");
    CHECK(render_judgment(l, Task::forward_judgment, s) == "A1；A2｜C1｜P0");
}

TEST_CASE("parse inverts render for the single-label case") {
    LabelSpace s = tiny_space();
    LabelFragment f = parse_label_sequence("A302｜Assault｜P3", Task::forward_judgment, s);
    CHECK_FALSE(f.malformed);
    CHECK(f.articles == std::vector<int>{s.articles.id("A302")});
    CHECK(f.charges == std::vector<int>{s.charges.id("Assault")});
    CHECK(f.penalty == s.penalties.id("P3"));
}

TEST_CASE("parse tolerates detokenized spacing") {
    LabelSpace s = tiny_space();
    LabelFragment f =
        parse_label_sequence("A1 ； A2 ｜ C1 ｜ P0", Task::forward_judgment, s);
    CHECK_FALSE(f.malformed);
    CHECK(f.articles.size() == 2);
}

TEST_CASE("garbage relationship text parses to an empty malformed fragment") {
    LabelSpace s = tiny_space();
    LabelFragment f = parse_label_sequence("garbage", Task::relationship, s);
    CHECK(f.malformed);
    CHECK(f.relationships.empty());
}

TEST_CASE("malformed judgment variants keep what they can") {
    LabelSpace s = tiny_space();
    SUBCASE("unknown tokens are dropped") {
        LabelFragment f =
            parse_label_sequence("A1；ZZZ｜C1｜P0", Task::forward_judgment, s);
        CHECK(f.malformed);
        CHECK(f.articles == std::vector<int>{s.articles.id("A1")});
    }
    SUBCASE("missing groups yield empty fragments") {
        LabelFragment f = parse_label_sequence("A1｜C1", Task::forward_judgment, s);
        CHECK(f.malformed);
        CHECK_FALSE(f.penalty.has_value());
    }
    SUBCASE("duplicate items are deduplicated but flagged") {
        LabelFragment f =
            parse_label_sequence("A1；A1｜C1｜P0", Task::forward_judgment, s);
        CHECK(f.malformed);
        CHECK(f.articles.size() == 1);
    }
    SUBCASE("multiple penalties keep the first") {
        LabelFragment f =
            parse_label_sequence("A1｜C1｜P0；P3", Task::forward_judgment, s);
        CHECK(f.malformed);
        CHECK(f.penalty == s.penalties.id("P0"));
    }
}

TEST_CASE("empty circumstance set round-trips as empty text") {
    LabelSpace s = tiny_space();
    CHECK(render_circumstance_set({}, s) == "");
    LabelFragment f = parse_label_sequence("", Task::circumstances, s);
    CHECK_FALSE(f.malformed);
    CHECK(f.circumstances.empty());
}

TEST_CASE("relationship clauses preserve case order and parse back") {
    LabelSpace s = tiny_space();
    CaseRecord rec;
    rec.case_id = "c1";
    rec.fact = "zora helped abe";
    DefendantRecord d1;
    d1.name = "zora";
    d1.gold.relationship = s.relationships.id("Assistance");
    DefendantRecord d2;
    d2.name = "abe";
    d2.gold.relationship = s.relationships.id("None");
    rec.defendants = {d1, d2};
    std::string text = render_case_relationships(rec, s);
    CHECK(text == "zora:Assistance；abe:None");
    LabelFragment f = parse_label_sequence(text, Task::relationship, s);
    CHECK_FALSE(f.malformed);
    CHECK(f.relationship_of("zora") == s.relationships.id("Assistance"));
    CHECK(f.relationship_of("abe") == s.relationships.id("None"));
    CHECK_FALSE(f.relationship_of("nobody").has_value());
}

TEST_CASE("unknown label ids are reported by id") {
    LabelSpace s = tiny_space();
    JudgmentLabels l;
    l.articles = {99};
    l.charges = {0};
    l.penalty = 0;
    CHECK_THROWS_WITH_AS(render_judgment(l, Task::forward_judgment, s),
                         doctest::Contains("unknown label id 99"), DataError);
}

TEST_CASE("label vocab maps are mutually inverse and persist") {
    LabelSpace s = label_space_for(default_rule_table());
    for (const LabelVocab *v : {&s.articles, &s.charges, &s.penalties, &s.relationships,
                                &s.circumstances})
        for (int i = 0; i < v->size(); ++i) CHECK(v->id(v->surface(i)) == i);

    std::string path = "labels_roundtrip.vocab";
    s.charges.save(path);
    LabelVocab loaded = LabelVocab::load(LabelKind::charges, path);
    CHECK(loaded.surfaces() == s.charges.surfaces());
    std::remove(path.c_str());
}

TEST_CASE("randomized render/parse round-trip holds for 1000 label sets") {
    LabelSpace s = label_space_for(default_rule_table());
    Rng rng(42);
    for (int it = 0; it < 1000; ++it) {
        JudgmentLabels l = random_labels(rng, s);
        for (Task task : {Task::forward_judgment, Task::backward_judgment}) {
            LabelFragment f = parse_label_sequence(render_judgment(l, task, s), task, s);
            CHECK_FALSE(f.malformed);
            CHECK(f.articles == l.articles);
            CHECK(f.charges == l.charges);
            CHECK(f.penalty == l.penalty);
        }
        LabelFragment fc = parse_label_sequence(
            render_circumstance_set(l.circumstances, s), Task::circumstances, s);
        CHECK_FALSE(fc.malformed);
        CHECK(fc.circumstances == l.circumstances);
    }
}
