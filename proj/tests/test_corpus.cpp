#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "corpus.hpp"
#include "errors.hpp"
#include "synthgen.hpp"

using namespace lexchain;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }

    void write(const std::string &content) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << content;
    }
};

std::vector<CaseRecord> sample_cases(int n) {
    GenSpec spec;
    spec.seed = 11;
    LabelSpace space = label_space_for(spec.rules);
    Rng root(spec.seed);
    std::vector<CaseRecord> cases;
    for (int i = 0; i < n; ++i) {
        Rng rng = root.fork(static_cast<uint64_t>(i));
        cases.push_back(generate_case(rng, spec, space, i));
    }
    return cases;
}

} // namespace

TEST_CASE("empty corpus file loads to an empty list") {
    TempFile f("empty_corpus.jsonl");
    f.write("");
    LabelSpace space = label_space_for(default_rule_table());
    CHECK(load_corpus(f.path, space).empty());
}

TEST_CASE("save/load round-trips a three-case corpus") {
    LabelSpace space = label_space_for(default_rule_table());
    std::vector<CaseRecord> cases = sample_cases(3);
    TempFile f("roundtrip_corpus.jsonl");
    save_corpus(cases, f.path, space);
    std::vector<CaseRecord> loaded = load_corpus(f.path, space);
    REQUIRE(loaded.size() == cases.size());
    CHECK(loaded == cases);
}

TEST_CASE("a single-defendant line is a schema error naming the invariant") {
    LabelSpace space = label_space_for(default_rule_table());
    TempFile f("one_defendant.jsonl");
    f.write(R"({"case_id":"c1","fact":"alan stole sealed cargo from the depot .",)"
            R"("defendants":[{"name":"alan","articles":["A101"],"charges":["theft"],)"
            R"("penalty":"P2","relationship":"None","circumstances":[]}]})"
            "\n");
    CHECK_THROWS_WITH_AS(load_corpus(f.path, space),
                         doctest::Contains("defendants.len() >= 2"), DataError);
}

TEST_CASE("schema errors carry line numbers") {
    LabelSpace space = label_space_for(default_rule_table());
    std::vector<CaseRecord> cases = sample_cases(1);
    TempFile f("bad_line.jsonl");
    save_corpus(cases, f.path, space);
    std::ofstream append(f.path, std::ios::binary | std::ios::app);
    append << "{not json}\n";
    append.close();
    CHECK_THROWS_WITH_AS(load_corpus(f.path, space), doctest::Contains(":2:"), DataError);
}

TEST_CASE("duplicate case ids are rejected on save and load") {
    LabelSpace space = label_space_for(default_rule_table());
    std::vector<CaseRecord> cases = sample_cases(1);
    cases.push_back(cases.front());
    TempFile f("dup_cases.jsonl");
    CHECK_THROWS_WITH_AS(save_corpus(cases, f.path, space),
                         doctest::Contains("duplicate"), DataError);
    // Write the duplicate lines directly; load must reject them too.
    save_corpus({cases.front()}, f.path, space);
    std::ifstream in(f.path, std::ios::binary);
    std::string line((std::istreambuf_iterator<char>(in)), {});
    f.write(line + line);
    CHECK_THROWS_WITH_AS(load_corpus(f.path, space), doctest::Contains("duplicate"),
                         DataError);
}

TEST_CASE("defendant names must occur in the fact text") {
    LabelSpace space = label_space_for(default_rule_table());
    std::vector<CaseRecord> cases = sample_cases(1);
    cases.front().defendants.front().name = "ghostwriter";
    TempFile f("ghost.jsonl");
    CHECK_THROWS_AS(save_corpus(cases, f.path, space), DataError);
}

TEST_CASE("unknown label surfaces are schema errors") {
    LabelSpace space = label_space_for(default_rule_table());
    TempFile f("bad_surface.jsonl");
    f.write(R"({"case_id":"c1","fact":"alan and bruno met . alan stole sealed cargo from the depot . bruno stole sealed cargo from the depot .",)"
            R"("defendants":[{"name":"alan","articles":["A999"],"charges":["theft"],)"
            R"("penalty":"P2","relationship":"None","circumstances":[]},)"
            R"({"name":"bruno","articles":["A101"],"charges":["theft"],)"
            R"("penalty":"P2","relationship":"None","circumstances":[]}]})"
            "\n");
    CHECK_THROWS_WITH_AS(load_corpus(f.path, space), doctest::Contains("A999"),
                         DataError);
}

TEST_CASE("case validation rejects malformed records directly") {
    LabelSpace space = label_space_for(default_rule_table());
    std::vector<CaseRecord> cases = sample_cases(1);
    CaseRecord rec = cases.front();
    SUBCASE("empty articles") {
        rec.defendants[0].gold.articles.clear();
        CHECK_THROWS_AS(rec.validate(space), DataError);
    }
    SUBCASE("duplicate defendant names") {
        rec.defendants[1].name = rec.defendants[0].name;
        CHECK_THROWS_AS(rec.validate(space), DataError);
    }
}
