#include "synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "errors.hpp"
#include "textutil.hpp"

namespace lexchain {

using json = nlohmann::ordered_json;

int RuleTable::clamp_penalty(int cls) const {
    if (cls < 0) return 0;
    if (cls >= penalty_classes) return penalty_classes - 1;
    return cls;
}

namespace {

JudgmentLabels labels_from(const RuleTable &table, const CrimeRule &crime,
                           const std::vector<int> &circ_ids, int base_shift,
                           int relationship, const LabelSpace &space) {
    JudgmentLabels l;
    for (const auto &a : crime.articles) l.articles.push_back(space.articles.id(a));
    l.charges.push_back(space.charges.id(crime.charge));
    for (const auto &c : crime.extra_charges) l.charges.push_back(space.charges.id(c));
    int penalty = crime.base_penalty + base_shift;
    for (int c : circ_ids) penalty += table.circumstances[static_cast<size_t>(c)].offset;
    l.penalty = table.clamp_penalty(penalty);
    l.relationship = relationship;
    l.circumstances = circ_ids;
    l.normalize();
    return l;
}

} // namespace

JudgmentLabels RuleTable::principal_labels(int crime, const std::vector<int> &circ_ids,
                                           const LabelSpace &space) const {
    return labels_from(*this, crimes.at(static_cast<size_t>(crime)), circ_ids, 0,
                       space.relationships.id("None"), space);
}

JudgmentLabels RuleTable::assistant_labels(int principal_crime,
                                           const std::vector<int> &circ_ids,
                                           const LabelSpace &space) const {
    return labels_from(*this, crimes.at(static_cast<size_t>(principal_crime)), circ_ids,
                       assistant_penalty_offset, space.relationships.id("Assistance"),
                       space);
}

void RuleTable::save(const std::string &path) const {
    json j;
    j["version"] = 1;
    j["penalty_classes"] = penalty_classes;
    j["assistance_phrase"] = assistance_phrase;
    j["assistant_penalty_offset"] = assistant_penalty_offset;
    json crs = json::array();
    for (const auto &c : crimes) {
        json cj;
        cj["charge"] = c.charge;
        cj["phrase"] = c.phrase;
        cj["articles"] = c.articles;
        cj["extra_charges"] = c.extra_charges;
        cj["base_penalty"] = c.base_penalty;
        crs.push_back(std::move(cj));
    }
    j["crimes"] = std::move(crs);
    json cis = json::array();
    for (const auto &c : circumstances) {
        json cj;
        cj["label"] = c.label;
        cj["phrase"] = c.phrase;
        cj["offset"] = c.offset;
        cis.push_back(std::move(cj));
    }
    j["circumstances"] = std::move(cis);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write rule table " + path);
    out << j.dump(2) << '\n';
}

RuleTable RuleTable::load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read rule table " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception &e) {
        throw DataError(path + ": bad rule table: " + e.what());
    }
    RuleTable t;
    t.penalty_classes = j.at("penalty_classes").get<int>();
    t.assistance_phrase = j.at("assistance_phrase").get<std::string>();
    t.assistant_penalty_offset = j.at("assistant_penalty_offset").get<int>();
    for (const auto &cj : j.at("crimes")) {
        CrimeRule c;
        c.charge = cj.at("charge").get<std::string>();
        c.phrase = cj.at("phrase").get<std::string>();
        c.articles = cj.at("articles").get<std::vector<std::string>>();
        c.extra_charges = cj.at("extra_charges").get<std::vector<std::string>>();
        c.base_penalty = cj.at("base_penalty").get<int>();
        t.crimes.push_back(std::move(c));
    }
    for (const auto &cj : j.at("circumstances")) {
        CircumstanceRule c;
        c.label = cj.at("label").get<std::string>();
        c.phrase = cj.at("phrase").get<std::string>();
        c.offset = cj.at("offset").get<int>();
        t.circumstances.push_back(std::move(c));
    }
    return t;
}

RuleTable default_rule_table() {
    RuleTable t;
    t.assistance_phrase = "deliberately helped";
    t.assistant_penalty_offset = -1;
    const struct {
        const char *charge;
        const char *phrase;
        int base;
    } crimes[] = {
        {"theft", "stole sealed cargo from the depot", 2},
        {"fraud", "forged investment papers to cheat clients", 3},
        {"robbery", "seized the courier bag by force", 6},
        {"assault", "beat the shopkeeper with a rod", 5},
        {"smuggling", "moved untaxed goods across the border", 4},
        {"bribery", "paid secret money to an official", 3},
        {"arson", "set fire to the storage hall", 7},
        {"kidnapping", "dragged the trader into a van", 8},
        {"extortion", "demanded payment under threat", 5},
        {"counterfeiting", "printed fake banknotes in a cellar", 4},
        {"embezzlement", "diverted company funds to private accounts", 3},
        {"gambling", "ran an unlawful betting parlor", 2},
        {"poaching", "hunted protected deer in the reserve", 2},
        {"trespass", "broke into the fenced compound", 2},
        {"vandalism", "smashed the station windows", 3},
        {"forgery", "faked official seals on permits", 4},
        {"hijacking", "took control of the freight truck", 8},
        {"looting", "ransacked shops during the blackout", 6},
        {"sabotage", "cut the factory power lines", 7},
        {"burglary", "picked the lock of the villa at night", 5},
    };
    int article = 101;
    for (const auto &c : crimes) {
        CrimeRule rule;
        rule.charge = c.charge;
        rule.phrase = c.phrase;
        rule.base_penalty = c.base;
        rule.articles.push_back("A" + std::to_string(article++));
        t.crimes.push_back(std::move(rule));
    }
    // Three templates carry a second article/charge so the multi-label
    // paths get exercised.
    t.crimes[16].extra_charges = {"conspiracy"};
    t.crimes[17].articles.push_back("A121");
    t.crimes[17].extra_charges = {"concealment"};
    t.crimes[18].articles.push_back("A122");
    t.crimes[18].extra_charges = {"moneylaundering"};

    t.circumstances = {
        {"OldPeople", "being aged beyond seventy five years", -1},
        {"DeafMuteOrBlind", "living as a deaf mute person", -1},
        {"Accessory", "playing only a minor helper role", -1},
        {"AttemptedCrime", "failing to finish the planned act", -1},
        {"Surrender", "surrendered to the police station soon after", -2},
        {"Confession", "confessed the deed during questioning", -1},
        {"MeritoriousService", "exposed another offender to investigators", -2},
        {"Recidivist", "having prior convictions on record", 2},
    };
    return t;
}

LabelSpace label_space_for(const RuleTable &table) {
    std::vector<std::string> articles;
    std::vector<std::string> charges;
    std::set<std::string> seen_articles, seen_charges;
    for (const auto &c : table.crimes) {
        for (const auto &a : c.articles)
            if (seen_articles.insert(a).second) articles.push_back(a);
        if (seen_charges.insert(c.charge).second) charges.push_back(c.charge);
        for (const auto &e : c.extra_charges)
            if (seen_charges.insert(e).second) charges.push_back(e);
    }
    std::vector<std::string> penalties;
    for (int i = 0; i < table.penalty_classes; ++i)
        penalties.push_back("P" + std::to_string(i));
    std::vector<std::string> circumstances;
    for (const auto &c : table.circumstances) circumstances.push_back(c.label);

    LabelSpace space;
    space.articles = LabelVocab(LabelKind::articles, std::move(articles));
    space.charges = LabelVocab(LabelKind::charges, std::move(charges));
    space.penalties = LabelVocab(LabelKind::penalty, std::move(penalties));
    space.relationships = LabelVocab(LabelKind::relationship, {"None", "Assistance"});
    space.circumstances = LabelVocab(LabelKind::circumstance, std::move(circumstances));
    return space;
}

namespace {

const std::vector<std::string> &name_pool() {
    static const std::vector<std::string> pool = {
        "alan",   "amber",  "boris",  "bruno",  "carla",  "cedric", "daria",  "dmitri",
        "elena",  "emilio", "fiona",  "frank",  "gavin",  "greta",  "harold", "hilda",
        "igor",   "irene",  "jasper", "jonas",  "karim",  "kelly",  "lars",   "lidia",
        "marco",  "marta",  "nadia",  "nestor", "olga",   "oscar",  "pavel",  "petra",
        "quincy", "ralph",  "rosa",   "ruben",  "sandra", "sergei", "tamara", "tomas",
        "ulric",  "ursula", "viktor", "vera",   "walter", "wanda",  "xenia",  "yakov",
        "yolanda", "zane",  "zelda",  "abram",  "bianca", "casper", "dora",   "edgar",
        "flora",  "gustav", "hanna",  "ilya"};
    return pool;
}

const std::vector<std::string> &opener_pool() {
    static const std::vector<std::string> pool = {
        "the court examined the gathered case files in detail",
        "the hearing reviewed statements from several witnesses",
        "officers compiled reports over many weeks of inquiry",
        "the investigation traced events across the district",
        "prosecutors presented the timeline of the incident",
        "the panel considered the evidence submitted below",
    };
    return pool;
}

const std::vector<std::string> &filler_pool() {
    static const std::vector<std::string> pool = {
        "weather records were attached to the file",
        "several receipts were archived for reference",
        "the site map was drawn by a surveyor",
        "phone logs covered the relevant period",
        "neighbors recalled little of that evening",
        "the ledger pages were photographed in full",
        "a patrol passed the area twice that night",
        "the report noted no further irregularities",
    };
    return pool;
}

} // namespace

CaseRecord generate_case(Rng &rng, const GenSpec &spec, const LabelSpace &space,
                         long case_index) {
    const RuleTable &rules = spec.rules;
    int n_defendants = 2 + static_cast<int>(rng.pick(spec.defendant_count_weights));

    // Distinct names.
    std::vector<std::string> names;
    {
        std::vector<size_t> idx(name_pool().size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        for (int i = 0; i < n_defendants; ++i) names.push_back(name_pool()[idx[static_cast<size_t>(i)]]);
    }

    struct Plan {
        bool assistant = false;
        int principal = -1; // index into defendants
        int crime = -1;     // own crime, or the principal's for assistants
        std::vector<int> circ_ids;
    };
    std::vector<Plan> plans(static_cast<size_t>(n_defendants));
    std::vector<int> principal_indices;
    for (int i = 0; i < n_defendants; ++i) {
        Plan &plan = plans[static_cast<size_t>(i)];
        if (i > 0 && !principal_indices.empty() && rng.real() < spec.assistance_prob) {
            plan.assistant = true;
            plan.principal =
                principal_indices[rng.below(principal_indices.size())];
            plan.crime = plans[static_cast<size_t>(plan.principal)].crime;
        } else {
            plan.crime = static_cast<int>(rng.below(rules.crimes.size()));
            principal_indices.push_back(i);
        }
        int n_circ = static_cast<int>(rng.pick(spec.circumstance_count_weights));
        std::vector<int> all_circ(rules.circumstances.size());
        for (size_t c = 0; c < all_circ.size(); ++c) all_circ[c] = static_cast<int>(c);
        rng.shuffle(all_circ);
        plan.circ_ids.assign(all_circ.begin(), all_circ.begin() + n_circ);
        std::sort(plan.circ_ids.begin(), plan.circ_ids.end());
    }

    // Sentences: opener first, everything else shuffled.
    std::vector<std::string> sentences;
    for (int i = 0; i < n_defendants; ++i) {
        const Plan &plan = plans[static_cast<size_t>(i)];
        if (plan.assistant)
            sentences.push_back(names[static_cast<size_t>(i)] + " " +
                                rules.assistance_phrase + " " +
                                names[static_cast<size_t>(plan.principal)] +
                                " during the scheme");
        else
            sentences.push_back(names[static_cast<size_t>(i)] + " " +
                                rules.crimes[static_cast<size_t>(plan.crime)].phrase);
        for (int c : plan.circ_ids)
            sentences.push_back(names[static_cast<size_t>(i)] + " " +
                                rules.circumstances[static_cast<size_t>(c)].phrase);
    }
    int n_fillers = static_cast<int>(rng.below(3)); // 0..2
    for (int f = 0; f < n_fillers; ++f)
        sentences.push_back(filler_pool()[rng.below(filler_pool().size())]);
    rng.shuffle(sentences);

    std::string fact = opener_pool()[rng.below(opener_pool().size())];
    for (const auto &s : sentences) {
        fact += " . ";
        fact += s;
    }
    fact += " .";

    CaseRecord rec;
    rec.case_id = "case_" + std::to_string(case_index);
    rec.fact = std::move(fact);
    for (int i = 0; i < n_defendants; ++i) {
        const Plan &plan = plans[static_cast<size_t>(i)];
        DefendantRecord d;
        d.name = names[static_cast<size_t>(i)];
        d.gold = plan.assistant
                     ? rules.assistant_labels(plan.crime, plan.circ_ids, space)
                     : rules.principal_labels(plan.crime, plan.circ_ids, space);
        if (spec.label_noise > 0.0 && rng.real() < spec.label_noise)
            d.gold.penalty = static_cast<int>(rng.below(
                static_cast<uint64_t>(rules.penalty_classes)));
        rec.defendants.push_back(std::move(d));
    }
    return rec;
}

SynthCorpus generate_corpus(const GenSpec &spec) {
    if (spec.n_cases < 1) throw ConfigError("gen: n_cases must be >= 1");
    if (spec.train_frac <= 0 || spec.val_frac < 0 ||
        spec.train_frac + spec.val_frac >= 1.0)
        throw ConfigError("gen: split fractions must leave room for a test split");

    SynthCorpus corpus;
    corpus.rules = spec.rules;
    corpus.space = label_space_for(spec.rules);

    Rng root(spec.seed);
    std::vector<CaseRecord> cases;
    cases.reserve(static_cast<size_t>(spec.n_cases));
    std::vector<long> defendant_counts(8, 0);
    for (long i = 0; i < spec.n_cases; ++i) {
        Rng rng = root.fork(static_cast<uint64_t>(i));
        CaseRecord rec = generate_case(rng, spec, corpus.space, i);
        size_t n = rec.defendants.size();
        if (n < defendant_counts.size()) ++defendant_counts[n];
        cases.push_back(std::move(rec));
    }

    long n_train = static_cast<long>(spec.train_frac * static_cast<double>(spec.n_cases));
    long n_val = static_cast<long>(spec.val_frac * static_cast<double>(spec.n_cases));
    if (n_train < 1 || n_val < 1 || n_train + n_val >= spec.n_cases)
        corpus.warnings.push_back("corpus too small for the requested split fractions");
    for (long i = 0; i < spec.n_cases; ++i) {
        if (i < n_train)
            corpus.train.push_back(std::move(cases[static_cast<size_t>(i)]));
        else if (i < n_train + n_val)
            corpus.val.push_back(std::move(cases[static_cast<size_t>(i)]));
        else
            corpus.test.push_back(std::move(cases[static_cast<size_t>(i)]));
    }

    // Distribution conformance is only meaningful at scale.
    if (spec.n_cases >= 2000) {
        for (size_t count = 2; count <= 7; ++count) {
            double expect = spec.defendant_count_weights[count - 2];
            double got = static_cast<double>(defendant_counts[count]) /
                         static_cast<double>(spec.n_cases);
            if (std::abs(got - expect) > 0.02)
                corpus.warnings.push_back(
                    "defendant count " + std::to_string(count) + " frequency " +
                    std::to_string(got) + " deviates from spec " + std::to_string(expect));
        }
    } else {
        corpus.warnings.push_back(
            "fewer than 2000 cases: defendant-count distribution tolerance not checkable");
    }
    return corpus;
}

std::optional<std::vector<JudgmentLabels>> reconstruct_labels(
    const std::string &fact, const std::vector<std::string> &names,
    const RuleTable &rules, const LabelSpace &space) {
    // Split into sentences on the standalone period token.
    std::vector<std::vector<std::string>> sentences;
    {
        std::vector<std::string> current;
        for (auto &tok : split_whitespace(fact)) {
            if (tok == ".") {
                if (!current.empty()) sentences.push_back(std::move(current));
                current.clear();
            } else {
                current.push_back(std::move(tok));
            }
        }
        if (!current.empty()) sentences.push_back(std::move(current));
    }

    auto phrase_matches = [](const std::vector<std::string> &sentence, size_t from,
                             const std::string &phrase) {
        std::vector<std::string> words = split_whitespace(phrase);
        if (sentence.size() < from + words.size()) return false;
        for (size_t i = 0; i < words.size(); ++i)
            if (sentence[from + i] != words[i]) return false;
        return true;
    };

    std::map<std::string, int> name_index;
    for (size_t i = 0; i < names.size(); ++i) name_index[names[i]] = static_cast<int>(i);

    struct Found {
        int crime = -1;
        int helped = -1; // defendant index of the principal
        std::vector<int> circ_ids;
    };
    std::vector<Found> found(names.size());

    std::vector<std::string> assist_words = split_whitespace(rules.assistance_phrase);
    for (const auto &sentence : sentences) {
        if (sentence.empty()) continue;
        auto it = name_index.find(sentence[0]);
        if (it == name_index.end()) continue;
        Found &f = found[static_cast<size_t>(it->second)];
        if (phrase_matches(sentence, 1, rules.assistance_phrase)) {
            size_t target_at = 1 + assist_words.size();
            if (target_at < sentence.size()) {
                auto target = name_index.find(sentence[target_at]);
                if (target != name_index.end()) {
                    f.helped = target->second;
                    continue;
                }
            }
        }
        bool matched = false;
        for (size_t c = 0; c < rules.crimes.size(); ++c)
            if (phrase_matches(sentence, 1, rules.crimes[c].phrase)) {
                f.crime = static_cast<int>(c);
                matched = true;
                break;
            }
        if (matched) continue;
        for (size_t c = 0; c < rules.circumstances.size(); ++c)
            if (phrase_matches(sentence, 1, rules.circumstances[c].phrase)) {
                f.circ_ids.push_back(static_cast<int>(c));
                break;
            }
    }

    std::vector<JudgmentLabels> out;
    for (size_t i = 0; i < names.size(); ++i) {
        Found &f = found[i];
        std::sort(f.circ_ids.begin(), f.circ_ids.end());
        if (f.helped >= 0) {
            const Found &principal = found[static_cast<size_t>(f.helped)];
            if (principal.crime < 0) return std::nullopt;
            out.push_back(rules.assistant_labels(principal.crime, f.circ_ids, space));
        } else if (f.crime >= 0) {
            out.push_back(rules.principal_labels(f.crime, f.circ_ids, space));
        } else {
            return std::nullopt;
        }
    }
    return out;
}

} // namespace lexchain
