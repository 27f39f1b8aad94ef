#include "labels.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "errors.hpp"
#include "textutil.hpp"

namespace lexchain {

const char *task_name(Task t) {
    switch (t) {
    case Task::relationship: return "relationship";
    case Task::circumstances: return "circumstances";
    case Task::forward_judgment: return "forward";
    case Task::backward_judgment: return "backward";
    }
    return "?";
}

namespace {

const char *kind_name(LabelKind k) {
    switch (k) {
    case LabelKind::articles: return "articles";
    case LabelKind::charges: return "charges";
    case LabelKind::penalty: return "penalty";
    case LabelKind::relationship: return "relationship";
    case LabelKind::circumstance: return "circumstance";
    }
    return "?";
}

} // namespace

LabelVocab::LabelVocab(LabelKind kind, std::vector<std::string> surfaces)
    : kind_(kind), surfaces_(std::move(surfaces)) {
    for (size_t i = 0; i < surfaces_.size(); ++i) {
        auto [_, inserted] = index_.emplace(surfaces_[i], static_cast<int>(i));
        if (!inserted)
            throw DataError(std::string(kind_name(kind_)) + " vocab: duplicate surface \"" +
                            surfaces_[i] + "\"");
    }
}

const std::string &LabelVocab::surface(int id) const {
    if (id < 0 || id >= size())
        throw DataError(std::string(kind_name(kind_)) + " vocab: unknown label id " +
                        std::to_string(id));
    return surfaces_[static_cast<size_t>(id)];
}

std::optional<int> LabelVocab::find(std::string_view surface) const {
    auto it = index_.find(std::string(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int LabelVocab::id(std::string_view surface) const {
    auto found = find(surface);
    if (!found)
        throw DataError(std::string(kind_name(kind_)) + " vocab: unknown surface \"" +
                        std::string(surface) + "\"");
    return *found;
}

void LabelVocab::save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocab file " + path);
    for (const auto &s : surfaces_) out << s << '\n';
}

LabelVocab LabelVocab::load(LabelKind kind, const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read vocab file " + path);
    std::vector<std::string> surfaces;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) surfaces.push_back(line);
    }
    return LabelVocab(kind, std::move(surfaces));
}

void LabelSpace::save(const std::string &dir) const {
    articles.save(dir + "/articles.vocab");
    charges.save(dir + "/charges.vocab");
    penalties.save(dir + "/penalties.vocab");
    relationships.save(dir + "/relationships.vocab");
    circumstances.save(dir + "/circumstances.vocab");
}

LabelSpace LabelSpace::load(const std::string &dir) {
    LabelSpace s;
    s.articles = LabelVocab::load(LabelKind::articles, dir + "/articles.vocab");
    s.charges = LabelVocab::load(LabelKind::charges, dir + "/charges.vocab");
    s.penalties = LabelVocab::load(LabelKind::penalty, dir + "/penalties.vocab");
    s.relationships = LabelVocab::load(LabelKind::relationship, dir + "/relationships.vocab");
    s.circumstances = LabelVocab::load(LabelKind::circumstance, dir + "/circumstances.vocab");
    return s;
}

uint64_t LabelSpace::hash() const {
    uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const LabelVocab &v) {
        for (const auto &s : v.surfaces()) {
            for (char c : s) {
                h ^= static_cast<unsigned char>(c);
                h *= 1099511628211ULL;
            }
            h ^= '\n';
            h *= 1099511628211ULL;
        }
    };
    mix(articles);
    mix(charges);
    mix(penalties);
    mix(relationships);
    mix(circumstances);
    return h;
}

void JudgmentLabels::normalize() {
    auto norm = [](std::vector<int> &v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    norm(articles);
    norm(charges);
    norm(circumstances);
}

void JudgmentLabels::validate(const LabelSpace &space) const {
    if (articles.empty()) throw DataError("labels: law_articles must be non-empty");
    if (charges.empty()) throw DataError("labels: charges must be non-empty");
    auto check = [](const std::vector<int> &v, const LabelVocab &vocab) {
        for (int id : v) (void)vocab.surface(id);
        if (!std::is_sorted(v.begin(), v.end()) ||
            std::adjacent_find(v.begin(), v.end()) != v.end())
            throw DataError("labels: sets must be sorted and unique");
    };
    check(articles, space.articles);
    check(charges, space.charges);
    check(circumstances, space.circumstances);
    (void)space.penalties.surface(penalty);
    (void)space.relationships.surface(relationship);
}

void CaseRecord::validate(const LabelSpace &space) const {
    if (case_id.empty()) throw DataError("case: case_id must be non-empty");
    if (defendants.size() < 2)
        throw DataError("case " + case_id + ": defendants.len() >= 2 violated");
    std::set<std::string> names;
    for (const auto &d : defendants) {
        if (d.name.empty()) throw DataError("case " + case_id + ": defendant name empty");
        if (!names.insert(d.name).second)
            throw DataError("case " + case_id + ": duplicate defendant name " + d.name);
        if (fact.find(d.name) == std::string::npos)
            throw DataError("case " + case_id + ": defendant name \"" + d.name +
                            "\" does not occur in fact");
        d.gold.validate(space);
    }
}

namespace {

std::string render_set(const std::vector<int> &ids, const LabelVocab &vocab) {
    std::vector<std::string> parts;
    parts.reserve(ids.size());
    for (int id : ids) parts.push_back(vocab.surface(id));
    return join(parts, kItemDelim);
}

} // namespace

std::string render_judgment(const JudgmentLabels &labels, Task direction,
                            const LabelSpace &space) {
    std::string articles = render_set(labels.articles, space.articles);
    std::string charges = render_set(labels.charges, space.charges);
    std::string penalty = space.penalties.surface(labels.penalty);
    std::string out;
    if (direction == Task::forward_judgment) {
        out = articles;
        out += kGroupDelim;
        out += charges;
        out += kGroupDelim;
        out += penalty;
    } else if (direction == Task::backward_judgment) {
        out = penalty;
        out += kGroupDelim;
        out += charges;
        out += kGroupDelim;
        out += articles;
    } else {
        throw DataError("render_judgment: task must be forward or backward");
    }
    return out;
}

std::string render_circumstance_set(const std::vector<int> &ids, const LabelSpace &space) {
    return render_set(ids, space.circumstances);
}

std::string render_relationship_clause(std::string_view name, int relationship_id,
                                       const LabelSpace &space) {
    std::string out(name);
    out += kClauseDelim;
    out += space.relationships.surface(relationship_id);
    return out;
}

std::string render_case_relationships(const CaseRecord &rec, const LabelSpace &space) {
    std::vector<std::string> clauses;
    clauses.reserve(rec.defendants.size());
    for (const auto &d : rec.defendants)
        clauses.push_back(render_relationship_clause(d.name, d.gold.relationship, space));
    return join(clauses, kItemDelim);
}

std::string render_label_sequence(const JudgmentLabels &labels, Task task,
                                  const LabelSpace &space,
                                  std::string_view defendant_name) {
    switch (task) {
    case Task::relationship:
        return render_relationship_clause(defendant_name, labels.relationship, space);
    case Task::circumstances:
        return render_circumstance_set(labels.circumstances, space);
    case Task::forward_judgment:
    case Task::backward_judgment:
        return render_judgment(labels, task, space);
    }
    throw DataError("render_label_sequence: bad task");
}

namespace {

// Parse one item-delimited group into sorted unique ids; unknown surfaces
// are dropped.
std::vector<int> parse_set(std::string_view group, const LabelVocab &vocab, bool &malformed) {
    std::vector<int> ids;
    for (const auto &piece : split_on(group, kItemDelim)) {
        auto token = trim(piece);
        if (token.empty()) {
            malformed = true;
            continue;
        }
        auto id = vocab.find(token);
        if (id)
            ids.push_back(*id);
        else
            malformed = true;
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::optional<int> parse_single(std::string_view group, const LabelVocab &vocab,
                                bool &malformed) {
    std::vector<int> ids = parse_set(group, vocab, malformed);
    if (ids.empty()) {
        malformed = true;
        return std::nullopt;
    }
    if (ids.size() > 1) malformed = true;
    return ids.front();
}

// Canonical re-rendering of whatever was recovered; comparing it against the
// input (whitespace-stripped, since detokenized text carries spaces) decides
// the malformed flag for borderline cases like reordered or duplicated items.
std::string rerender(const LabelFragment &f, Task task, const LabelSpace &space) {
    switch (task) {
    case Task::relationship: {
        std::vector<std::string> clauses;
        for (const auto &[name, rel] : f.relationships)
            clauses.push_back(render_relationship_clause(name, rel, space));
        return join(clauses, kItemDelim);
    }
    case Task::circumstances:
        return render_set(f.circumstances, space.circumstances);
    case Task::forward_judgment:
    case Task::backward_judgment: {
        if (!f.penalty) return "";
        JudgmentLabels l;
        l.articles = f.articles;
        l.charges = f.charges;
        l.penalty = *f.penalty;
        return render_judgment(l, task, space);
    }
    }
    return "";
}

} // namespace

LabelFragment parse_label_sequence(std::string_view text, Task task,
                                   const LabelSpace &space) {
    LabelFragment frag;
    bool malformed = false;
    switch (task) {
    case Task::relationship: {
        for (const auto &clause : split_on(text, kItemDelim)) {
            auto trimmed = trim(clause);
            if (trimmed.empty()) {
                malformed = true;
                continue;
            }
            auto parts = split_on(trimmed, kClauseDelim);
            if (parts.size() != 2) {
                malformed = true;
                continue;
            }
            auto name = trim(parts[0]);
            auto label = space.relationships.find(trim(parts[1]));
            if (name.empty() || !label) {
                malformed = true;
                continue;
            }
            if (frag.relationship_of(name)) {
                malformed = true;
                continue;
            }
            frag.relationships.emplace_back(std::string(name), *label);
        }
        if (frag.relationships.empty()) malformed = true;
        break;
    }
    case Task::circumstances: {
        if (trim(text).empty()) break; // empty set is a valid rendering
        frag.circumstances = parse_set(text, space.circumstances, malformed);
        break;
    }
    case Task::forward_judgment:
    case Task::backward_judgment: {
        auto groups = split_on(text, kGroupDelim);
        if (groups.size() != 3) malformed = true;
        auto group = [&](size_t i) -> std::string_view {
            return i < groups.size() ? std::string_view(groups[i]) : std::string_view{};
        };
        size_t art_idx = task == Task::forward_judgment ? 0 : 2;
        size_t pen_idx = task == Task::forward_judgment ? 2 : 0;
        frag.articles = parse_set(group(art_idx), space.articles, malformed);
        frag.charges = parse_set(group(1), space.charges, malformed);
        frag.penalty = parse_single(group(pen_idx), space.penalties, malformed);
        if (frag.articles.empty() || frag.charges.empty()) malformed = true;
        break;
    }
    }
    if (!malformed)
        malformed = strip_spaces(rerender(frag, task, space)) != strip_spaces(text);
    frag.malformed = malformed;
    return frag;
}

} // namespace lexchain
