#include "corpus.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "errors.hpp"

namespace lexchain {

using json = nlohmann::ordered_json;

namespace {

std::vector<int> ids_of(const json &arr, const LabelVocab &vocab, const char *field) {
    if (!arr.is_array()) throw DataError(std::string(field) + " must be an array");
    std::vector<int> ids;
    ids.reserve(arr.size());
    for (const auto &item : arr) {
        if (!item.is_string()) throw DataError(std::string(field) + " entries must be strings");
        ids.push_back(vocab.id(item.get<std::string>()));
    }
    return ids;
}

const json &field(const json &obj, const char *name) {
    auto it = obj.find(name);
    if (it == obj.end()) throw DataError(std::string("missing field \"") + name + "\"");
    return *it;
}

CaseRecord case_from_json(const json &j, const LabelSpace &space) {
    if (!j.is_object()) throw DataError("case line must be a JSON object");
    CaseRecord rec;
    rec.case_id = field(j, "case_id").get<std::string>();
    rec.fact = field(j, "fact").get<std::string>();
    const json &defs = field(j, "defendants");
    if (!defs.is_array()) throw DataError("defendants must be an array");
    if (defs.size() < 2)
        throw DataError("case " + rec.case_id + ": defendants.len() >= 2 violated");
    for (const auto &d : defs) {
        DefendantRecord def;
        def.name = field(d, "name").get<std::string>();
        def.gold.articles = ids_of(field(d, "articles"), space.articles, "articles");
        def.gold.charges = ids_of(field(d, "charges"), space.charges, "charges");
        def.gold.penalty = space.penalties.id(field(d, "penalty").get<std::string>());
        def.gold.relationship =
            space.relationships.id(field(d, "relationship").get<std::string>());
        def.gold.circumstances =
            ids_of(field(d, "circumstances"), space.circumstances, "circumstances");
        def.gold.normalize();
        rec.defendants.push_back(std::move(def));
    }
    rec.validate(space);
    return rec;
}

json case_to_json(const CaseRecord &rec, const LabelSpace &space) {
    auto surfaces = [](const std::vector<int> &ids, const LabelVocab &vocab) {
        json arr = json::array();
        for (int id : ids) arr.push_back(vocab.surface(id));
        return arr;
    };
    json defs = json::array();
    for (const auto &d : rec.defendants) {
        json j;
        j["name"] = d.name;
        j["articles"] = surfaces(d.gold.articles, space.articles);
        j["charges"] = surfaces(d.gold.charges, space.charges);
        j["penalty"] = space.penalties.surface(d.gold.penalty);
        j["relationship"] = space.relationships.surface(d.gold.relationship);
        j["circumstances"] = surfaces(d.gold.circumstances, space.circumstances);
        defs.push_back(std::move(j));
    }
    json j;
    j["case_id"] = rec.case_id;
    j["fact"] = rec.fact;
    j["defendants"] = std::move(defs);
    return j;
}

} // namespace

std::vector<CaseRecord> load_corpus(const std::string &path, const LabelSpace &space) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file " + path);
    std::vector<CaseRecord> records;
    std::set<std::string> seen_ids;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            CaseRecord rec = case_from_json(j, space);
            if (!seen_ids.insert(rec.case_id).second)
                throw DataError("duplicate case_id " + rec.case_id);
            records.push_back(std::move(rec));
        } catch (const DataError &e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const json::exception &e) {
            throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " +
                            e.what());
        }
    }
    return records;
}

void save_corpus(const std::vector<CaseRecord> &records, const std::string &path,
                 const LabelSpace &space) {
    std::set<std::string> seen_ids;
    for (const auto &rec : records) {
        rec.validate(space);
        if (!seen_ids.insert(rec.case_id).second)
            throw DataError("duplicate case_id " + rec.case_id);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file " + path);
    for (const auto &rec : records) out << case_to_json(rec, space).dump() << '\n';
    if (!out) throw IoError("write failed for corpus file " + path);
}

} // namespace lexchain
