#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lexchain {

// The four seq2seq tasks. Forward emits articles -> charges -> penalty,
// backward the reverse.
enum class Task { relationship, circumstances, forward_judgment, backward_judgment };

const char *task_name(Task t);

enum class LabelKind { articles, charges, penalty, relationship, circumstance };

// Fullwidth separators keep label sequences unambiguous: surfaces never
// contain them.
inline constexpr std::string_view kGroupDelim = "\xef\xbd\x9c"; // ｜
inline constexpr std::string_view kItemDelim = "\xef\xbc\x9b";  // ；
inline constexpr std::string_view kClauseDelim = ":";

// An ordered id <-> surface bijection for one label inventory.
class LabelVocab {
public:
    LabelVocab() = default;
    LabelVocab(LabelKind kind, std::vector<std::string> surfaces);

    LabelKind kind() const { return kind_; }
    int size() const { return static_cast<int>(surfaces_.size()); }
    const std::string &surface(int id) const; // throws DataError naming the id
    std::optional<int> find(std::string_view surface) const;
    int id(std::string_view surface) const; // throws DataError naming the surface
    const std::vector<std::string> &surfaces() const { return surfaces_; }

    // One surface per line, line index = id.
    void save(const std::string &path) const;
    static LabelVocab load(LabelKind kind, const std::string &path);

private:
    LabelKind kind_ = LabelKind::articles;
    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, int> index_;
};

// The five inventories of one corpus.
struct LabelSpace {
    LabelVocab articles;
    LabelVocab charges;
    LabelVocab penalties;
    LabelVocab relationships; // {None, Assistance}
    LabelVocab circumstances; // the 8 sentencing circumstances

    void save(const std::string &dir) const;
    static LabelSpace load(const std::string &dir);
    // FNV-1a over every surface, order-sensitive.
    uint64_t hash() const;
};

// Gold labels of one defendant. Ids are sorted and unique within each set.
struct JudgmentLabels {
    std::vector<int> articles;      // >= 1 entries
    std::vector<int> charges;       // >= 1 entries
    int penalty = 0;                // exactly one of the penalty classes
    int relationship = 0;           // None or Assistance
    std::vector<int> circumstances; // possibly empty

    void normalize();
    void validate(const LabelSpace &space) const; // throws DataError
    bool operator==(const JudgmentLabels &) const = default;
};

struct DefendantRecord {
    std::string name;
    JudgmentLabels gold;
    bool operator==(const DefendantRecord &) const = default;
};

struct CaseRecord {
    std::string case_id;
    std::string fact;
    std::vector<DefendantRecord> defendants; // >= 2 entries

    void validate(const LabelSpace &space) const; // throws DataError
    bool operator==(const CaseRecord &) const = default;
};

// Best-effort parse of decoder output. Fields that did not parse stay
// empty/unset; `malformed` is raised whenever the text is not the exact
// canonical rendering of what was recovered.
struct LabelFragment {
    std::vector<int> articles;
    std::vector<int> charges;
    std::optional<int> penalty;
    std::vector<int> circumstances;
    // Relationship clauses per defendant name, in clause order.
    std::vector<std::pair<std::string, int>> relationships;
    bool malformed = false;

    std::optional<int> relationship_of(std::string_view name) const {
        for (const auto &[n, id] : relationships)
            if (n == name) return id;
        return std::nullopt;
    }
};

// Canonical renderings. Multi-label sets are emitted in vocab id order,
// items joined by the item delimiter and groups by the group delimiter.
std::string render_judgment(const JudgmentLabels &labels, Task direction,
                            const LabelSpace &space);
std::string render_circumstance_set(const std::vector<int> &ids, const LabelSpace &space);
std::string render_relationship_clause(std::string_view name, int relationship_id,
                                       const LabelSpace &space);
// One clause per defendant, in case order.
std::string render_case_relationships(const CaseRecord &rec, const LabelSpace &space);

// Umbrella over the per-task renderers. For the relationship task the
// defendant name is required and a single clause is produced.
std::string render_label_sequence(const JudgmentLabels &labels, Task task,
                                  const LabelSpace &space,
                                  std::string_view defendant_name = {});

// Inverse of rendering on valid inputs; never throws on malformed text.
LabelFragment parse_label_sequence(std::string_view text, Task task,
                                   const LabelSpace &space);

} // namespace lexchain
