#pragma once

#include <string>
#include <vector>

#include "labels.hpp"

namespace lexchain {

// JSONL, one case per line:
//   {"case_id": str, "fact": str, "defendants": [{"name": str,
//    "articles": [str], "charges": [str], "penalty": str,
//    "relationship": str, "circumstances": [str]}]}
// UTF-8, LF line endings. Label fields carry surface strings.

std::vector<CaseRecord> load_corpus(const std::string &path, const LabelSpace &space);

void save_corpus(const std::vector<CaseRecord> &records, const std::string &path,
                 const LabelSpace &space);

} // namespace lexchain
