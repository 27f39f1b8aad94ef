#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lexchain {

std::vector<std::string> split_whitespace(std::string_view text);

// Split on a multi-byte delimiter such as the fullwidth separators used in
// label sequences. Empty pieces are preserved.
std::vector<std::string> split_on(std::string_view text, std::string_view delim);

std::string join(const std::vector<std::string> &parts, std::string_view sep);

std::string_view trim(std::string_view s);

// Remove all ASCII whitespace; used to compare decoder output against a
// canonical rendering, since detokenization inserts spaces.
std::string strip_spaces(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

} // namespace lexchain
