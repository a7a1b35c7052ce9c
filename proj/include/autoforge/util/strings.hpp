#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace autoforge::util {

std::string trim(std::string_view s);

// Splits on a single-character delimiter; does not trim pieces.
std::vector<std::string> split(std::string_view s, char delim);

std::vector<std::string> split_lines(std::string_view text);

// Splits on top-level commas only: commas nested inside (), [] or {} are
// kept, so "a: tuple[int, int], b: str" yields two pieces.
std::vector<std::string> split_top_level_commas(std::string_view s);

std::string to_lower(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

// CamelCase / mixedCase -> snake_case ("ImageInput" -> "image_input").
std::string snake_case(std::string_view name);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Replaces whole-word occurrences (identifier boundaries) of `from` with `to`.
std::string replace_identifier(const std::string& text, const std::string& from,
                               const std::string& to);

}  // namespace autoforge::util
