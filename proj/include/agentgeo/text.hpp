#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agentgeo {

// Shared token definition for retrieval and lexical metrics: lowercased
// maximal runs of alphanumeric characters. "Don't" -> {"don", "t"}.
std::vector<std::string> tokenize(const std::string& text);

std::string to_lower(std::string text);
std::string trim(const std::string& text);
std::vector<std::string> split_lines(const std::string& text);

bool starts_with(const std::string& text, const std::string& prefix);
bool contains(const std::string& text, const std::string& needle);

// Replaces every "{name}" occurrence; returns the number of substitutions.
std::size_t replace_all(std::string& text, const std::string& needle,
                        const std::string& replacement);

// Locates the JSON payload inside a model response: strips ``` fences when
// present, then takes the span from the first '{' ('[' for arrays) to the
// matching last bracket. Returns nothing when no brackets are found.
std::optional<std::string> extract_json_object(const std::string& raw);
std::optional<std::string> extract_json_array(const std::string& raw);

// Stable 64-bit FNV-1a, rendered as 16 hex digits. Used for chunk-map source
// hashes and cache keys; deterministic across platforms and runs.
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

} // namespace agentgeo
