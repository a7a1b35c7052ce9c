#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "autoforge/domain/types.hpp"

namespace autoforge::config {

// Plain-text project manifest: `key: value` header lines (plus repeatable
// `input: <path> [<kind>]` lines), then a `description:` marker followed by
// the free-text requirement. `#` lines and blank lines in the header are
// ignored.
struct ManifestDocument {
    std::map<std::string, std::string> fields;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, kind text
    std::string description;
};

// Throws ConfigError on malformed lines or duplicate fields.
ManifestDocument parse_manifest_text(const std::string& text);

ManifestDocument load_manifest_file(const std::string& path);

// Maps id / description / inputs / environment_hint / workdir onto a
// requirement. Throws ConfigError when id or description is missing.
ProjectRequirement requirement_from_manifest(const ManifestDocument& doc);

}  // namespace autoforge::config
