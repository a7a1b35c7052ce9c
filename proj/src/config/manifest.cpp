#include "autoforge/config/manifest.hpp"

#include <fstream>
#include <sstream>

#include "autoforge/domain/errors.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::config {

ManifestDocument parse_manifest_text(const std::string& text) {
    ManifestDocument doc;
    const std::vector<std::string> lines = util::split_lines(text);
    std::size_t i = 0;
    for (; i < lines.size(); ++i) {
        const std::string line = util::trim(lines[i]);
        if (line.empty() || line[0] == '#') continue;
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ConfigError("malformed manifest line (expected 'key: value'): '" + line + "'");
        const std::string key = util::trim(line.substr(0, colon));
        const std::string value = util::trim(line.substr(colon + 1));
        if (key == "description") {
            // Everything after the marker is the free-text description.
            std::string body = value;
            for (std::size_t j = i + 1; j < lines.size(); ++j) {
                body += '\n';
                body += lines[j];
            }
            doc.description = util::trim(body);
            return doc;
        }
        if (key == "input") {
            std::istringstream fields(value);
            std::string path, kind;
            fields >> path >> kind;
            if (path.empty())
                throw ConfigError("manifest 'input' line names no file: '" + line + "'");
            doc.inputs.emplace_back(path, kind.empty() ? "other" : kind);
            continue;
        }
        if (doc.fields.count(key))
            throw ConfigError("duplicate manifest field '" + key + "'");
        doc.fields[key] = value;
    }
    return doc;
}

ManifestDocument load_manifest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read manifest: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_manifest_text(buffer.str());
}

ProjectRequirement requirement_from_manifest(const ManifestDocument& doc) {
    ProjectRequirement req;
    auto field = [&doc](const char* key) {
        auto it = doc.fields.find(key);
        return it == doc.fields.end() ? std::string() : it->second;
    };
    req.id = field("id");
    if (req.id.empty()) throw ConfigError("manifest is missing 'id'");
    req.description = doc.description;
    if (req.description.empty())
        throw ConfigError("manifest is missing a description block");
    req.workdir = field("workdir");
    req.environment_hint = field("environment_hint");
    for (const auto& [path, kind] : doc.inputs)
        req.input_files.push_back({path, file_kind_from_string(kind)});
    validate(req);
    return req;
}

}  // namespace autoforge::config
