#include "autoforge/agents/templates.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "autoforge/domain/errors.hpp"

namespace autoforge::agents {

namespace fs = std::filesystem;

TemplateStore::TemplateStore(const std::string& template_dir) {
    const fs::path dir(template_dir);
    if (template_dir.empty() || !fs::is_directory(dir))
        throw ConfigError("template directory not found: '" + template_dir + "'");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) throw ConfigError("cannot read template file: " + entry.path().string());
        std::ostringstream text;
        text << in.rdbuf();
        templates_[entry.path().stem().string()] = text.str();
    }
    if (templates_.empty())
        throw ConfigError("template directory contains no .txt templates: '" + template_dir +
                          "'");
}

const std::string& TemplateStore::raw(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no template named '" + name + "'");
    return it->second;
}

std::string TemplateStore::render(const std::string& name,
                                  const std::map<std::string, std::string>& bindings) const {
    const std::string& text = raw(name);
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            break;
        }
        out.append(text, pos, open - pos);
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos)
            throw ConfigError("template '" + name + "' has an unterminated placeholder");
        const std::string key = text.substr(open + 2, close - open - 2);
        auto it = bindings.find(key);
        if (it == bindings.end())
            throw ConfigError("template '" + name + "' placeholder '" + key +
                              "' has no binding");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

bool TemplateStore::has_placeholder(const std::string& name,
                                    const std::string& placeholder) const {
    for (const std::string& p : placeholders_of(raw(name)))
        if (p == placeholder) return true;
    return false;
}

std::vector<std::string> TemplateStore::names() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [name, _] : templates_) out.push_back(name);
    return out;
}

std::vector<std::string> placeholders_of(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t open = text.find("{{", pos);
        if (open == std::string::npos) break;
        std::size_t close = text.find("}}", open + 2);
        if (close == std::string::npos) break;
        const std::string key = text.substr(open + 2, close - open - 2);
        bool seen = false;
        for (const std::string& existing : out)
            if (existing == key) seen = true;
        if (!seen) out.push_back(key);
        pos = close + 2;
    }
    return out;
}

}  // namespace autoforge::agents
