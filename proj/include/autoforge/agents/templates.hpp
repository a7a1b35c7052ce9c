#pragma once

#include <map>
#include <string>
#include <vector>

namespace autoforge::agents {

// Prompt templates are plain-text files in a template directory, one file
// per template, with `{{placeholder}}` slots. Rendering is strict: a
// placeholder left unbound throws; bindings that match no placeholder are
// ignored (shared binding maps are allowed).
class TemplateStore {
public:
    explicit TemplateStore(const std::string& template_dir);

    const std::string& raw(const std::string& name) const;

    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& bindings) const;

    bool has_placeholder(const std::string& name, const std::string& placeholder) const;

    std::vector<std::string> names() const;

private:
    std::map<std::string, std::string> templates_;  // name (no extension) -> text
};

// The placeholders of `text`, in order of first appearance.
std::vector<std::string> placeholders_of(const std::string& text);

}  // namespace autoforge::agents
