#include "autoforge/agents/assembly.hpp"

#include <map>
#include <set>

#include "autoforge/agents/grammar.hpp"
#include "autoforge/domain/errors.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::agents {

namespace {

bool is_import_line(const std::string& line) {
    return util::starts_with(line, "import ") || util::starts_with(line, "from ");
}

std::string trim_blank_edges(const std::string& text) {
    const std::vector<std::string> lines = util::split_lines(text);
    std::size_t first = 0, last = lines.size();
    while (first < last && util::trim(lines[first]).empty()) ++first;
    while (last > first && util::trim(lines[last - 1]).empty()) --last;
    std::string out;
    for (std::size_t i = first; i < last; ++i) {
        out += lines[i];
        out += '\n';
    }
    return out;
}

}  // namespace

SplitSource split_imports(const std::string& source) {
    SplitSource out;
    std::string body;
    for (const std::string& line : util::split_lines(source)) {
        if (is_import_line(line))
            out.imports.push_back(util::trim(line));
        else {
            body += line;
            body += '\n';
        }
    }
    out.body = trim_blank_edges(body);
    return out;
}

std::vector<std::string> merge_imports(const std::vector<std::vector<std::string>>& import_sets) {
    std::vector<std::string> merged;
    std::set<std::string> seen;
    for (const auto& set : import_sets)
        for (const std::string& line : set)
            if (seen.insert(line).second) merged.push_back(line);
    return merged;
}

std::string module_entry_name(const std::string& module_name) {
    return "run_" + util::snake_case(module_name);
}

std::string assemble_module_source(const std::vector<CodeArtifact>& artifacts,
                                   const ModuleThought& module,
                                   const std::vector<FunctionThought>& functions) {
    if (artifacts.empty())
        throw AssemblyError("module '" + module.hyper.module_name +
                            "' has no function artifacts to assemble");
    if (artifacts.size() != functions.size())
        throw AssemblyError("module '" + module.hyper.module_name + "' has " +
                            std::to_string(artifacts.size()) + " artifacts for " +
                            std::to_string(functions.size()) + " functions");

    std::vector<std::vector<std::string>> import_sets;
    std::vector<std::string> bodies;
    for (const CodeArtifact& artifact : artifacts) {
        SplitSource split = split_imports(artifact.source);
        import_sets.push_back(std::move(split.imports));
        bodies.push_back(std::move(split.body));
    }

    std::string out = "# Module: " + module.hyper.module_name + "\n";
    out += "# " + module.description + "\n";
    for (const std::string& line : merge_imports(import_sets)) out += line + "\n";
    out += "\n";
    for (const std::string& body : bodies) {
        out += body;
        out += "\n\n";
    }

    out += "def " + module_entry_name(module.hyper.module_name) + "(*args):\n";
    for (std::size_t i = 0; i < functions.size(); ++i) {
        if (i == 0)
            out += "    result = " + functions[i].name + "(*args)\n";
        else if (functions[i].inputs.empty())
            out += "    result = " + functions[i].name + "()\n";
        else
            out += "    result = " + functions[i].name + "(result)\n";
    }
    out += "    return result\n";
    return out;
}

ProjectAssembly assemble_project_source(const std::vector<CodeArtifact>& module_artifacts,
                                        const std::vector<ModuleThought>& modules,
                                        const ProjectRequirement& requirement) {
    if (module_artifacts.empty()) throw AssemblyError("no module artifacts to assemble");
    if (module_artifacts.size() != modules.size())
        throw AssemblyError("project assembly received " +
                            std::to_string(module_artifacts.size()) + " artifacts for " +
                            std::to_string(modules.size()) + " modules");

    std::vector<std::vector<std::string>> import_sets;
    std::vector<std::string> bodies;
    for (const CodeArtifact& artifact : module_artifacts) {
        SplitSource split = split_imports(artifact.source);
        import_sets.push_back(std::move(split.imports));
        bodies.push_back(std::move(split.body));
    }

    // Resolve top-level name collisions across modules by suffixing the later
    // occurrence with its module index.
    ProjectAssembly out;
    std::set<std::string> taken;
    std::vector<std::map<std::string, std::string>> renames(bodies.size());
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        for (const std::string& name : top_level_function_names(bodies[i])) {
            if (taken.insert(name).second) continue;
            const std::string renamed = name + "_" + std::to_string(i);
            bodies[i] = util::replace_identifier(bodies[i], name, renamed);
            taken.insert(renamed);
            renames[i][name] = renamed;
            out.collision_notes.push_back("renamed '" + name + "' to '" + renamed +
                                          "' in module '" + modules[i].hyper.module_name +
                                          "' (name collision at project assembly)");
        }
    }

    std::string source = "# Project: " + requirement.id + "\n";
    for (const std::string& line : merge_imports(import_sets)) source += line + "\n";
    source += "\n";
    for (const std::string& body : bodies) {
        source += body;
        source += "\n\n";
    }

    source += "def main():\n";
    for (std::size_t i = 0; i < modules.size(); ++i) {
        std::string entry = module_entry_name(modules[i].hyper.module_name);
        auto renamed = renames[i].find(entry);
        if (renamed != renames[i].end()) entry = renamed->second;
        if (i == 0) {
            std::string args;
            for (std::size_t f = 0; f < requirement.input_files.size(); ++f) {
                if (f > 0) args += ", ";
                args += "\"" + requirement.input_files[f].path + "\"";
            }
            source += "    result = " + entry + "(" + args + ")\n";
        } else {
            source += "    result = " + entry + "(result)\n";
        }
    }
    source += "    return result\n";
    source += "\n\nif __name__ == \"__main__\":\n    print(main())\n";
    out.source = source;
    return out;
}

}  // namespace autoforge::agents
