#pragma once

#include <string>
#include <vector>

#include "autoforge/domain/types.hpp"

namespace autoforge::agents {

// Splits Python source into top-level import lines and the remaining body.
// Only column-zero `import ...` / `from ... import ...` lines are treated
// as imports; indented imports stay in the body.
struct SplitSource {
    std::vector<std::string> imports;  // in first-seen order
    std::string body;                  // source minus import lines, trimmed
};

SplitSource split_imports(const std::string& source);

// Deduplicates import lines across sources, preserving first-seen order.
std::vector<std::string> merge_imports(const std::vector<std::vector<std::string>>& import_sets);

// Module entry function name: `run_<module_name in snake_case>`.
std::string module_entry_name(const std::string& module_name);

// Deterministic module assembly: hoisted deduplicated imports, each function
// body verbatim in tree order, then an entry function that calls the first
// function with the entry's arguments and chains each later function on the
// previous result (functions declared with zero inputs are called with no
// arguments).
std::string assemble_module_source(const std::vector<CodeArtifact>& artifacts,
                                   const ModuleThought& module,
                                   const std::vector<FunctionThought>& functions);

struct ProjectAssembly {
    std::string source;
    std::vector<std::string> collision_notes;  // renamed symbols, if any
};

// Deterministic project assembly: hoisted imports, every module body verbatim
// in plan order, and a `main()` wiring module entry functions in plan order.
// The first entry receives the requirement's input file paths as string
// literals; each later entry receives the previous entry's result. Top-level
// name collisions across modules are resolved by suffixing `_<module index>`.
ProjectAssembly assemble_project_source(const std::vector<CodeArtifact>& module_artifacts,
                                        const std::vector<ModuleThought>& modules,
                                        const ProjectRequirement& requirement);

}  // namespace autoforge::agents
