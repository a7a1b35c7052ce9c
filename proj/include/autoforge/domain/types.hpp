#pragma once

#include <string>
#include <vector>

#include "autoforge/llm/backend_ref.hpp"

namespace autoforge {

// Tree address: path of child indices from the root requirement.
// {} is the root, {i} the i-th module, {i, j} the j-th function of module i.
using TreeAddress = std::vector<int>;

std::string format_address(const TreeAddress& addr);   // "root", "1", "1.0"
TreeAddress parse_address(const std::string& text);    // inverse of the above

enum class FileKind { image, data, other };

FileKind file_kind_from_string(const std::string& s);
std::string to_string(FileKind kind);

struct InputFile {
    std::string path;  // relative, no parent traversal
    FileKind kind = FileKind::other;
};

// The root task: a natural-language requirement plus its input-file manifest.
struct ProjectRequirement {
    std::string id;
    std::string description;
    std::vector<InputFile> input_files;
    std::string workdir;           // sandbox-relative working directory
    std::string environment_hint;  // optional preferred sandbox image
};

// Throws DomainError when an invariant is violated.
void validate(const ProjectRequirement& req);

// Fixed contextual facts chosen when a module is created. Inherited unchanged
// by every descendant thought; nothing downstream may rewrite them.
struct HyperThought {
    std::string module_name;
    std::string language = "python";
    std::string runtime_environment;
    std::string work_directory;

    bool operator==(const HyperThought&) const = default;
};

struct ModuleThought {
    HyperThought hyper;
    std::string description;
    int index = 0;             // position among siblings
    std::string parent_project;  // ProjectRequirement id
};

struct TypedField {
    std::string name;
    std::string type;  // described type, free text

    bool operator==(const TypedField&) const = default;
};

struct FunctionThought {
    std::string name;  // valid identifier in the target language
    std::string description;
    std::vector<TypedField> inputs;
    std::vector<TypedField> outputs;
    TreeAddress parent;  // address of the owning module
};

struct FunctionSignature {
    FunctionThought thought;
    std::string signature_text;  // code-form, strictly typed
    std::string docstring;       // one-paragraph contract
};

enum class ArtifactLevel { function, module, project };
enum class ValidationStatus { untested, passed, failed, unvalidated_exhausted };

std::string to_string(ArtifactLevel level);
std::string to_string(ValidationStatus status);

struct CodeArtifact {
    ArtifactLevel level = ArtifactLevel::function;
    std::string source;
    TreeAddress origin;  // address of the thought it implements
    ValidationStatus validation = ValidationStatus::untested;
    int attempts = 0;  // generation rounds consumed
};

// Throws DomainError if the artifact breaks a level-specific invariant.
void validate(const CodeArtifact& artifact, int max_function_retries);

enum class AssemblyMode { deterministic, llm };
enum class SandboxBackendKind { subprocess, container };

struct RunConfig {
    llm::BackendRef decision_model;
    llm::BackendRef implementer_model;
    int max_function_retries = 3;  // regenerations after the initial draft
    int module_parallelism = 2;    // max concurrent module branches
    double sandbox_timeout_s = 30.0;
    AssemblyMode assembly_mode = AssemblyMode::deterministic;

    // Plumbing, not part of the decomposition model.
    std::string template_dir = "assets/templates";
    std::string catalog_path = "assets/catalog.txt";
    std::string run_root = "runs";
    std::string team_leader_kb;  // optional knowledge index path
    std::string coder_kb;        // optional knowledge index path
    bool pair_programming = true;
    int module_correction_budget = 2;
    int kb_top_k = 2;
    int max_inflight_per_backend = 4;
    int sandbox_parallelism = 4;
    SandboxBackendKind sandbox_backend = SandboxBackendKind::subprocess;
};

void validate(const RunConfig& config);

// Conservative identifier rule: letter/underscore start,
// alphanumeric/underscore body.
bool is_valid_identifier(const std::string& name);

// True when `path` is relative and never escapes upward.
bool is_safe_relative_path(const std::string& path);

}  // namespace autoforge
