#include "autoforge/domain/types.hpp"

#include <cctype>

#include "autoforge/domain/errors.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge {

std::string format_address(const TreeAddress& addr) {
    if (addr.empty()) return "root";
    std::vector<std::string> parts;
    parts.reserve(addr.size());
    for (int idx : addr) parts.push_back(std::to_string(idx));
    return util::join(parts, ".");
}

TreeAddress parse_address(const std::string& text) {
    std::string t = util::trim(text);
    if (t.empty() || t == "root" || t == ".") return {};
    TreeAddress addr;
    for (const std::string& piece : util::split(t, '.')) {
        const std::string p = util::trim(piece);
        if (p.empty()) throw AddressingError("malformed tree address: '" + text + "'");
        for (char c : p) {
            if (!std::isdigit(static_cast<unsigned char>(c)))
                throw AddressingError("malformed tree address: '" + text + "'");
        }
        addr.push_back(std::stoi(p));
    }
    return addr;
}

FileKind file_kind_from_string(const std::string& s) {
    if (s == "image") return FileKind::image;
    if (s == "data") return FileKind::data;
    if (s == "other") return FileKind::other;
    throw DomainError("unknown input file kind: '" + s + "'");
}

std::string to_string(FileKind kind) {
    switch (kind) {
        case FileKind::image: return "image";
        case FileKind::data: return "data";
        case FileKind::other: return "other";
    }
    return "other";
}

std::string to_string(ArtifactLevel level) {
    switch (level) {
        case ArtifactLevel::function: return "function";
        case ArtifactLevel::module: return "module";
        case ArtifactLevel::project: return "project";
    }
    return "function";
}

std::string to_string(ValidationStatus status) {
    switch (status) {
        case ValidationStatus::untested: return "untested";
        case ValidationStatus::passed: return "passed";
        case ValidationStatus::failed: return "failed";
        case ValidationStatus::unvalidated_exhausted: return "unvalidated_exhausted";
    }
    return "untested";
}

bool is_valid_identifier(const std::string& name) {
    if (name.empty()) return false;
    unsigned char first = static_cast<unsigned char>(name[0]);
    if (!std::isalpha(first) && name[0] != '_') return false;
    for (char c : name) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    }
    return true;
}

bool is_safe_relative_path(const std::string& path) {
    if (path.empty()) return false;
    if (path.front() == '/' || path.front() == '\\') return false;
    // Windows-style drive prefix also counts as absolute.
    if (path.size() >= 2 && path[1] == ':') return false;
    for (const std::string& part : util::split(path, '/')) {
        if (part == "..") return false;
    }
    return true;
}

void validate(const ProjectRequirement& req) {
    if (util::trim(req.id).empty())
        throw DomainError("project requirement has an empty id");
    if (!is_safe_relative_path(req.id))
        throw DomainError("project id must be usable as a relative path: '" + req.id + "'");
    if (util::trim(req.description).empty())
        throw DomainError("project requirement '" + req.id + "' has an empty description");
    for (const InputFile& file : req.input_files) {
        if (!is_safe_relative_path(file.path))
            throw DomainError("input file path must be relative without traversal: '" +
                              file.path + "'");
    }
    if (!req.workdir.empty() && !is_safe_relative_path(req.workdir))
        throw DomainError("workdir must be relative without traversal: '" + req.workdir + "'");
}

void validate(const CodeArtifact& artifact, int max_function_retries) {
    if (util::trim(artifact.source).empty())
        throw DomainError("artifact at " + format_address(artifact.origin) +
                          " has an empty source");
    const std::size_t expected_depth =
        artifact.level == ArtifactLevel::function ? 2 : artifact.level == ArtifactLevel::module
                                                        ? 1
                                                        : 0;
    if (artifact.origin.size() != expected_depth)
        throw DomainError("artifact level " + to_string(artifact.level) +
                          " does not match origin address " + format_address(artifact.origin));
    if (artifact.level == ArtifactLevel::function &&
        artifact.attempts > 1 + max_function_retries) {
        throw DomainError("function artifact at " + format_address(artifact.origin) +
                          " exceeded the attempt bound: " + std::to_string(artifact.attempts) +
                          " > " + std::to_string(1 + max_function_retries));
    }
    if (artifact.level == ArtifactLevel::project &&
        artifact.validation != ValidationStatus::untested) {
        throw DomainError("project artifacts are never validated");
    }
}

namespace {

void validate_backend_ref(const llm::BackendRef& ref, const char* which) {
    if (ref.kind == llm::BackendKind::scripted) {
        if (ref.script_dir.empty())
            throw ConfigError(std::string(which) + " backend is scripted but names no fixture "
                                                   "directory");
        return;
    }
    if (ref.model_name.empty())
        throw ConfigError(std::string(which) + " backend names no model");
    if (ref.endpoint.empty())
        throw ConfigError(std::string(which) + " backend '" + ref.model_name +
                          "' names no endpoint");
    if (ref.credential_env.empty())
        throw ConfigError(std::string(which) + " backend '" + ref.model_name +
                          "' names no credential environment variable");
}

}  // namespace

void validate(const RunConfig& config) {
    validate_backend_ref(config.decision_model, "decision-maker");
    validate_backend_ref(config.implementer_model, "implementer");
    if (config.max_function_retries < 0)
        throw ConfigError("max_function_retries must be >= 0");
    if (config.sandbox_timeout_s <= 0)
        throw ConfigError("sandbox_timeout must be > 0");
    if (config.module_parallelism < 1)
        throw ConfigError("module_parallelism must be >= 1");
    if (config.module_correction_budget < 0)
        throw ConfigError("module_correction_budget must be >= 0");
    if (config.kb_top_k < 0)
        throw ConfigError("kb_top_k must be >= 0");
    if (config.max_inflight_per_backend < 1)
        throw ConfigError("max_inflight_per_backend must be >= 1");
    if (config.sandbox_parallelism < 1)
        throw ConfigError("sandbox_parallelism must be >= 1");
}

}  // namespace autoforge
