#include "autoforge/agents/roles.hpp"

#include <set>

#include "autoforge/agents/assembly.hpp"
#include "autoforge/domain/errors.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::agents {

namespace {

std::string render_input_files(const ProjectRequirement& requirement) {
    if (requirement.input_files.empty()) return "none";
    std::string out;
    for (const InputFile& file : requirement.input_files)
        out += "- " + file.path + " (" + to_string(file.kind) + ")\n";
    return out;
}

std::string render_thoughts(const std::vector<FunctionThought>& functions) {
    std::vector<ParsedFunction> parsed;
    parsed.reserve(functions.size());
    for (const FunctionThought& f : functions)
        parsed.push_back({f.name, f.description, f.inputs, f.outputs});
    return serialize_function_thoughts(parsed);
}

std::string or_none(const std::string& text) { return text.empty() ? "none" : text; }

// The draft/regenerate contract: exactly one top-level function, named as
// the signature names it.
std::string parse_single_function_fence(const std::string& response,
                                        const std::string& expected_name) {
    const std::string source = extract_code_fence(response);
    const std::vector<std::string> names = top_level_function_names(source);
    if (names.size() != 1)
        throw GrammarError("code fence must contain exactly one top-level function, found " +
                           std::to_string(names.size()));
    if (names[0] != expected_name)
        throw GrammarError("code fence defines '" + names[0] + "' instead of '" + expected_name +
                           "'");
    return source;
}

}  // namespace

AgentSuite::AgentSuite(llm::Gateway& gateway, const TemplateStore& templates,
                       std::vector<sandbox::CatalogImage> catalog)
    : gateway_(gateway), templates_(templates), catalog_(std::move(catalog)) {
    if (catalog_.empty()) throw ConfigError("agent suite needs a non-empty environment catalog");
}

std::string AgentSuite::system_text(llm::AgentRole role) const {
    return templates_.raw("system_" + llm::to_string(role));
}

std::string AgentSuite::ask(const llm::CallContext& ctx, const std::string& template_name,
                            const std::map<std::string, std::string>& bindings,
                            const std::function<void(const std::string&)>& check) {
    std::vector<llm::ChatMessage> messages{
        llm::system_message(system_text(ctx.agent)),
        llm::user_message(templates_.render(template_name, bindings)),
    };
    llm::Completion first = gateway_.complete(ctx, messages);
    try {
        check(first.text);
        return first.text;
    } catch (const GrammarError& e) {
        messages.push_back(llm::assistant_message(first.text));
        messages.push_back(llm::user_message(
            std::string("Your previous response could not be used: ") + e.what() +
            "\nReply again, following the required output format exactly."));
        llm::Completion second = gateway_.complete(ctx, messages);
        check(second.text);  // a second failure propagates to the caller
        return second.text;
    }
}

ModulePlan AgentSuite::split_module_thoughts(const ProjectRequirement& requirement,
                                             const std::string& knowledge_block) {
    validate(requirement);
    const llm::CallContext ctx{llm::AgentRole::team_leader, "split_modules"};
    ModulePlan plan;
    std::string raw;
    try {
        raw = ask(ctx, "team_leader_split_modules",
                  {
                      {"requirement", requirement.description},
                      {"input_files", render_input_files(requirement)},
                      {"environment_catalog", sandbox::render_catalog(catalog_)},
                      {"environment_hint", or_none(requirement.environment_hint)},
                      {"knowledge", knowledge_block},
                  },
                  [&plan](const std::string& text) { plan = parse_module_plan(text); });
    } catch (const GrammarError& e) {
        throw DecompositionError("module split failed the output grammar after one reprompt: " +
                                 std::string(e.what()));
    }
    (void)raw;
    if (!sandbox::catalog_contains(catalog_, plan.environment))
        throw DecompositionError("module split chose environment '" + plan.environment +
                                 "', which is not in the configured catalog");
    std::set<std::string> names;
    for (const ParsedModule& module : plan.modules)
        if (!names.insert(module.name).second)
            throw DecompositionError("module split repeats the module name '" + module.name +
                                     "'");
    return plan;
}

std::vector<FunctionThought> AgentSuite::split_function_thoughts(
    const ModuleThought& module, int module_index, const ProjectRequirement& root) {
    const llm::CallContext ctx{llm::AgentRole::module_leader, "split_functions"};
    std::vector<ParsedFunction> parsed;
    try {
        ask(ctx, "module_leader_split_functions",
            {
                {"requirement", root.description},
                {"module_name", module.hyper.module_name},
                {"module_description", module.description},
                {"environment", module.hyper.runtime_environment},
            },
            [&parsed](const std::string& text) { parsed = parse_function_thoughts(text); });
    } catch (const GrammarError& e) {
        throw DecompositionError("function split for module '" + module.hyper.module_name +
                                 "' failed the output grammar after one reprompt: " +
                                 std::string(e.what()));
    }
    std::set<std::string> names;
    std::vector<FunctionThought> functions;
    for (ParsedFunction& p : parsed) {
        if (!names.insert(p.name).second)
            throw DecompositionError("module '" + module.hyper.module_name +
                                     "' repeats the function name '" + p.name + "'");
        FunctionThought thought;
        thought.name = std::move(p.name);
        thought.description = std::move(p.description);
        thought.inputs = std::move(p.inputs);
        thought.outputs = std::move(p.outputs);
        thought.parent = {module_index};
        functions.push_back(std::move(thought));
    }
    return functions;
}

std::vector<FunctionSignature> AgentSuite::refine_function_thoughts(
    const std::vector<FunctionThought>& functions, const ModuleThought& module,
    const ProjectRequirement& root) {
    if (functions.empty())
        throw DomainError("refinement needs at least one function thought");
    for (const FunctionThought& f : functions)
        if (f.parent != functions.front().parent)
            throw DomainError("refinement batch mixes functions from different modules");

    const llm::CallContext ctx{llm::AgentRole::function_coordinator, "refine"};
    std::vector<ParsedSignature> parsed;
    auto check = [&parsed, &functions](const std::string& text) {
        parsed = parse_signatures(text);
        if (parsed.size() != functions.size())
            throw GrammarError("expected " + std::to_string(functions.size()) +
                               " signature blocks, found " + std::to_string(parsed.size()));
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            if (parsed[i].function_name != functions[i].name)
                throw GrammarError("signature block " + std::to_string(i + 1) + " names '" +
                                   parsed[i].function_name + "' but thought " +
                                   std::to_string(i + 1) + " is '" + functions[i].name + "'");
            const int params = signature_param_count(parsed[i].signature_text);
            if (params != static_cast<int>(functions[i].inputs.size()))
                throw GrammarError("signature for '" + functions[i].name + "' declares " +
                                   std::to_string(params) + " parameters but the thought has " +
                                   std::to_string(functions[i].inputs.size()) + " inputs");
        }
    };
    try {
        ask(ctx, "function_coordinator_refine",
            {
                {"requirement", root.description},
                {"module_name", module.hyper.module_name},
                {"module_description", module.description},
                {"function_thoughts", render_thoughts(functions)},
            },
            check);
    } catch (const GrammarError& e) {
        throw DecompositionError("signature refinement for module '" + module.hyper.module_name +
                                 "' failed after one reprompt: " + std::string(e.what()));
    }

    std::vector<FunctionSignature> signatures;
    signatures.reserve(parsed.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        FunctionSignature sig;
        sig.thought = functions[i];
        sig.signature_text = parsed[i].signature_text;
        sig.docstring = parsed[i].docstring;
        signatures.push_back(std::move(sig));
    }
    return signatures;
}

CodeArtifact AgentSuite::draft_function(const FunctionSignature& sig, const ModuleThought& module,
                                        const ProjectRequirement& root,
                                        const TreeAddress& address,
                                        const std::string& knowledge_block) {
    const llm::CallContext ctx{llm::AgentRole::coder, "draft"};
    std::string source;
    try {
        ask(ctx, "coder_draft",
            {
                {"requirement", root.description},
                {"module_name", module.hyper.module_name},
                {"module_description", module.description},
                {"signature", sig.signature_text},
                {"docstring", sig.docstring},
                {"knowledge", knowledge_block},
            },
            [&source, &sig](const std::string& text) {
                source = parse_single_function_fence(text, sig.thought.name);
            });
    } catch (const GrammarError& e) {
        throw DraftError("function draft for '" + sig.thought.name +
                         "' failed after one reprompt: " + std::string(e.what()));
    }
    CodeArtifact artifact;
    artifact.level = ArtifactLevel::function;
    artifact.source = source;
    artifact.origin = address;
    artifact.validation = ValidationStatus::untested;
    artifact.attempts = 1;
    return artifact;
}

std::string AgentSuite::draft_tests(const CodeArtifact& function_artifact,
                                    const FunctionSignature& sig, const ModuleThought& module) {
    if (function_artifact.validation != ValidationStatus::untested)
        throw DomainError("tests are drafted against the untested first draft");
    const llm::CallContext ctx{llm::AgentRole::tester, "draft_tests"};
    std::string source;
    try {
        ask(ctx, "tester_draft_tests",
            {
                {"module_name", module.hyper.module_name},
                {"signature", sig.signature_text},
                {"docstring", sig.docstring},
                {"function_code", function_artifact.source},
            },
            [&source](const std::string& text) { source = extract_code_fence(text); });
    } catch (const GrammarError& e) {
        throw DraftError("test draft for '" + sig.thought.name +
                         "' failed after one reprompt: " + std::string(e.what()));
    }
    return source;
}

ReviewResult AgentSuite::review_tests(const std::string& test_source,
                                      const CodeArtifact& function_artifact) {
    if (test_source.empty()) throw DomainError("review needs a test script");
    if (function_artifact.source.empty()) throw DomainError("review needs the function source");
    const llm::CallContext ctx{llm::AgentRole::coder, "review_tests"};
    std::vector<llm::ChatMessage> messages{
        llm::system_message(system_text(ctx.agent)),
        llm::user_message(templates_.render("coder_review_tests",
                                            {
                                                {"function_code", function_artifact.source},
                                                {"test_code", test_source},
                                            })),
    };
    llm::Completion completion = gateway_.complete(ctx, messages);

    ReviewResult result;
    if (is_no_changes_response(completion.text)) {
        result.test_source = test_source;
        result.revised = false;
        return result;
    }
    try {
        result.test_source = extract_code_fence(completion.text);
        result.revised = result.test_source != test_source;
    } catch (const GrammarError& e) {
        // Degradation, not abort: the unreviewed script is still usable.
        result.test_source = test_source;
        result.revised = false;
        result.note = std::string("test review skipped (malformed review response: ") +
                      e.what() + ")";
    }
    return result;
}

CodeArtifact AgentSuite::regenerate_function(const FunctionSignature& sig,
                                             const CodeArtifact& previous,
                                             const std::string& error_report,
                                             int max_function_retries) {
    if (previous.validation != ValidationStatus::failed)
        throw DomainError("regeneration requires a failed artifact");
    if (previous.attempts > max_function_retries)
        throw DomainError("retry budget exhausted for '" + sig.thought.name + "': attempts " +
                          std::to_string(previous.attempts) + " > max retries " +
                          std::to_string(max_function_retries));
    const llm::CallContext ctx{llm::AgentRole::coder, "regenerate"};
    std::string source;
    try {
        ask(ctx, "coder_regenerate",
            {
                {"signature", sig.signature_text},
                {"docstring", sig.docstring},
                {"previous_code", previous.source},
                {"error_report", error_report},
            },
            [&source, &sig](const std::string& text) {
                source = parse_single_function_fence(text, sig.thought.name);
            });
    } catch (const GrammarError& e) {
        throw DraftError("regeneration for '" + sig.thought.name +
                         "' failed after one reprompt: " + std::string(e.what()));
    }
    CodeArtifact artifact;
    artifact.level = ArtifactLevel::function;
    artifact.source = source;
    artifact.origin = previous.origin;
    artifact.validation = ValidationStatus::untested;
    artifact.attempts = previous.attempts + 1;
    return artifact;
}

CodeArtifact AgentSuite::assemble_module(const std::vector<CodeArtifact>& artifacts,
                                         const ModuleThought& module,
                                         const std::vector<FunctionThought>& functions,
                                         const TreeAddress& address, AssemblyMode mode,
                                         std::string* fallback_note) {
    if (artifacts.empty())
        throw AssemblyError("module '" + module.hyper.module_name +
                            "' has no function artifacts to assemble");
    for (const CodeArtifact& artifact : artifacts)
        if (artifact.validation != ValidationStatus::passed &&
            artifact.validation != ValidationStatus::unvalidated_exhausted)
            throw AssemblyError("module '" + module.hyper.module_name +
                                "' received an artifact still pending validation");

    CodeArtifact out;
    out.level = ArtifactLevel::module;
    out.origin = address;
    out.validation = ValidationStatus::untested;
    out.attempts = 1;

    if (mode == AssemblyMode::llm) {
        std::string functions_code;
        for (const CodeArtifact& artifact : artifacts) functions_code += artifact.source + "\n";
        auto check = [&artifacts, &out](const std::string& text) {
            const std::string source = extract_code_fence(text);
            for (const CodeArtifact& artifact : artifacts) {
                const std::string body = split_imports(artifact.source).body;
                if (source.find(body) == std::string::npos)
                    throw GrammarError(
                        "assembled module drops a function body; every function must appear "
                        "verbatim");
            }
            out.source = source;
        };
        try {
            const llm::CallContext ctx{llm::AgentRole::function_coordinator, "assemble_module"};
            ask(ctx, "function_coordinator_assemble_module",
                {
                    {"module_name", module.hyper.module_name},
                    {"module_description", module.description},
                    {"entry_name", module_entry_name(module.hyper.module_name)},
                    {"functions_code", functions_code},
                },
                check);
            return out;
        } catch (const GrammarError& e) {
            if (fallback_note)
                *fallback_note = "module assembly fell back to deterministic mode: " +
                                 std::string(e.what());
        }
    }
    out.source = assemble_module_source(artifacts, module, functions);
    return out;
}

std::string AgentSuite::draft_module_tests(const CodeArtifact& module_artifact,
                                           const ModuleThought& module) {
    if (module_artifact.level != ArtifactLevel::module)
        throw DomainError("module tests need a module-level artifact");
    const llm::CallContext ctx{llm::AgentRole::module_leader, "module_tests"};
    std::string source;
    try {
        ask(ctx, "module_leader_module_tests",
            {
                {"module_name", module.hyper.module_name},
                {"module_description", module.description},
                {"entry_name", module_entry_name(module.hyper.module_name)},
                {"module_code", module_artifact.source},
            },
            [&source](const std::string& text) { source = extract_code_fence(text); });
    } catch (const GrammarError& e) {
        throw DraftError("module test draft for '" + module.hyper.module_name +
                         "' failed after one reprompt: " + std::string(e.what()));
    }
    return source;
}

CodeArtifact AgentSuite::correct_module(const CodeArtifact& module_artifact,
                                        const ModuleThought& module,
                                        const std::string& error_report) {
    if (module_artifact.validation != ValidationStatus::failed)
        throw DomainError("module correction requires a failed module artifact");
    const llm::CallContext ctx{llm::AgentRole::function_coordinator, "correct_module"};
    std::string source;
    try {
        ask(ctx, "function_coordinator_correct_module",
            {
                {"module_name", module.hyper.module_name},
                {"module_code", module_artifact.source},
                {"error_report", error_report},
            },
            [&source](const std::string& text) { source = extract_code_fence(text); });
    } catch (const GrammarError& e) {
        throw DraftError("module correction for '" + module.hyper.module_name +
                         "' failed after one reprompt: " + std::string(e.what()));
    }
    CodeArtifact out = module_artifact;
    out.source = source;
    out.validation = ValidationStatus::untested;
    out.attempts = module_artifact.attempts + 1;
    return out;
}

CodeArtifact AgentSuite::assemble_project(const std::vector<CodeArtifact>& module_artifacts,
                                          const std::vector<ModuleThought>& modules,
                                          const ProjectRequirement& root, AssemblyMode mode,
                                          std::vector<std::string>* notes) {
    if (module_artifacts.empty()) throw AssemblyError("no module artifacts to assemble");

    CodeArtifact out;
    out.level = ArtifactLevel::project;
    out.origin = {};
    out.validation = ValidationStatus::untested;  // the project is never re-validated
    out.attempts = 1;

    if (mode == AssemblyMode::llm) {
        std::string modules_code;
        for (const CodeArtifact& artifact : module_artifacts)
            modules_code += artifact.source + "\n";
        auto check = [&module_artifacts, &out](const std::string& text) {
            const std::string source = extract_code_fence(text);
            for (const CodeArtifact& artifact : module_artifacts) {
                const std::string body = split_imports(artifact.source).body;
                if (source.find(body) == std::string::npos)
                    throw GrammarError(
                        "assembled project drops a module body; every module must appear "
                        "verbatim");
            }
            out.source = source;
        };
        try {
            const llm::CallContext ctx{llm::AgentRole::team_leader, "assemble_project"};
            ask(ctx, "team_leader_assemble_project",
                {
                    {"requirement", root.description},
                    {"modules_code", modules_code},
                },
                check);
            return out;
        } catch (const GrammarError& e) {
            if (notes)
                notes->push_back("project assembly fell back to deterministic mode: " +
                                 std::string(e.what()));
        }
    }

    ProjectAssembly assembly = assemble_project_source(module_artifacts, modules, root);
    out.source = assembly.source;
    if (notes)
        for (std::string& note : assembly.collision_notes) notes->push_back(std::move(note));
    return out;
}

}  // namespace autoforge::agents
