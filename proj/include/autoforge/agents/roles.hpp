#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "autoforge/agents/grammar.hpp"
#include "autoforge/agents/templates.hpp"
#include "autoforge/domain/types.hpp"
#include "autoforge/llm/gateway.hpp"
#include "autoforge/sandbox/sandbox.hpp"

namespace autoforge::agents {

// Result of the pair-programming review of a test script. A malformed
// review response degrades (the original script passes through with a
// note) instead of aborting.
struct ReviewResult {
    std::string test_source;
    bool revised = false;
    std::string note;  // non-empty when the review was skipped
};

// The five agent roles behind one facade: prompt assembly from templates,
// gateway calls with one reprompt on malformed output, and parsing of the
// responses into domain types.
//
// Fixture stage keys (CallContext.stage), frozen for scripted replay:
//   team_leader.split_modules        module_leader.split_functions
//   function_coordinator.refine      coder.draft
//   tester.draft_tests               coder.review_tests
//   coder.regenerate                 function_coordinator.assemble_module
//   module_leader.module_tests       function_coordinator.correct_module
//   team_leader.assemble_project
class AgentSuite {
public:
    AgentSuite(llm::Gateway& gateway, const TemplateStore& templates,
               std::vector<sandbox::CatalogImage> catalog);

    // Team Leader: project -> module plan + sandbox environment choice.
    // The chosen environment must come from the catalog. Malformed output
    // after one reprompt, an off-catalog environment, or an empty plan
    // abort with DecompositionError.
    ModulePlan split_module_thoughts(const ProjectRequirement& requirement,
                                     const std::string& knowledge_block);

    // Module Leader: module -> leaf function thoughts with named inputs and
    // outputs. Duplicate function names within the module are rejected.
    std::vector<FunctionThought> split_function_thoughts(const ModuleThought& module,
                                                         int module_index,
                                                         const ProjectRequirement& root);

    // Function Coordinator: thoughts -> strictly typed code signatures, one
    // per thought, order preserved, parameter counts matching the thoughts.
    std::vector<FunctionSignature> refine_function_thoughts(
        const std::vector<FunctionThought>& functions, const ModuleThought& module,
        const ProjectRequirement& root);

    // Coder: signature -> first draft. The response must carry exactly one
    // top-level function named like the signature. attempts = 1.
    CodeArtifact draft_function(const FunctionSignature& sig, const ModuleThought& module,
                                const ProjectRequirement& root, const TreeAddress& address,
                                const std::string& knowledge_block);

    // Tester: standalone test script for the draft; exits 0 on pass. The
    // script imports the function from the staged `solution` module.
    std::string draft_tests(const CodeArtifact& function_artifact, const FunctionSignature& sig,
                            const ModuleThought& module);

    // Coder reviews the Tester's script (pair programming), targeting
    // omitted imports and dependencies. Never throws on malformed output.
    ReviewResult review_tests(const std::string& test_source,
                              const CodeArtifact& function_artifact);

    // Coder: failed artifact + sandbox error report -> next attempt.
    // The caller passes the previous source as retrieved from the thought
    // pool; attempts increments by one.
    CodeArtifact regenerate_function(const FunctionSignature& sig, const CodeArtifact& previous,
                                     const std::string& error_report, int max_function_retries);

    // Function Coordinator: validated function artifacts -> module script.
    // Deterministic mode concatenates; llm mode asks the backend and falls
    // back to deterministic on grammar failure (note records the fallback).
    CodeArtifact assemble_module(const std::vector<CodeArtifact>& artifacts,
                                 const ModuleThought& module,
                                 const std::vector<FunctionThought>& functions,
                                 const TreeAddress& address, AssemblyMode mode,
                                 std::string* fallback_note = nullptr);

    // Module Leader: test script for the assembled module entry function.
    std::string draft_module_tests(const CodeArtifact& module_artifact,
                                   const ModuleThought& module);

    // Function Coordinator: failed module + error report -> corrected module.
    CodeArtifact correct_module(const CodeArtifact& module_artifact, const ModuleThought& module,
                                const std::string& error_report);

    // Team Leader: module scripts -> final project source with an entry
    // point wiring modules in plan order. Never validated.
    CodeArtifact assemble_project(const std::vector<CodeArtifact>& module_artifacts,
                                  const std::vector<ModuleThought>& modules,
                                  const ProjectRequirement& root, AssemblyMode mode,
                                  std::vector<std::string>* notes = nullptr);

    const std::vector<sandbox::CatalogImage>& catalog() const { return catalog_; }

private:
    std::string system_text(llm::AgentRole role) const;

    // One completion, one reprompt on GrammarError, then the error
    // propagates to the caller.
    std::string ask(const llm::CallContext& ctx, const std::string& template_name,
                    const std::map<std::string, std::string>& bindings,
                    const std::function<void(const std::string&)>& check);

    llm::Gateway& gateway_;
    const TemplateStore& templates_;
    std::vector<sandbox::CatalogImage> catalog_;
};

}  // namespace autoforge::agents
