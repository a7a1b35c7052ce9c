#pragma once

#include <memory>
#include <string>
#include <vector>

#include "autoforge/agents/roles.hpp"
#include "autoforge/domain/tree.hpp"
#include "autoforge/domain/types.hpp"
#include "autoforge/kb/knowledge_base.hpp"
#include "autoforge/llm/gateway.hpp"
#include "autoforge/pool/thought_pool.hpp"
#include "autoforge/sandbox/sandbox.hpp"

namespace autoforge::pipeline {

// Global pipeline stage; transitions are strictly forward and no stage is
// revisited. Each stage completes for every branch before the next begins.
enum class Stage {
    planning,
    decomposing,
    implementing,
    assembling_modules,
    validating_modules,
    assembling_project,
    done,
    failed,
};

std::string to_string(Stage stage);

struct FunctionOutcome {
    TreeAddress address;
    std::string name;
    ValidationStatus status = ValidationStatus::untested;
    int attempts = 0;
};

struct ModuleOutcome {
    int index = 0;
    std::string name;
    ValidationStatus status = ValidationStatus::untested;
    int corrections = 0;
    std::vector<FunctionOutcome> functions;
};

struct RunSummary {
    std::string run_id;
    Stage stage = Stage::planning;
    std::string environment;
    std::vector<ModuleOutcome> modules;
    std::vector<std::string> flagged;  // addresses left unvalidated_exhausted
    std::string failure_reason;        // set when stage == failed
    llm::CostSummary cost;
    std::string run_dir;
};

struct RunResult {
    CodeArtifact project;  // empty source when the run failed before assembly
    RunSummary summary;
};

// The orchestrator: forward decomposition, per-function implementation
// loops with pair programming and sandbox validation, backward assembly
// with single-shot module validation, and a final never-validated project
// assembly. One Pipeline instance drives one run.
class Pipeline {
public:
    explicit Pipeline(RunConfig config, llm::PriceTable prices = {});

    // `input_root` is the directory holding the requirement's input files;
    // when empty, no files are staged into validation sandboxes.
    // Decomposition and draft failures end the run with stage=failed in the
    // summary; sandbox environment and configuration errors propagate.
    RunResult run_project(const ProjectRequirement& requirement,
                          const std::string& input_root = "");

    // When set, stop after the planning stage: the module plan is produced
    // and snapshotted but nothing is implemented or executed.
    void set_plan_only(bool plan_only) { plan_only_ = plan_only; }

    llm::Gateway& gateway() { return *gateway_; }
    sandbox::SandboxRunner& runner() { return *runner_; }
    pool::ThoughtPool& thought_pool() { return pool_; }
    const RunConfig& config() const { return config_; }

private:
    struct FunctionWork {
        TreeAddress address;
        CodeArtifact artifact;
    };

    FunctionWork implement_function(const FunctionSignature& sig, const ModuleThought& module,
                                    const ProjectRequirement& root, const TreeAddress& address,
                                    const std::vector<sandbox::StagedFile>& inputs);

    CodeArtifact validate_module(CodeArtifact module_artifact, const ModuleThought& module,
                                 int module_index,
                                 const std::vector<sandbox::StagedFile>& inputs,
                                 int* corrections_out);

    sandbox::SandboxSpec sandbox_spec_for(const std::string& image) const;
    std::string next_sandbox_dir(const std::string& label);
    std::string knowledge_for(const kb::KnowledgeIndex* index, const std::string& query) const;
    void enter_stage(Stage next);
    void write_snapshot(const std::string& name, const std::string& content) const;
    void write_run_json(const RunSummary& summary) const;

    RunConfig config_;
    llm::PriceTable prices_;
    std::unique_ptr<llm::Gateway> gateway_;
    std::unique_ptr<agents::TemplateStore> templates_;
    std::unique_ptr<agents::AgentSuite> agents_;
    std::unique_ptr<sandbox::SandboxRunner> runner_;
    pool::ThoughtPool pool_;
    std::unique_ptr<kb::KnowledgeIndex> team_leader_kb_;
    std::unique_ptr<kb::KnowledgeIndex> coder_kb_;

    Stage stage_ = Stage::planning;
    bool plan_only_ = false;
    std::string run_dir_;
    int sandbox_counter_ = 0;
    std::mutex mutex_;
};

// Creates `<run_root>/<run_id>` (or `<run_id>_2`, `_3`, ... when taken) and
// returns the path.
std::string allocate_run_dir(const std::string& run_root, const std::string& run_id);

}  // namespace autoforge::pipeline
