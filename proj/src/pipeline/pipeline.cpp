#include "autoforge/pipeline/pipeline.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "autoforge/agents/assembly.hpp"
#include "autoforge/domain/errors.hpp"
#include "autoforge/llm/backend.hpp"
#include "autoforge/util/parallel.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::pipeline {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Stage stage) {
    switch (stage) {
        case Stage::planning: return "planning";
        case Stage::decomposing: return "decomposing";
        case Stage::implementing: return "implementing";
        case Stage::assembling_modules: return "assembling_modules";
        case Stage::validating_modules: return "validating_modules";
        case Stage::assembling_project: return "assembling_project";
        case Stage::done: return "done";
        case Stage::failed: return "failed";
    }
    return "failed";
}

std::string allocate_run_dir(const std::string& run_root, const std::string& run_id) {
    fs::create_directories(run_root);
    fs::path candidate = fs::path(run_root) / run_id;
    for (int suffix = 2; fs::exists(candidate); ++suffix)
        candidate = fs::path(run_root) / (run_id + "_" + std::to_string(suffix));
    fs::create_directories(candidate);
    return candidate.string();
}

namespace {

std::string read_binary_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot read input file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string requirement_payload(const ProjectRequirement& requirement) {
    std::string out = requirement.description;
    out += "\n\nInput files:\n";
    if (requirement.input_files.empty()) out += "none\n";
    for (const InputFile& file : requirement.input_files)
        out += "- " + file.path + " (" + to_string(file.kind) + ")\n";
    return out;
}

}  // namespace

Pipeline::Pipeline(RunConfig config, llm::PriceTable prices)
    : config_(std::move(config)), prices_(std::move(prices)) {
    validate(config_);
    gateway_ = std::make_unique<llm::Gateway>(llm::make_backend(config_.decision_model),
                                              llm::make_backend(config_.implementer_model),
                                              config_.max_inflight_per_backend);
    templates_ = std::make_unique<agents::TemplateStore>(config_.template_dir);
    agents_ = std::make_unique<agents::AgentSuite>(*gateway_, *templates_,
                                                   sandbox::load_catalog(config_.catalog_path));
    runner_ = std::make_unique<sandbox::SandboxRunner>(config_.sandbox_parallelism);
    if (!config_.team_leader_kb.empty())
        team_leader_kb_ =
            std::make_unique<kb::KnowledgeIndex>(kb::load_index(config_.team_leader_kb));
    if (!config_.coder_kb.empty())
        coder_kb_ = std::make_unique<kb::KnowledgeIndex>(kb::load_index(config_.coder_kb));
}

sandbox::SandboxSpec Pipeline::sandbox_spec_for(const std::string& image) const {
    sandbox::SandboxSpec spec;
    spec.image = image;
    spec.timeout_s = config_.sandbox_timeout_s;
    spec.backend = config_.sandbox_backend;
    return spec;
}

std::string Pipeline::next_sandbox_dir(const std::string& label) {
    std::lock_guard<std::mutex> lock(mutex_);
    char index[8];
    std::snprintf(index, sizeof(index), "%03d", sandbox_counter_++);
    return (fs::path(run_dir_) / "sandbox" / (std::string(index) + "__" + label)).string();
}

std::string Pipeline::knowledge_for(const kb::KnowledgeIndex* index,
                                    const std::string& query) const {
    if (index == nullptr) return "";
    kb::HashingEmbedder embedder(index->dimension);
    return kb::format_hits(kb::retrieve(*index, query, embedder, config_.kb_top_k));
}

void Pipeline::enter_stage(Stage next) {
    if (static_cast<int>(next) <= static_cast<int>(stage_))
        throw DomainError("stage order violation: " + to_string(stage_) + " -> " +
                          to_string(next));
    stage_ = next;
}

void Pipeline::write_snapshot(const std::string& name, const std::string& content) const {
    const fs::path dir = fs::path(run_dir_) / "snapshots";
    fs::create_directories(dir);
    std::ofstream out(dir / (name + ".txt"), std::ios::binary | std::ios::trunc);
    out << content;
}

void Pipeline::write_run_json(const RunSummary& summary) const {
    ordered_json j;
    j["id"] = summary.run_id;
    j["stage"] = to_string(summary.stage);
    j["environment"] = summary.environment;
    j["modules"] = ordered_json::array();
    for (const ModuleOutcome& module : summary.modules) {
        ordered_json m;
        m["index"] = module.index;
        m["name"] = module.name;
        m["status"] = to_string(module.status);
        m["corrections"] = module.corrections;
        m["functions"] = ordered_json::array();
        for (const FunctionOutcome& fn : module.functions) {
            ordered_json f;
            f["address"] = format_address(fn.address);
            f["name"] = fn.name;
            f["status"] = to_string(fn.status);
            f["attempts"] = fn.attempts;
            m["functions"].push_back(f);
        }
        j["modules"].push_back(m);
    }
    j["flagged"] = summary.flagged;
    if (!summary.failure_reason.empty()) j["failure_reason"] = summary.failure_reason;
    ordered_json cost;
    cost["models"] = ordered_json::array();
    for (const auto& line : summary.cost.models) {
        ordered_json model;
        model["model"] = line.model;
        model["requests"] = line.tally.requests;
        model["prompt_tokens"] = line.tally.prompt_tokens;
        model["completion_tokens"] = line.tally.completion_tokens;
        model["cost"] = line.cost;
        cost["models"].push_back(model);
    }
    cost["decision_maker_tokens"] =
        summary.cost.decision_maker.prompt_tokens + summary.cost.decision_maker.completion_tokens;
    cost["implementer_tokens"] =
        summary.cost.implementer.prompt_tokens + summary.cost.implementer.completion_tokens;
    cost["total"] = summary.cost.total_cost;
    j["cost"] = cost;

    std::ofstream out(fs::path(run_dir_) / "run.json", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
}

Pipeline::FunctionWork Pipeline::implement_function(
    const FunctionSignature& sig, const ModuleThought& module, const ProjectRequirement& root,
    const TreeAddress& address, const std::vector<sandbox::StagedFile>& inputs) {
    const std::string addr_text = format_address(address);

    CodeArtifact artifact = agents_->draft_function(
        sig, module, root, address, knowledge_for(coder_kb_.get(), sig.thought.description));
    pool_.append(llm::AgentRole::coder, "implementing", address, pool::ThoughtKind::function_code,
                 artifact.source);

    std::string test_source = agents_->draft_tests(artifact, sig, module);
    pool_.append(llm::AgentRole::tester, "implementing", address, pool::ThoughtKind::test_code,
                 test_source);

    if (config_.pair_programming) {
        agents::ReviewResult review = agents_->review_tests(test_source, artifact);
        if (!review.note.empty())
            pool_.append(llm::AgentRole::coder, "implementing", address, pool::ThoughtKind::note,
                         review.note);
        if (review.revised)
            pool_.append(llm::AgentRole::coder, "implementing", address,
                         pool::ThoughtKind::test_code, review.test_source);
        test_source = review.test_source;
    }

    while (true) {
        sandbox::SandboxSpec spec = sandbox_spec_for(module.hyper.runtime_environment);
        spec.host_run_dir = next_sandbox_dir("function_" + addr_text + "_attempt" +
                                             std::to_string(artifact.attempts));
        sandbox::ValidationOutcome outcome = runner_->run_validation(
            spec, artifact.source, test_source, inputs, "function_" + addr_text);
        if (outcome.passed) {
            artifact.validation = ValidationStatus::passed;
            break;
        }

        artifact.validation = ValidationStatus::failed;
        std::string report = outcome.result.stderr_text;
        if (outcome.result.timed_out)
            report = "validation timed out after " + std::to_string(config_.sandbox_timeout_s) +
                     "s\n" + report;
        pool_.append(llm::AgentRole::tester, "implementing", address,
                     pool::ThoughtKind::error_report, report);

        if (artifact.attempts > config_.max_function_retries) {
            artifact.validation = ValidationStatus::unvalidated_exhausted;
            pool_.append(llm::AgentRole::coder, "implementing", address, pool::ThoughtKind::note,
                         "retry budget exhausted after " + std::to_string(artifact.attempts) +
                             " generations");
            break;
        }

        // Backtracking: the previous draft comes from the thought pool, not
        // from any conversational memory.
        auto previous = pool_.latest(address, pool::ThoughtKind::function_code);
        if (!previous)
            throw PoolError("no previous draft in the pool for " + addr_text);
        CodeArtifact failed = artifact;
        failed.source = previous->payload;
        artifact = agents_->regenerate_function(sig, failed, report, config_.max_function_retries);
        pool_.append(llm::AgentRole::coder, "implementing", address,
                     pool::ThoughtKind::function_code, artifact.source);
    }

    validate(artifact, config_.max_function_retries);
    return {address, std::move(artifact)};
}

CodeArtifact Pipeline::validate_module(CodeArtifact module_artifact, const ModuleThought& module,
                                       int module_index,
                                       const std::vector<sandbox::StagedFile>& inputs,
                                       int* corrections_out) {
    const TreeAddress address{module_index};
    const std::string label = "module_" + std::to_string(module_index);

    // One test draft per module, reused across correction rounds.
    std::string test_source = agents_->draft_module_tests(module_artifact, module);
    pool_.append(llm::AgentRole::module_leader, "validating_modules", address,
                 pool::ThoughtKind::test_code, test_source);

    int corrections = 0;
    while (true) {
        sandbox::SandboxSpec spec = sandbox_spec_for(module.hyper.runtime_environment);
        spec.host_run_dir =
            next_sandbox_dir(label + "_round" + std::to_string(corrections));
        sandbox::ValidationOutcome outcome =
            runner_->run_validation(spec, module_artifact.source, test_source, inputs, label);
        if (outcome.passed) {
            module_artifact.validation = ValidationStatus::passed;
            break;
        }

        module_artifact.validation = ValidationStatus::failed;
        std::string report = outcome.result.stderr_text;
        if (outcome.result.timed_out)
            report = "module validation timed out\n" + report;
        pool_.append(llm::AgentRole::module_leader, "validating_modules", address,
                     pool::ThoughtKind::error_report, report);

        if (corrections >= config_.module_correction_budget) {
            module_artifact.validation = ValidationStatus::unvalidated_exhausted;
            pool_.append(llm::AgentRole::function_coordinator, "validating_modules", address,
                         pool::ThoughtKind::note,
                         "module correction budget exhausted after " +
                             std::to_string(corrections) + " corrections");
            break;
        }

        ++corrections;
        try {
            module_artifact = agents_->correct_module(module_artifact, module, report);
            pool_.append(llm::AgentRole::function_coordinator, "validating_modules", address,
                         pool::ThoughtKind::module_code, module_artifact.source);
        } catch (const DraftError& e) {
            // The round is consumed even when the correction response was
            // unusable; the module stays failed for the next round.
            pool_.append(llm::AgentRole::function_coordinator, "validating_modules", address,
                         pool::ThoughtKind::note,
                         std::string("correction round consumed without a usable fix: ") +
                             e.what());
            if (corrections >= config_.module_correction_budget) {
                module_artifact.validation = ValidationStatus::unvalidated_exhausted;
                break;
            }
        }
    }

    if (corrections_out) *corrections_out = corrections;
    return module_artifact;
}

RunResult Pipeline::run_project(const ProjectRequirement& requirement,
                                const std::string& input_root) {
    validate(requirement);
    run_dir_ = allocate_run_dir(config_.run_root, requirement.id);

    RunSummary summary;
    summary.run_id = requirement.id;
    summary.run_dir = run_dir_;

    if (gateway_->all_scripted()) {
        // Logical clock: scripted replays must be byte-identical, so journal
        // timestamps count appends instead of reading the wall clock.
        auto counter = std::make_shared<std::atomic<long>>(0);
        pool_.set_clock([counter] { return counter->fetch_add(1); });
    }
    pool_.attach_journal((fs::path(run_dir_) / "pool.jsonl").string());
    pool_.append(llm::AgentRole::team_leader, "planning", {}, pool::ThoughtKind::requirement,
                 requirement_payload(requirement));

    RunResult result;
    try {
        // --- planning -------------------------------------------------------
        agents::ModulePlan plan = agents_->split_module_thoughts(
            requirement, knowledge_for(team_leader_kb_.get(), requirement.description));
        summary.environment = plan.environment;
        write_snapshot("plan", agents::serialize_module_plan(plan));
        pool_.append(llm::AgentRole::team_leader, "planning", {}, pool::ThoughtKind::module_plan,
                     agents::serialize_module_plan(plan));

        DecompositionTree tree(requirement);
        const std::string workdir = requirement.workdir.empty() ? "work" : requirement.workdir;
        for (std::size_t i = 0; i < plan.modules.size(); ++i) {
            ModuleThought module;
            module.hyper.module_name = plan.modules[i].name;
            module.hyper.language = "python";
            module.hyper.runtime_environment = plan.environment;
            module.hyper.work_directory = workdir;
            module.description = plan.modules[i].description;
            module.index = static_cast<int>(i);
            module.parent_project = requirement.id;
            tree.add_module(module);
            pool_.register_address({static_cast<int>(i)});
        }

        if (plan_only_) {
            for (std::size_t i = 0; i < tree.module_count(); ++i) {
                ModuleOutcome outcome;
                outcome.index = static_cast<int>(i);
                outcome.name = tree.module_at(static_cast<int>(i)).hyper.module_name;
                summary.modules.push_back(std::move(outcome));
            }
            summary.stage = Stage::done;
            summary.cost = llm::ledger_report(gateway_->ledger(), prices_);
            write_run_json(summary);
            result.summary = summary;
            return result;
        }

        // --- decomposing ------------------------------------------------------
        enter_stage(Stage::decomposing);
        const int module_workers =
            gateway_->all_scripted() ? 1 : config_.module_parallelism;
        const std::size_t module_count = tree.module_count();
        std::vector<std::vector<FunctionThought>> thoughts(module_count);
        std::vector<std::vector<FunctionSignature>> signatures(module_count);
        util::parallel_for(module_count, module_workers, [&](std::size_t i) {
            const ModuleThought& module = tree.module_at(static_cast<int>(i));
            thoughts[i] =
                agents_->split_function_thoughts(module, static_cast<int>(i), requirement);
            signatures[i] = agents_->refine_function_thoughts(thoughts[i], module, requirement);
        });
        // Deterministic commit in tree order after the parallel phase.
        std::string functions_snapshot, signatures_snapshot;
        for (std::size_t i = 0; i < module_count; ++i) {
            const ModuleThought& module = tree.module_at(static_cast<int>(i));
            functions_snapshot += "# module " + std::to_string(i) + ": " +
                                  module.hyper.module_name + "\n";
            signatures_snapshot += "# module " + std::to_string(i) + ": " +
                                   module.hyper.module_name + "\n";
            std::vector<agents::ParsedFunction> parsed;
            std::vector<agents::ParsedSignature> parsed_sigs;
            for (std::size_t j = 0; j < thoughts[i].size(); ++j) {
                const int fn_index = tree.add_function(static_cast<int>(i), thoughts[i][j]);
                const TreeAddress address{static_cast<int>(i), fn_index};
                pool_.register_address(address);
                const FunctionThought& fn = thoughts[i][j];
                parsed.push_back({fn.name, fn.description, fn.inputs, fn.outputs});
                pool_.append(llm::AgentRole::module_leader, "decomposing", address,
                             pool::ThoughtKind::function_thought,
                             agents::serialize_function_thoughts({parsed.back()}));
                tree.set_signature(address, signatures[i][j]);
                parsed_sigs.push_back({signatures[i][j].thought.name,
                                       signatures[i][j].signature_text,
                                       signatures[i][j].docstring});
                pool_.append(llm::AgentRole::function_coordinator, "decomposing", address,
                             pool::ThoughtKind::signature,
                             agents::serialize_signatures({parsed_sigs.back()}));
            }
            functions_snapshot += agents::serialize_function_thoughts(parsed);
            signatures_snapshot += agents::serialize_signatures(parsed_sigs);
        }
        write_snapshot("functions", functions_snapshot);
        write_snapshot("signatures", signatures_snapshot);

        // --- implementing ------------------------------------------------------
        enter_stage(Stage::implementing);
        std::vector<sandbox::StagedFile> staged_inputs;
        if (!input_root.empty()) {
            for (const InputFile& file : requirement.input_files)
                staged_inputs.push_back(
                    {file.path, read_binary_file(fs::path(input_root) / file.path)});
        }

        std::vector<TreeAddress> leaf_addresses;
        for (std::size_t i = 0; i < module_count; ++i)
            for (std::size_t j = 0; j < tree.function_count(static_cast<int>(i)); ++j)
                leaf_addresses.push_back({static_cast<int>(i), static_cast<int>(j)});

        std::vector<CodeArtifact> function_artifacts(leaf_addresses.size());
        const int function_workers =
            gateway_->all_scripted() ? 1 : config_.sandbox_parallelism;
        util::parallel_for(leaf_addresses.size(), function_workers, [&](std::size_t n) {
            const TreeAddress& address = leaf_addresses[n];
            const ModuleThought& module = tree.module_at(address[0]);
            FunctionWork work = implement_function(tree.signature_at(address), module, requirement,
                                                   address, staged_inputs);
            function_artifacts[n] = std::move(work.artifact);
        });

        // --- assembling modules ---------------------------------------------------
        enter_stage(Stage::assembling_modules);
        std::vector<CodeArtifact> module_artifacts;
        std::size_t cursor = 0;
        for (std::size_t i = 0; i < module_count; ++i) {
            const ModuleThought& module = tree.module_at(static_cast<int>(i));
            std::vector<CodeArtifact> artifacts;
            for (std::size_t j = 0; j < tree.function_count(static_cast<int>(i)); ++j)
                artifacts.push_back(function_artifacts[cursor++]);
            std::string fallback_note;
            CodeArtifact assembled = agents_->assemble_module(
                artifacts, module, tree.functions(static_cast<int>(i)),
                {static_cast<int>(i)}, config_.assembly_mode, &fallback_note);
            if (!fallback_note.empty())
                pool_.append(llm::AgentRole::function_coordinator, "assembling_modules",
                             {static_cast<int>(i)}, pool::ThoughtKind::note, fallback_note);
            pool_.append(llm::AgentRole::function_coordinator, "assembling_modules",
                         {static_cast<int>(i)}, pool::ThoughtKind::module_code, assembled.source);
            module_artifacts.push_back(std::move(assembled));
        }

        // --- validating modules ------------------------------------------------------
        enter_stage(Stage::validating_modules);
        std::vector<int> corrections(module_count, 0);
        util::parallel_for(module_count, module_workers, [&](std::size_t i) {
            module_artifacts[i] =
                validate_module(std::move(module_artifacts[i]), tree.module_at(static_cast<int>(i)),
                                static_cast<int>(i), staged_inputs, &corrections[i]);
        });

        // --- assembling the project ----------------------------------------------------
        enter_stage(Stage::assembling_project);
        std::vector<std::string> notes;
        CodeArtifact project = agents_->assemble_project(module_artifacts, tree.modules(),
                                                         requirement, config_.assembly_mode,
                                                         &notes);
        for (const std::string& note : notes)
            pool_.append(llm::AgentRole::team_leader, "assembling_project", {},
                         pool::ThoughtKind::note, note);
        pool_.append(llm::AgentRole::team_leader, "assembling_project", {},
                     pool::ThoughtKind::project_code, project.source);

        const fs::path project_dir = fs::path(run_dir_) / "project";
        fs::create_directories(project_dir);
        std::ofstream main_py(project_dir / "main.py", std::ios::binary | std::ios::trunc);
        main_py << project.source;
        main_py.close();

        // --- summary ----------------------------------------------------------------------
        std::string artifacts_snapshot;
        cursor = 0;
        for (std::size_t i = 0; i < module_count; ++i) {
            ModuleOutcome module_outcome;
            module_outcome.index = static_cast<int>(i);
            module_outcome.name = tree.module_at(static_cast<int>(i)).hyper.module_name;
            module_outcome.status = module_artifacts[i].validation;
            module_outcome.corrections = corrections[i];
            for (std::size_t j = 0; j < tree.function_count(static_cast<int>(i)); ++j) {
                const CodeArtifact& artifact = function_artifacts[cursor++];
                FunctionOutcome fn_outcome;
                fn_outcome.address = artifact.origin;
                fn_outcome.name = tree.function_at(artifact.origin).name;
                fn_outcome.status = artifact.validation;
                fn_outcome.attempts = artifact.attempts;
                if (artifact.validation == ValidationStatus::unvalidated_exhausted)
                    summary.flagged.push_back(format_address(artifact.origin));
                artifacts_snapshot += "## " + format_address(artifact.origin) + " function " +
                                      to_string(artifact.validation) + " attempts=" +
                                      std::to_string(artifact.attempts) + "\n```python\n" +
                                      artifact.source + "```\n";
                module_outcome.functions.push_back(std::move(fn_outcome));
            }
            if (module_artifacts[i].validation == ValidationStatus::unvalidated_exhausted)
                summary.flagged.push_back(format_address({static_cast<int>(i)}));
            artifacts_snapshot += "## " + format_address({static_cast<int>(i)}) + " module " +
                                  to_string(module_artifacts[i].validation) + " attempts=" +
                                  std::to_string(module_artifacts[i].attempts) + "\n```python\n" +
                                  module_artifacts[i].source + "```\n";
            summary.modules.push_back(std::move(module_outcome));
        }
        artifacts_snapshot += "## root project " + to_string(project.validation) + "\n```python\n" +
                              project.source + "```\n";
        write_snapshot("artifacts", artifacts_snapshot);

        enter_stage(Stage::done);
        summary.stage = Stage::done;
        result.project = std::move(project);
    } catch (const DecompositionError& e) {
        summary.stage = Stage::failed;
        summary.failure_reason = e.what();
    } catch (const DraftError& e) {
        summary.stage = Stage::failed;
        summary.failure_reason = e.what();
    } catch (const AssemblyError& e) {
        summary.stage = Stage::failed;
        summary.failure_reason = e.what();
    } catch (const GrammarError& e) {
        summary.stage = Stage::failed;
        summary.failure_reason = e.what();
    } catch (const FixtureExhaustedError& e) {
        summary.stage = Stage::failed;
        summary.failure_reason = e.what();
    }

    summary.cost = llm::ledger_report(gateway_->ledger(), prices_);
    write_run_json(summary);
    result.summary = summary;
    return result;
}

}  // namespace autoforge::pipeline
