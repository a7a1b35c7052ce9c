#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "autoforge/bench/bench.hpp"
#include "autoforge/config/config_file.hpp"
#include "autoforge/config/manifest.hpp"
#include "autoforge/domain/errors.hpp"
#include "autoforge/kb/knowledge_base.hpp"
#include "autoforge/pipeline/pipeline.hpp"
#include "autoforge/pool/thought_pool.hpp"
#include "autoforge/util/strings.hpp"

namespace fs = std::filesystem;
using namespace autoforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailed = 1;
constexpr int kExitUsage = 2;

struct Overrides {
    std::string config_path;
    std::string backend_decision;
    std::string backend_implementer;
    std::string scripted_dir;
    std::string sandbox;
    int max_retries = -1;
    int parallelism = 0;
};

llm::BackendRef parse_backend_flag(const std::string& text) {
    if (util::starts_with(text, "scripted:")) {
        llm::BackendRef ref;
        ref.kind = llm::BackendKind::scripted;
        ref.script_dir = text.substr(std::string("scripted:").size());
        ref.model_name = "scripted";
        return ref;
    }
    const std::vector<std::string> parts = util::split(text, ',');
    if (parts.size() != 3)
        throw ConfigError("backend flag must be 'scripted:<dir>' or "
                          "'<model>,<endpoint>,<credential-env>', got '" +
                          text + "'");
    llm::BackendRef ref;
    ref.kind = llm::BackendKind::remote;
    ref.model_name = util::trim(parts[0]);
    ref.endpoint = util::trim(parts[1]);
    ref.credential_env = util::trim(parts[2]);
    return ref;
}

config::ResolvedConfig resolve_config(const Overrides& overrides) {
    config::ResolvedConfig cfg;
    if (!overrides.config_path.empty())
        cfg = config::load_config_file(overrides.config_path);
    config::apply_env_overrides(cfg);
    if (!overrides.scripted_dir.empty()) {
        llm::BackendRef scripted;
        scripted.kind = llm::BackendKind::scripted;
        scripted.script_dir = overrides.scripted_dir;
        scripted.model_name = "scripted";
        cfg.run.decision_model = scripted;
        cfg.run.implementer_model = scripted;
    }
    if (!overrides.backend_decision.empty())
        cfg.run.decision_model = parse_backend_flag(overrides.backend_decision);
    if (!overrides.backend_implementer.empty())
        cfg.run.implementer_model = parse_backend_flag(overrides.backend_implementer);
    if (!overrides.sandbox.empty())
        cfg.run.sandbox_backend = config::sandbox_backend_from_string(overrides.sandbox);
    if (overrides.max_retries >= 0) cfg.run.max_function_retries = overrides.max_retries;
    if (overrides.parallelism >= 1) {
        cfg.run.module_parallelism = overrides.parallelism;
        cfg.run.sandbox_parallelism = overrides.parallelism;
    }
    return cfg;
}

int cmd_run(const std::string& manifest_path, std::string input_root, bool dry_run,
            const Overrides& overrides) {
    ProjectRequirement requirement;
    try {
        requirement = config::requirement_from_manifest(config::load_manifest_file(manifest_path));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    if (input_root.empty()) {
        input_root = fs::path(manifest_path).parent_path().string();
        if (input_root.empty()) input_root = ".";
    }

    const config::ResolvedConfig cfg = resolve_config(overrides);
    pipeline::Pipeline pipe(cfg.run, cfg.prices);
    pipe.set_plan_only(dry_run);
    const pipeline::RunResult result = pipe.run_project(requirement, input_root);
    const pipeline::RunSummary& summary = result.summary;

    if (dry_run) {
        std::cout << "Environment: " << summary.environment << "\n";
        std::cout << "Modules:\n";
        for (const pipeline::ModuleOutcome& module : summary.modules)
            std::cout << "  " << module.index << ": " << module.name << "\n";
        std::cout << "Dry run: nothing was implemented or executed.\n";
        return kExitOk;
    }

    std::cout << "Run directory: " << summary.run_dir << "\n";
    std::cout << "Stage: " << pipeline::to_string(summary.stage) << "\n";
    if (!summary.failure_reason.empty())
        std::cout << "Failure: " << summary.failure_reason << "\n";
    for (const pipeline::ModuleOutcome& module : summary.modules) {
        std::cout << "Module " << module.index << " " << module.name << ": "
                  << to_string(module.status) << " (corrections=" << module.corrections << ")\n";
        for (const pipeline::FunctionOutcome& fn : module.functions)
            std::cout << "  " << format_address(fn.address) << " " << fn.name << ": "
                      << to_string(fn.status) << " attempts=" << fn.attempts << "\n";
    }
    if (!summary.flagged.empty())
        std::cout << "Flagged for review: " << util::join(summary.flagged, ", ") << "\n";
    std::cout << llm::render_cost_summary(summary.cost);
    return summary.stage == pipeline::Stage::done ? kExitOk : kExitRunFailed;
}

int cmd_bench(const std::string& fixtures_root, const std::string& generator_kind,
              const std::string& command, const std::string& report_dir,
              const std::string& compare_text, const Overrides& overrides) {
    const config::ResolvedConfig cfg = resolve_config(overrides);
    const bench::CompareMode mode = bench::compare_mode_from_string(compare_text);

    bench::ProjectGenerator generator;
    if (generator_kind == "command") {
        if (command.empty())
            throw ConfigError("--generator command requires --command <shell command>");
        generator = bench::make_external_generator(command);
    } else if (generator_kind == "pipeline") {
        generator = [cfg, report_dir](const bench::ProjectFixture& fixture) {
            config::ResolvedConfig per_fixture = cfg;
            per_fixture.run.run_root = (fs::path(report_dir) / "runs").string();
            const fs::path script_dir = fs::path(fixture.directory) / "script";
            if (fs::is_directory(script_dir)) {
                llm::BackendRef scripted;
                scripted.kind = llm::BackendKind::scripted;
                scripted.script_dir = script_dir.string();
                scripted.model_name = "scripted";
                per_fixture.run.decision_model = scripted;
                per_fixture.run.implementer_model = scripted;
            }
            pipeline::Pipeline pipe(per_fixture.run, per_fixture.prices);
            const pipeline::RunResult result = pipe.run_project(
                fixture.requirement, (fs::path(fixture.directory) / "inputs").string());
            if (result.summary.stage != pipeline::Stage::done)
                throw Error("pipeline run failed: " + result.summary.failure_reason);
            return bench::GeneratedProject{result.project, result.summary.cost};
        };
    } else {
        throw ConfigError("unknown generator '" + generator_kind +
                          "' (expected pipeline or command)");
    }

    const std::vector<sandbox::CatalogImage> catalog = sandbox::load_catalog(cfg.run.catalog_path);
    sandbox::SandboxSpec base_spec;
    base_spec.image = catalog.front().name;
    base_spec.timeout_s = cfg.run.sandbox_timeout_s;
    base_spec.backend = cfg.run.sandbox_backend;

    sandbox::SandboxRunner runner(cfg.run.sandbox_parallelism);
    bench::BenchOptions options;
    options.mode = mode;
    options.work_root = (fs::path(report_dir) / "work").string();
    options.parallelism = cfg.run.sandbox_parallelism;

    const bench::BenchmarkReport report =
        bench::run_benchmark(fixtures_root, generator, runner, base_spec, options);
    bench::write_report_files(report, report_dir);
    std::cout << bench::render_report(report);
    std::cout << "Report written to " << report_dir << "\n";
    return report.fixture_errors.empty() ? kExitOk : kExitRunFailed;
}

int cmd_kb_build(const std::string& entries_path, const std::string& out_path, int dimension) {
    const kb::HashingEmbedder embedder(dimension);
    const kb::KnowledgeIndex index = kb::build_index(entries_path, embedder);
    kb::save_index(index, out_path);
    std::cout << "Indexed " << index.entries.size() << " entries into " << out_path << "\n";
    return kExitOk;
}

int cmd_kb_query(const std::string& index_path, const std::string& text, int k) {
    const kb::KnowledgeIndex index = kb::load_index(index_path);
    const kb::HashingEmbedder embedder(index.dimension);
    const std::vector<kb::RetrievalHit> hits = kb::retrieve(index, text, embedder, k);
    if (hits.empty()) {
        std::cout << "No results.\n";
        return kExitOk;
    }
    for (std::size_t i = 0; i < hits.size(); ++i) {
        char score[32];
        std::snprintf(score, sizeof(score), "%.4f", hits[i].score);
        const std::vector<std::string> task = util::split_lines(hits[i].entry.task_text);
        std::cout << (i + 1) << ". id=" << hits[i].entry.id << " score=" << score
                  << " task: " << (task.empty() ? "" : task.front()) << "\n";
    }
    return kExitOk;
}

int cmd_inspect(const std::string& run_dir, const std::string& address_text,
                const std::string& kind_text) {
    const fs::path journal = fs::path(run_dir) / "pool.jsonl";
    if (!fs::is_regular_file(journal))
        throw ConfigError("no pool journal under " + run_dir);

    bool filter_address = false;
    TreeAddress address;
    if (!address_text.empty()) {
        try {
            address = parse_address(address_text);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        filter_address = true;
    }
    bool filter_kind = false;
    pool::ThoughtKind kind = pool::ThoughtKind::note;
    if (!kind_text.empty()) {
        try {
            kind = pool::thought_kind_from_string(kind_text);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        filter_kind = true;
    }

    const pool::ThoughtPool pool = pool::ThoughtPool::load_journal(journal.string());
    for (const pool::ThoughtRecord& record : pool.all()) {
        if (filter_address && record.address != address) continue;
        if (filter_kind && record.kind != kind) continue;
        std::cout << "id=" << record.id << " address=" << format_address(record.address)
                  << " kind=" << to_string(record.kind) << " author=" << to_string(record.author)
                  << " stage=" << record.stage << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical multi-agent code generation for image-processing projects"};
    app.require_subcommand(1);

    Overrides overrides;
    app.add_option("--config", overrides.config_path, "JSON configuration file");
    app.add_option("--backend-decision", overrides.backend_decision,
                   "Decision-maker backend: 'scripted:<dir>' or "
                   "'<model>,<endpoint>,<credential-env>'");
    app.add_option("--backend-implementer", overrides.backend_implementer,
                   "Implementer backend, same format as --backend-decision");
    app.add_option("--scripted", overrides.scripted_dir,
                   "Replay both backends from this fixture directory");
    app.add_option("--sandbox", overrides.sandbox, "Sandbox backend: container or subprocess")
        ->check(CLI::IsMember({"container", "subprocess"}));
    app.add_option("--max-retries", overrides.max_retries,
                   "Regeneration budget after a function's first draft");
    app.add_option("--parallelism", overrides.parallelism,
                   "Worker cap for module branches and sandbox executions");

    auto* run = app.add_subcommand("run", "Generate a project from a manifest");
    std::string manifest_path, input_root;
    bool dry_run = false;
    run->add_option("manifest", manifest_path, "Project manifest file")->required();
    run->add_option("--input-root", input_root,
                    "Directory holding the manifest's input files (default: manifest directory)");
    run->add_flag("--dry-run", dry_run, "Stop after planning; print the module plan");

    auto* bench_cmd = app.add_subcommand("bench", "Evaluate a generator against fixtures");
    std::string fixtures_root, generator_kind = "pipeline", command, report_dir = "bench_report";
    std::string compare_text = "image_tolerance";
    bench_cmd->add_option("fixtures", fixtures_root, "Directory of fixture subdirectories")
        ->required();
    bench_cmd->add_option("--generator", generator_kind, "Project generator: pipeline or command")
        ->check(CLI::IsMember({"pipeline", "command"}));
    bench_cmd->add_option("--command", command,
                          "Shell command for --generator command; must write the project to "
                          "$AUTOFORGE_PROJECT_OUT");
    bench_cmd->add_option("--report", report_dir, "Report output directory");
    bench_cmd->add_option("--compare", compare_text, "Output comparison: exact or image_tolerance")
        ->check(CLI::IsMember({"exact", "image_tolerance"}));

    auto* kb_cmd = app.add_subcommand("kb", "Knowledge-base tooling");
    kb_cmd->require_subcommand(1);
    auto* kb_build = kb_cmd->add_subcommand("build", "Embed entries into an index file");
    std::string entries_path, index_out;
    int dimension = 256;
    kb_build->add_option("entries", entries_path, "JSONL entries file")->required();
    kb_build->add_option("--out", index_out, "Index output path")->required();
    kb_build->add_option("--dim", dimension, "Embedding dimension");
    auto* kb_query = kb_cmd->add_subcommand("query", "Retrieve the top-k entries for a text");
    std::string index_path, query_text;
    int top_k = 2;
    kb_query->add_option("index", index_path, "Index file built by 'kb build'")->required();
    kb_query->add_option("--text", query_text, "Query text")->required();
    kb_query->add_option("-k,--top-k", top_k, "Number of results");

    auto* inspect = app.add_subcommand("inspect", "List thought records of a finished run");
    std::string run_dir, address_text, kind_text;
    inspect->add_option("run_dir", run_dir, "Run directory containing pool.jsonl")->required();
    inspect->add_option("--address", address_text, "Only records at this tree address");
    inspect->add_option("--kind", kind_text, "Only records of this kind");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run->parsed()) return cmd_run(manifest_path, input_root, dry_run, overrides);
        if (bench_cmd->parsed())
            return cmd_bench(fixtures_root, generator_kind, command, report_dir, compare_text,
                             overrides);
        if (kb_build->parsed()) return cmd_kb_build(entries_path, index_out, dimension);
        if (kb_query->parsed()) return cmd_kb_query(index_path, query_text, top_k);
        if (inspect->parsed()) return cmd_inspect(run_dir, address_text, kind_text);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRunFailed;
    }
    return kExitUsage;
}
