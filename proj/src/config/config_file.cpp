#include "autoforge/config/config_file.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "autoforge/domain/errors.hpp"

namespace autoforge::config {

namespace {

using nlohmann::json;

llm::BackendRef backend_from_json(const json& j, const std::string& which) {
    llm::BackendRef ref;
    for (const auto& [key, value] : j.items()) {
        if (key == "kind") {
            const std::string kind = value.get<std::string>();
            if (kind == "remote")
                ref.kind = llm::BackendKind::remote;
            else if (kind == "scripted")
                ref.kind = llm::BackendKind::scripted;
            else
                throw ConfigError("config: unknown backend kind '" + kind + "' for " + which);
        } else if (key == "endpoint") {
            ref.endpoint = value.get<std::string>();
        } else if (key == "model") {
            ref.model_name = value.get<std::string>();
        } else if (key == "credential_env") {
            ref.credential_env = value.get<std::string>();
        } else if (key == "script_dir") {
            ref.script_dir = value.get<std::string>();
        } else {
            throw ConfigError("config: unknown key '" + key + "' in " + which + " backend");
        }
    }
    return ref;
}

const char* env(const char* name) { return std::getenv(name); }

void apply_backend_env(llm::BackendRef& ref, const std::string& prefix) {
    if (const char* script = env((prefix + "_SCRIPT").c_str())) {
        ref.kind = llm::BackendKind::scripted;
        ref.script_dir = script;
    }
    if (const char* endpoint = env((prefix + "_ENDPOINT").c_str())) {
        ref.kind = llm::BackendKind::remote;
        ref.endpoint = endpoint;
    }
    if (const char* model = env((prefix + "_MODEL").c_str())) ref.model_name = model;
    if (const char* credential = env((prefix + "_CREDENTIAL").c_str()))
        ref.credential_env = credential;
}

}  // namespace

SandboxBackendKind sandbox_backend_from_string(const std::string& text) {
    if (text == "subprocess") return SandboxBackendKind::subprocess;
    if (text == "container") return SandboxBackendKind::container;
    throw ConfigError("unknown sandbox backend '" + text +
                      "' (expected subprocess or container)");
}

AssemblyMode assembly_mode_from_string(const std::string& text) {
    if (text == "deterministic") return AssemblyMode::deterministic;
    if (text == "llm") return AssemblyMode::llm;
    throw ConfigError("unknown assembly mode '" + text + "' (expected deterministic or llm)");
}

ResolvedConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");

    ResolvedConfig config;
    RunConfig& run = config.run;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "decision")
                run.decision_model = backend_from_json(value, "decision");
            else if (key == "implementer")
                run.implementer_model = backend_from_json(value, "implementer");
            else if (key == "max_function_retries")
                run.max_function_retries = value.get<int>();
            else if (key == "module_parallelism")
                run.module_parallelism = value.get<int>();
            else if (key == "sandbox_timeout_s")
                run.sandbox_timeout_s = value.get<double>();
            else if (key == "assembly_mode")
                run.assembly_mode = assembly_mode_from_string(value.get<std::string>());
            else if (key == "template_dir")
                run.template_dir = value.get<std::string>();
            else if (key == "catalog_path")
                run.catalog_path = value.get<std::string>();
            else if (key == "run_root")
                run.run_root = value.get<std::string>();
            else if (key == "team_leader_kb")
                run.team_leader_kb = value.get<std::string>();
            else if (key == "coder_kb")
                run.coder_kb = value.get<std::string>();
            else if (key == "pair_programming")
                run.pair_programming = value.get<bool>();
            else if (key == "module_correction_budget")
                run.module_correction_budget = value.get<int>();
            else if (key == "kb_top_k")
                run.kb_top_k = value.get<int>();
            else if (key == "max_inflight_per_backend")
                run.max_inflight_per_backend = value.get<int>();
            else if (key == "sandbox_parallelism")
                run.sandbox_parallelism = value.get<int>();
            else if (key == "sandbox_backend")
                run.sandbox_backend = sandbox_backend_from_string(value.get<std::string>());
            else if (key == "prices")
                for (const auto& [model, price] : value.items())
                    config.prices[model] = {price.at("prompt_per_1k").get<double>(),
                                            price.at("completion_per_1k").get<double>()};
            else
                throw ConfigError("config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return config;
}

void apply_env_overrides(ResolvedConfig& config) {
    RunConfig& run = config.run;
    if (const char* value = env("AUTOFORGE_TEMPLATE_DIR")) run.template_dir = value;
    if (const char* value = env("AUTOFORGE_CATALOG")) run.catalog_path = value;
    if (const char* value = env("AUTOFORGE_RUN_ROOT")) run.run_root = value;
    if (const char* value = env("AUTOFORGE_SANDBOX"))
        run.sandbox_backend = sandbox_backend_from_string(value);
    apply_backend_env(run.decision_model, "AUTOFORGE_DECISION");
    apply_backend_env(run.implementer_model, "AUTOFORGE_IMPLEMENTER");
}

}  // namespace autoforge::config
