#pragma once

#include <string>

#include "autoforge/domain/types.hpp"
#include "autoforge/llm/gateway.hpp"

namespace autoforge::config {

struct ResolvedConfig {
    RunConfig run;
    llm::PriceTable prices;
};

// JSON config file; every key is optional and overlays the defaults.
// Unknown keys are rejected so typos surface immediately.
ResolvedConfig load_config_file(const std::string& path);

// Overlays AUTOFORGE_* environment variables (template dir, catalog, run
// root, sandbox backend, backend endpoints/credential names). Precedence:
// command-line flags > environment > config file > defaults; this function
// implements the middle layer.
void apply_env_overrides(ResolvedConfig& config);

SandboxBackendKind sandbox_backend_from_string(const std::string& text);
AssemblyMode assembly_mode_from_string(const std::string& text);

}  // namespace autoforge::config
