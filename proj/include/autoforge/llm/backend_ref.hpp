#pragma once

#include <string>

namespace autoforge::llm {

enum class BackendKind { remote, scripted };

// Reference to a chat-completion backend. Remote refs never embed a secret:
// `credential_env` names the environment variable holding the API key.
struct BackendRef {
    BackendKind kind = BackendKind::scripted;
    std::string endpoint;        // remote only; base URL, e.g. "http://host:8080/v1"
    std::string model_name;
    std::string credential_env;  // remote only
    std::string script_dir;      // scripted only; fixture directory
};

}  // namespace autoforge::llm
