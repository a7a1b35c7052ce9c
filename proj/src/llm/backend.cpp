#include "autoforge/llm/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "autoforge/domain/errors.hpp"

namespace autoforge::llm {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(MessageRole role) {
    switch (role) {
        case MessageRole::system: return "system";
        case MessageRole::user: return "user";
        case MessageRole::assistant: return "assistant";
    }
    return "user";
}

std::string to_string(AgentRole role) {
    switch (role) {
        case AgentRole::team_leader: return "team_leader";
        case AgentRole::module_leader: return "module_leader";
        case AgentRole::function_coordinator: return "function_coordinator";
        case AgentRole::coder: return "coder";
        case AgentRole::tester: return "tester";
    }
    return "team_leader";
}

bool is_decision_maker(AgentRole role) {
    return role == AgentRole::team_leader || role == AgentRole::module_leader ||
           role == AgentRole::function_coordinator;
}

long approx_token_count(const std::string& text) {
    // ~4 characters per token; deterministic and good enough for fixtures.
    return static_cast<long>((text.size() + 3) / 4);
}

namespace {

long messages_token_count(const std::vector<ChatMessage>& messages) {
    long total = 0;
    for (const ChatMessage& m : messages) total += approx_token_count(m.content);
    return total;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read fixture file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// ScriptedBackend
// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(BackendRef ref) : ref_(std::move(ref)) {
    if (ref_.kind != BackendKind::scripted)
        throw ConfigError("ScriptedBackend requires a scripted BackendRef");
    const fs::path dir(ref_.script_dir);
    if (ref_.script_dir.empty() || !fs::is_directory(dir))
        throw ConfigError("scripted backend fixture directory not found: '" + ref_.script_dir +
                          "'");

    // Filenames look like `coder.draft.003.txt`; the last dotted component
    // before .txt is the queue position.
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        const std::string stem = file.stem().string();
        const std::size_t last_dot = stem.rfind('.');
        if (last_dot == std::string::npos) continue;
        const std::string key = stem.substr(0, last_dot);
        queues_[key].push_back(read_file(file));
    }
}

Completion ScriptedBackend::complete(const std::vector<ChatMessage>& messages,
                                     const CompletionLimits& limits, const CallContext& ctx) {
    std::lock_guard<std::mutex> lock(mutex_);
    const std::string key = ctx.fixture_key();
    auto it = queues_.find(key);
    if (it == queues_.end() || it->second.empty())
        throw FixtureExhaustedError("scripted backend '" + ref_.model_name +
                                    "' has no response left for queue '" + key + "'");
    std::string text = std::move(it->second.front());
    it->second.pop_front();

    transcript_.push_back({key, messages, limits, text});

    Completion out;
    out.text = std::move(text);
    out.usage.prompt_tokens = messages_token_count(messages);
    out.usage.completion_tokens = approx_token_count(out.text);
    return out;
}

std::vector<ScriptedBackend::RecordedCall> ScriptedBackend::transcript() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return transcript_;
}

std::size_t ScriptedBackend::remaining(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = queues_.find(key);
    return it == queues_.end() ? 0 : it->second.size();
}

// ---------------------------------------------------------------------------
// RemoteBackend
// ---------------------------------------------------------------------------

RemoteBackend::RemoteBackend(BackendRef ref) : ref_(std::move(ref)) {
    if (ref_.kind != BackendKind::remote)
        throw ConfigError("RemoteBackend requires a remote BackendRef");
    if (ref_.endpoint.empty())
        throw ConfigError("remote backend '" + ref_.model_name + "' has no endpoint");
    if (ref_.credential_env.empty())
        throw ConfigError("remote backend '" + ref_.model_name +
                          "' names no credential environment variable");

    // Split "http://host:port/v1" into client base and path prefix.
    const std::string& url = ref_.endpoint;
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must include a scheme: '" + url + "'");
    std::size_t path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = url;
        path_prefix_.clear();
    } else {
        host_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

int RemoteBackend::backoff_ms(int attempt) { return 100 * (1 << attempt); }

Completion RemoteBackend::complete(const std::vector<ChatMessage>& messages,
                                   const CompletionLimits& limits, const CallContext&) {
    const char* key = std::getenv(ref_.credential_env.c_str());
    if (key == nullptr || *key == '\0')
        throw ConfigError("credential variable '" + ref_.credential_env +
                          "' is unset; refusing to call '" + ref_.model_name + "'");

    json body;
    body["model"] = ref_.model_name;
    body["messages"] = json::array();
    for (const ChatMessage& m : messages)
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    body["max_tokens"] = limits.max_tokens;
    body["temperature"] = limits.temperature.value_or(0.0);
    const std::string payload = body.dump();

    std::string last_transport_error;
    for (int attempt = 0; attempt <= kTransportRetries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms(attempt - 1)));

        httplib::Client client(host_);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(120, 0);
        httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                               "application/json");

        if (!res) {
            last_transport_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_transport_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            std::string detail = res->body;
            if (detail.find("context_length") != std::string::npos ||
                detail.find("maximum context") != std::string::npos)
                throw TokenOverflowError("backend '" + ref_.model_name +
                                         "' reported token overflow: " + detail);
            throw Error("backend '" + ref_.model_name + "' returned HTTP " +
                        std::to_string(res->status) + ": " + detail);
        }

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& e) {
            throw Error("backend '" + ref_.model_name +
                        "' returned unparseable JSON: " + std::string(e.what()));
        }
        if (!reply.contains("choices") || reply["choices"].empty())
            throw Error("backend '" + ref_.model_name + "' returned no choices");

        const json& choice = reply["choices"][0];
        if (choice.value("finish_reason", "") == "length")
            throw TokenOverflowError("backend '" + ref_.model_name +
                                     "' truncated the completion (finish_reason=length)");

        Completion out;
        out.text = choice.at("message").value("content", "");
        if (reply.contains("usage")) {
            out.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
            out.usage.completion_tokens = reply["usage"].value("completion_tokens", 0L);
        } else {
            out.usage.prompt_tokens = messages_token_count(messages);
            out.usage.completion_tokens = approx_token_count(out.text);
        }
        return out;
    }

    throw TransportError("backend '" + ref_.model_name + "' unreachable after " +
                         std::to_string(kTransportRetries + 1) + " attempts: " +
                         last_transport_error);
}

std::unique_ptr<Backend> make_backend(const BackendRef& ref) {
    if (ref.kind == BackendKind::scripted) return std::make_unique<ScriptedBackend>(ref);
    return std::make_unique<RemoteBackend>(ref);
}

}  // namespace autoforge::llm
