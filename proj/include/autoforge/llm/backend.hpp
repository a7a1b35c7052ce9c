#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "autoforge/llm/backend_ref.hpp"
#include "autoforge/llm/message.hpp"

namespace autoforge::llm {

class Backend {
public:
    virtual ~Backend() = default;

    virtual Completion complete(const std::vector<ChatMessage>& messages,
                                const CompletionLimits& limits, const CallContext& ctx) = 0;

    virtual const BackendRef& ref() const = 0;
};

// Deterministic fixture-replay stand-in for a model. Responses live in the
// fixture directory as files named `<agent>.<stage>.<NNN>.txt` and are served
// in NNN order per (agent, stage) queue. Running a queue dry raises
// FixtureExhaustedError.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(BackendRef ref);

    Completion complete(const std::vector<ChatMessage>& messages, const CompletionLimits& limits,
                        const CallContext& ctx) override;

    const BackendRef& ref() const override { return ref_; }

    struct RecordedCall {
        std::string key;
        std::vector<ChatMessage> messages;
        CompletionLimits limits;
        std::string response;
    };

    // Transcript of every call served, in order. For test assertions.
    std::vector<RecordedCall> transcript() const;

    std::size_t remaining(const std::string& key) const;

private:
    BackendRef ref_;
    std::map<std::string, std::deque<std::string>> queues_;
    std::vector<RecordedCall> transcript_;
    mutable std::mutex mutex_;
};

// Client for an OpenAI-compatible chat-completions endpoint. Transport
// failures are retried up to `kTransportRetries` times with exponential
// backoff; malformed responses are never retried here (the agent layer owns
// reprompting).
class RemoteBackend : public Backend {
public:
    static constexpr int kTransportRetries = 2;

    explicit RemoteBackend(BackendRef ref);

    Completion complete(const std::vector<ChatMessage>& messages, const CompletionLimits& limits,
                        const CallContext& ctx) override;

    const BackendRef& ref() const override { return ref_; }

    // Delay before retry n (0-based). Exposed so tests can bound runtimes.
    static int backoff_ms(int attempt);

private:
    BackendRef ref_;
    std::string host_;         // scheme://host[:port]
    std::string path_prefix_;  // e.g. "/v1"
};

std::unique_ptr<Backend> make_backend(const BackendRef& ref);

// Deterministic rough token count used for scripted usage accounting.
long approx_token_count(const std::string& text);

}  // namespace autoforge::llm
