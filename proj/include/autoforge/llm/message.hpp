#pragma once

#include <optional>
#include <string>
#include <vector>

namespace autoforge::llm {

enum class MessageRole { system, user, assistant };

std::string to_string(MessageRole role);

struct ChatMessage {
    MessageRole role = MessageRole::user;
    std::string content;
};

inline ChatMessage system_message(std::string content) {
    return {MessageRole::system, std::move(content)};
}
inline ChatMessage user_message(std::string content) {
    return {MessageRole::user, std::move(content)};
}
inline ChatMessage assistant_message(std::string content) {
    return {MessageRole::assistant, std::move(content)};
}

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct Completion {
    std::string text;
    TokenUsage usage;
};

struct CompletionLimits {
    int max_tokens = 2048;
    // Unset means "use the role default" (0 for decision-makers,
    // 0.2 for implementers).
    std::optional<double> temperature;
};

// The five agent roles of the virtual development team.
enum class AgentRole { team_leader, module_leader, function_coordinator, coder, tester };

std::string to_string(AgentRole role);

// Team Leader, Module Leader and Function Coordinator decompose, refine and
// assemble; Coder and Tester only generate code.
bool is_decision_maker(AgentRole role);

// Identifies a call site for fixture replay and ledger attribution. Scripted
// fixtures are keyed by consumption order within (agent, stage), never by
// prompt content.
struct CallContext {
    AgentRole agent = AgentRole::team_leader;
    std::string stage;

    std::string fixture_key() const { return to_string(agent) + "." + stage; }
};

}  // namespace autoforge::llm
