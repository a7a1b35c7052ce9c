#pragma once

#include <string>
#include <vector>

#include "autoforge/domain/types.hpp"
#include "autoforge/llm/message.hpp"

namespace autoforge::agents {

// Structured agent output lives between sentinel lines
// `<<<BEGIN role>>>` / `<<<END role>>>`. Inside the block, fields are
// `TAG: value` lines; repeated sub-blocks are separated by `---` lines.
// Code travels in standard triple-backtick fences with a language tag.
// Values are single logical lines: embedded newlines are escaped as the
// two-character sequence `\n` (and backslash as `\\`), so serialize/parse
// round-trips exactly.

std::string begin_sentinel(llm::AgentRole role);
std::string end_sentinel(llm::AgentRole role);

std::string escape_value(const std::string& value);
std::string unescape_value(const std::string& value);

// Text between the role's sentinels. Missing or out-of-order sentinels
// throw GrammarError naming the role.
std::string extract_block(const std::string& text, llm::AgentRole role);

// The sub-blocks of a sentinel block, split on `---` lines, blank-trimmed.
std::vector<std::string> split_subblocks(const std::string& block);

struct TagLine {
    std::string tag;
    std::string value;  // unescaped
};

// Parses `TAG: value` lines. Lines that are not tag lines, or duplicate
// tags, throw GrammarError mentioning `where`.
std::vector<TagLine> parse_tags(const std::string& subblock, const std::string& where);

// --- Module plan (Team Leader) -------------------------------------------

struct ParsedModule {
    std::string name;
    std::string description;

    bool operator==(const ParsedModule&) const = default;
};

struct ModulePlan {
    std::string environment;  // sandbox image name
    std::vector<ParsedModule> modules;

    bool operator==(const ModulePlan&) const = default;
};

std::string serialize_module_plan(const ModulePlan& plan);
ModulePlan parse_module_plan(const std::string& text);

// --- Function thoughts (Module Leader) ------------------------------------

struct ParsedFunction {
    std::string name;
    std::string description;
    std::vector<TypedField> inputs;
    std::vector<TypedField> outputs;

    bool operator==(const ParsedFunction&) const = default;
};

std::string serialize_function_thoughts(const std::vector<ParsedFunction>& functions);
std::vector<ParsedFunction> parse_function_thoughts(const std::string& text);

// --- Signatures (Function Coordinator) -------------------------------------

struct ParsedSignature {
    std::string function_name;
    std::string signature_text;
    std::string docstring;

    bool operator==(const ParsedSignature&) const = default;
};

std::string serialize_signatures(const std::vector<ParsedSignature>& signatures);
std::vector<ParsedSignature> parse_signatures(const std::string& text);

// --- Signature rule ---------------------------------------------------------

// `def name(p1: t1, ...) -> ret:` — every parameter and the return type
// must be stated. Throws GrammarError describing the violation.
void validate_signature_text(const std::string& signature_text);

// Number of parameters in a signature that passes the rule above.
int signature_param_count(const std::string& signature_text);

// Function name of a signature that passes the rule above.
std::string signature_function_name(const std::string& signature_text);

// --- Code fences ------------------------------------------------------------

// The body of the single triple-backtick fence in `text`. Zero or multiple
// fences throw GrammarError.
std::string extract_code_fence(const std::string& text);

// Names of `def` statements at column zero, in order of appearance.
std::vector<std::string> top_level_function_names(const std::string& source);

// True when the response contains a line that is exactly `NO_CHANGES`
// outside any code fence.
bool is_no_changes_response(const std::string& text);

}  // namespace autoforge::agents
