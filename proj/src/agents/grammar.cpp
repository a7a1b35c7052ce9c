#include "autoforge/agents/grammar.hpp"

#include <cctype>

#include "autoforge/domain/errors.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::agents {

namespace {

const std::string kSeparator = "---";

bool is_tag_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }

// A tag line is `TAG: value` where TAG is uppercase letters/underscores.
bool split_tag_line(const std::string& line, std::string& tag, std::string& value) {
    std::size_t colon = line.find(':');
    if (colon == std::string::npos || colon == 0) return false;
    for (std::size_t i = 0; i < colon; ++i)
        if (!is_tag_char(line[i])) return false;
    tag = line.substr(0, colon);
    value = util::trim(line.substr(colon + 1));
    return true;
}

std::string find_tag(const std::vector<TagLine>& tags, const std::string& name,
                     const std::string& where) {
    for (const TagLine& t : tags)
        if (t.tag == name) return t.value;
    throw GrammarError(where + " is missing the " + name + " tag");
}

void reject_unknown_tags(const std::vector<TagLine>& tags,
                         const std::vector<std::string>& allowed, const std::string& where) {
    for (const TagLine& t : tags) {
        bool ok = false;
        for (const std::string& a : allowed)
            if (t.tag == a) ok = true;
        if (!ok) throw GrammarError(where + " carries unexpected tag " + t.tag);
    }
}

std::vector<TypedField> parse_field_list(const std::string& value, const std::string& where) {
    std::vector<TypedField> fields;
    const std::string trimmed = util::trim(value);
    if (trimmed.empty() || util::to_lower(trimmed) == "none") return fields;
    for (const std::string& piece : util::split_top_level_commas(trimmed)) {
        const std::string item = util::trim(piece);
        std::size_t colon = item.find(':');
        if (colon == std::string::npos || colon == 0)
            throw GrammarError(where + " field '" + item + "' is not of the form name: type");
        TypedField field;
        field.name = util::trim(item.substr(0, colon));
        field.type = util::trim(item.substr(colon + 1));
        if (!is_valid_identifier(field.name))
            throw GrammarError(where + " field name '" + field.name +
                               "' is not a valid identifier");
        if (field.type.empty())
            throw GrammarError(where + " field '" + field.name + "' has an empty type");
        fields.push_back(std::move(field));
    }
    return fields;
}

std::string render_field_list(const std::vector<TypedField>& fields) {
    if (fields.empty()) return "none";
    std::vector<std::string> parts;
    parts.reserve(fields.size());
    for (const TypedField& f : fields) parts.push_back(f.name + ": " + f.type);
    return util::join(parts, ", ");
}

}  // namespace

std::string begin_sentinel(llm::AgentRole role) {
    return "<<<BEGIN " + llm::to_string(role) + ">>>";
}

std::string end_sentinel(llm::AgentRole role) { return "<<<END " + llm::to_string(role) + ">>>"; }

std::string escape_value(const std::string& value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        if (c == '\\')
            out += "\\\\";
        else if (c == '\n')
            out += "\\n";
        else
            out += c;
    }
    return out;
}

std::string unescape_value(const std::string& value) {
    std::string out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\\' && i + 1 < value.size()) {
            char next = value[i + 1];
            if (next == '\\') {
                out += '\\';
                ++i;
                continue;
            }
            if (next == 'n') {
                out += '\n';
                ++i;
                continue;
            }
        }
        out += value[i];
    }
    return out;
}

std::string extract_block(const std::string& text, llm::AgentRole role) {
    const std::string begin = begin_sentinel(role);
    const std::string end = end_sentinel(role);
    std::size_t begin_pos = text.find(begin);
    if (begin_pos == std::string::npos)
        throw GrammarError("response has no " + begin + " sentinel");
    std::size_t body_start = begin_pos + begin.size();
    std::size_t end_pos = text.find(end, body_start);
    if (end_pos == std::string::npos)
        throw GrammarError("response has no " + end + " sentinel after " + begin);
    return text.substr(body_start, end_pos - body_start);
}

std::vector<std::string> split_subblocks(const std::string& block) {
    std::vector<std::string> out;
    std::string current;
    for (const std::string& line : util::split_lines(block)) {
        if (util::trim(line) == kSeparator) {
            out.push_back(current);
            current.clear();
        } else {
            current += line;
            current += '\n';
        }
    }
    out.push_back(current);
    return out;
}

std::vector<TagLine> parse_tags(const std::string& subblock, const std::string& where) {
    std::vector<TagLine> tags;
    for (const std::string& raw : util::split_lines(subblock)) {
        const std::string line = util::trim(raw);
        if (line.empty()) continue;
        std::string tag, value;
        if (!split_tag_line(line, tag, value))
            throw GrammarError(where + " contains a line that is not a TAG: value line: '" +
                               line + "'");
        for (const TagLine& existing : tags)
            if (existing.tag == tag)
                throw GrammarError(where + " repeats the " + tag + " tag");
        tags.push_back({tag, unescape_value(value)});
    }
    return tags;
}

// --- Module plan -------------------------------------------------------------

std::string serialize_module_plan(const ModulePlan& plan) {
    std::string out = begin_sentinel(llm::AgentRole::team_leader) + "\n";
    out += "ENVIRONMENT: " + escape_value(plan.environment) + "\n";
    for (const ParsedModule& m : plan.modules) {
        out += kSeparator + "\n";
        out += "MODULE_NAME: " + escape_value(m.name) + "\n";
        out += "MODULE_DESCRIPTION: " + escape_value(m.description) + "\n";
    }
    out += end_sentinel(llm::AgentRole::team_leader) + "\n";
    return out;
}

ModulePlan parse_module_plan(const std::string& text) {
    const std::string block = extract_block(text, llm::AgentRole::team_leader);
    const std::vector<std::string> subblocks = split_subblocks(block);

    const auto header_tags = parse_tags(subblocks[0], "plan header block");
    reject_unknown_tags(header_tags, {"ENVIRONMENT"}, "plan header block");

    ModulePlan plan;
    plan.environment = find_tag(header_tags, "ENVIRONMENT", "plan header block");
    if (plan.environment.empty())
        throw GrammarError("plan header block has an empty ENVIRONMENT value");

    for (std::size_t i = 1; i < subblocks.size(); ++i) {
        const std::string where = "module block " + std::to_string(i);
        const auto tags = parse_tags(subblocks[i], where);
        reject_unknown_tags(tags, {"MODULE_NAME", "MODULE_DESCRIPTION"}, where);
        ParsedModule module;
        module.name = find_tag(tags, "MODULE_NAME", where);
        module.description = find_tag(tags, "MODULE_DESCRIPTION", where);
        if (!is_valid_identifier(module.name))
            throw GrammarError(where + " has an invalid MODULE_NAME '" + module.name + "'");
        if (module.description.empty())
            throw GrammarError(where + " has an empty MODULE_DESCRIPTION");
        plan.modules.push_back(std::move(module));
    }
    if (plan.modules.empty()) throw GrammarError("plan contains no module blocks");
    return plan;
}

// --- Function thoughts --------------------------------------------------------

std::string serialize_function_thoughts(const std::vector<ParsedFunction>& functions) {
    std::string out = begin_sentinel(llm::AgentRole::module_leader) + "\n";
    for (std::size_t i = 0; i < functions.size(); ++i) {
        if (i > 0) out += kSeparator + "\n";
        const ParsedFunction& f = functions[i];
        out += "FUNCTION_NAME: " + escape_value(f.name) + "\n";
        out += "FUNCTION_DESCRIPTION: " + escape_value(f.description) + "\n";
        out += "INPUTS: " + escape_value(render_field_list(f.inputs)) + "\n";
        out += "OUTPUTS: " + escape_value(render_field_list(f.outputs)) + "\n";
    }
    out += end_sentinel(llm::AgentRole::module_leader) + "\n";
    return out;
}

std::vector<ParsedFunction> parse_function_thoughts(const std::string& text) {
    const std::string block = extract_block(text, llm::AgentRole::module_leader);
    std::vector<ParsedFunction> functions;
    const std::vector<std::string> subblocks = split_subblocks(block);
    for (std::size_t i = 0; i < subblocks.size(); ++i) {
        std::string where = "function block " + std::to_string(i + 1);
        const auto tags = parse_tags(subblocks[i], where);
        reject_unknown_tags(tags, {"FUNCTION_NAME", "FUNCTION_DESCRIPTION", "INPUTS", "OUTPUTS"},
                            where);
        ParsedFunction f;
        f.name = find_tag(tags, "FUNCTION_NAME", where);
        where = "function block '" + f.name + "'";
        if (!is_valid_identifier(f.name))
            throw GrammarError(where + " has an invalid FUNCTION_NAME");
        f.description = find_tag(tags, "FUNCTION_DESCRIPTION", where);
        f.inputs = parse_field_list(find_tag(tags, "INPUTS", where), where + " INPUTS");
        f.outputs = parse_field_list(find_tag(tags, "OUTPUTS", where), where + " OUTPUTS");
        functions.push_back(std::move(f));
    }
    if (functions.empty()) throw GrammarError("response contains no function blocks");
    return functions;
}

// --- Signatures -----------------------------------------------------------------

std::string serialize_signatures(const std::vector<ParsedSignature>& signatures) {
    std::string out = begin_sentinel(llm::AgentRole::function_coordinator) + "\n";
    for (std::size_t i = 0; i < signatures.size(); ++i) {
        if (i > 0) out += kSeparator + "\n";
        const ParsedSignature& s = signatures[i];
        out += "FUNCTION_NAME: " + escape_value(s.function_name) + "\n";
        out += "SIGNATURE: " + escape_value(s.signature_text) + "\n";
        out += "DOCSTRING: " + escape_value(s.docstring) + "\n";
    }
    out += end_sentinel(llm::AgentRole::function_coordinator) + "\n";
    return out;
}

std::vector<ParsedSignature> parse_signatures(const std::string& text) {
    const std::string block = extract_block(text, llm::AgentRole::function_coordinator);
    std::vector<ParsedSignature> signatures;
    const std::vector<std::string> subblocks = split_subblocks(block);
    for (std::size_t i = 0; i < subblocks.size(); ++i) {
        std::string where = "signature block " + std::to_string(i + 1);
        const auto tags = parse_tags(subblocks[i], where);
        reject_unknown_tags(tags, {"FUNCTION_NAME", "SIGNATURE", "DOCSTRING"}, where);
        ParsedSignature s;
        s.function_name = find_tag(tags, "FUNCTION_NAME", where);
        where = "signature block '" + s.function_name + "'";
        s.signature_text = find_tag(tags, "SIGNATURE", where);
        s.docstring = find_tag(tags, "DOCSTRING", where);
        if (s.docstring.empty()) throw GrammarError(where + " has an empty DOCSTRING");
        try {
            validate_signature_text(s.signature_text);
        } catch (const GrammarError& e) {
            throw GrammarError(where + ": " + e.what());
        }
        if (signature_function_name(s.signature_text) != s.function_name)
            throw GrammarError(where + " SIGNATURE names '" +
                               signature_function_name(s.signature_text) +
                               "' instead of the block's FUNCTION_NAME");
        signatures.push_back(std::move(s));
    }
    if (signatures.empty()) throw GrammarError("response contains no signature blocks");
    return signatures;
}

// --- Signature rule ----------------------------------------------------------------

namespace {

struct SignatureParts {
    std::string name;
    std::vector<std::string> params;  // raw `name: type` pieces
    std::string return_type;
};

SignatureParts split_signature(const std::string& signature_text) {
    const std::string text = util::trim(signature_text);
    if (!util::starts_with(text, "def "))
        throw GrammarError("signature must start with 'def '");
    std::size_t open = text.find('(');
    if (open == std::string::npos) throw GrammarError("signature has no parameter list");
    SignatureParts parts;
    parts.name = util::trim(text.substr(4, open - 4));
    if (!is_valid_identifier(parts.name))
        throw GrammarError("signature function name '" + parts.name +
                           "' is not a valid identifier");

    int depth = 0;
    std::size_t close = std::string::npos;
    for (std::size_t i = open; i < text.size(); ++i) {
        if (text[i] == '(' || text[i] == '[' || text[i] == '{') ++depth;
        if (text[i] == ')' || text[i] == ']' || text[i] == '}') {
            --depth;
            if (depth == 0) {
                close = i;
                break;
            }
        }
    }
    if (close == std::string::npos) throw GrammarError("signature parameter list never closes");

    const std::string param_text = util::trim(text.substr(open + 1, close - open - 1));
    if (!param_text.empty())
        for (const std::string& piece : util::split_top_level_commas(param_text))
            parts.params.push_back(util::trim(piece));

    std::string tail = util::trim(text.substr(close + 1));
    if (!util::starts_with(tail, "->"))
        throw GrammarError("signature must state a return type with '->'");
    tail = util::trim(tail.substr(2));
    if (tail.empty() || tail.back() != ':')
        throw GrammarError("signature must end with ':' after the return type");
    parts.return_type = util::trim(tail.substr(0, tail.size() - 1));
    if (parts.return_type.empty()) throw GrammarError("signature has an empty return type");
    return parts;
}

}  // namespace

void validate_signature_text(const std::string& signature_text) {
    const SignatureParts parts = split_signature(signature_text);
    for (const std::string& param : parts.params) {
        std::size_t colon = param.find(':');
        if (colon == std::string::npos || colon == 0)
            throw GrammarError("parameter '" + param + "' is missing a type annotation");
        const std::string name = util::trim(param.substr(0, colon));
        const std::string type = util::trim(param.substr(colon + 1));
        if (!is_valid_identifier(name))
            throw GrammarError("parameter name '" + name + "' is not a valid identifier");
        if (type.empty()) throw GrammarError("parameter '" + name + "' has an empty type");
    }
}

int signature_param_count(const std::string& signature_text) {
    return static_cast<int>(split_signature(signature_text).params.size());
}

std::string signature_function_name(const std::string& signature_text) {
    return split_signature(signature_text).name;
}

// --- Code fences --------------------------------------------------------------------

std::string extract_code_fence(const std::string& text) {
    const std::vector<std::string> lines = util::split_lines(text);
    std::string body;
    bool in_fence = false;
    int fences_seen = 0;
    for (const std::string& line : lines) {
        if (util::starts_with(util::trim(line), "```")) {
            if (!in_fence) {
                in_fence = true;
                ++fences_seen;
                if (fences_seen > 1)
                    throw GrammarError("response contains more than one code fence");
                body.clear();
            } else {
                in_fence = false;
            }
            continue;
        }
        if (in_fence) {
            body += line;
            body += '\n';
        }
    }
    if (in_fence) throw GrammarError("code fence never closes");
    if (fences_seen == 0) throw GrammarError("response contains no code fence");
    return body;
}

std::vector<std::string> top_level_function_names(const std::string& source) {
    std::vector<std::string> names;
    for (const std::string& line : util::split_lines(source)) {
        if (!util::starts_with(line, "def ")) continue;
        std::size_t open = line.find('(');
        if (open == std::string::npos) continue;
        const std::string name = util::trim(line.substr(4, open - 4));
        if (is_valid_identifier(name)) names.push_back(name);
    }
    return names;
}

bool is_no_changes_response(const std::string& text) {
    bool in_fence = false;
    for (const std::string& line : util::split_lines(text)) {
        const std::string trimmed = util::trim(line);
        if (util::starts_with(trimmed, "```")) {
            in_fence = !in_fence;
            continue;
        }
        if (!in_fence && trimmed == "NO_CHANGES") return true;
    }
    return false;
}

}  // namespace autoforge::agents
