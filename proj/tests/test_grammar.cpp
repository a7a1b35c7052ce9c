#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "autoforge/agents/grammar.hpp"
#include "autoforge/domain/errors.hpp"

using namespace autoforge;
using namespace autoforge::agents;

namespace {

// Deterministic generator of structured plans with adversarial values:
// embedded newlines, backslashes, colons, dashes and hash marks. Values
// carry no leading/trailing whitespace (tag values are trimmed on parse).
struct RandomPlans {
    std::mt19937 rng{20240817};

    int range(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

    std::string identifier() {
        static const char* heads = "abcdefghijklmnopqrstuvwxyz_";
        static const char* body = "abcdefghijklmnopqrstuvwxyz_0123456789";
        std::string out(1, heads[range(0, 26)]);
        const int len = range(2, 10);
        for (int i = 0; i < len; ++i) out += body[range(0, 36)];
        return out;
    }

    std::string prose() {
        static const std::vector<std::string> words = {
            "load",  "the",   "image",   "and:",    "write",    "a\\path", "53%",
            "mask",  "-",     "#edges",  "pixels",  "then",     "crop",    "it",
            "124x64"};
        std::string out = words[range(0, static_cast<int>(words.size()) - 1)];
        const int len = range(1, 8);
        for (int i = 0; i < len; ++i) {
            out += range(0, 4) == 0 ? "\n" : " ";
            out += words[range(0, static_cast<int>(words.size()) - 1)];
        }
        return out;
    }

    std::string type_text() {
        static const std::vector<std::string> types = {
            "int",          "str",           "float",
            "list[int]",    "dict[str, int]", "tuple[int, int]",
            "'Image.Image'", "np.ndarray",    "Callable[[int], int]"};
        return types[range(0, static_cast<int>(types.size()) - 1)];
    }

    std::vector<TypedField> fields() {
        std::vector<TypedField> out;
        const int n = range(0, 3);
        for (int i = 0; i < n; ++i) out.push_back({identifier(), type_text()});
        return out;
    }

    ModulePlan module_plan() {
        ModulePlan plan;
        plan.environment = identifier();
        const int n = range(1, 4);
        for (int i = 0; i < n; ++i) plan.modules.push_back({identifier(), prose()});
        return plan;
    }

    std::vector<ParsedFunction> function_thoughts() {
        std::vector<ParsedFunction> out;
        const int n = range(1, 4);
        for (int i = 0; i < n; ++i) out.push_back({identifier(), prose(), fields(), fields()});
        return out;
    }

    std::vector<ParsedSignature> signatures() {
        std::vector<ParsedSignature> out;
        const int n = range(1, 3);
        for (int i = 0; i < n; ++i) {
            ParsedSignature sig;
            sig.function_name = identifier();
            std::string params;
            const int k = range(0, 3);
            for (int p = 0; p < k; ++p) {
                if (p > 0) params += ", ";
                params += identifier() + ": " + type_text();
            }
            sig.signature_text =
                "def " + sig.function_name + "(" + params + ") -> " + type_text() + ":";
            sig.docstring = prose();
            out.push_back(std::move(sig));
        }
        return out;
    }
};

}  // namespace

TEST_CASE("value escaping round-trips newlines and backslashes") {
    for (const std::string value :
         {std::string("plain"), std::string("two\nlines"), std::string("back\\slash"),
          std::string("\\n literal"), std::string("mix\\\nboth\\\\end")}) {
        CHECK(unescape_value(escape_value(value)) == value);
    }
    CHECK(escape_value("a\nb") == "a\\nb");
    CHECK(escape_value("a\\b") == "a\\\\b");
}

TEST_CASE("100 randomized plans reach a serialize-parse fixed point") {
    RandomPlans gen;
    for (int round = 0; round < 100; ++round) {
        const ModulePlan plan = gen.module_plan();
        const std::string s1 = serialize_module_plan(plan);
        const ModulePlan parsed = parse_module_plan(s1);
        CHECK(parsed == plan);
        CHECK(serialize_module_plan(parsed) == s1);

        const std::vector<ParsedFunction> functions = gen.function_thoughts();
        const std::string f1 = serialize_function_thoughts(functions);
        const std::vector<ParsedFunction> fparsed = parse_function_thoughts(f1);
        CHECK(fparsed == functions);
        CHECK(serialize_function_thoughts(fparsed) == f1);

        const std::vector<ParsedSignature> sigs = gen.signatures();
        const std::string g1 = serialize_signatures(sigs);
        const std::vector<ParsedSignature> gparsed = parse_signatures(g1);
        CHECK(gparsed == sigs);
        CHECK(serialize_signatures(gparsed) == g1);
    }
}

TEST_CASE("malformed module plans fail naming the offending block") {
    auto message_of = [](const std::string& text) {
        try {
            parse_module_plan(text);
        } catch (const GrammarError& e) {
            return std::string(e.what());
        }
        return std::string();  // empty = did not throw
    };

    // No BEGIN sentinel at all.
    CHECK(message_of("ENVIRONMENT: x\n").find("<<<BEGIN team_leader>>>") != std::string::npos);
    // BEGIN without END.
    CHECK(message_of("<<<BEGIN team_leader>>>\nENVIRONMENT: x\n")
              .find("<<<END team_leader>>>") != std::string::npos);

    const std::string head = "<<<BEGIN team_leader>>>\nENVIRONMENT: env\n";
    const std::string tail = "<<<END team_leader>>>\n";

    // Module block missing its description names module block 1.
    CHECK(message_of(head + "---\nMODULE_NAME: good_name\n" + tail).find("module block 1") !=
          std::string::npos);
    // Second module block broken names module block 2, not block 1.
    CHECK(message_of(head + "---\nMODULE_NAME: a\nMODULE_DESCRIPTION: fine\n" +
                     "---\nMODULE_NAME: b\nstray line\n" + tail)
              .find("module block 2") != std::string::npos);
    // Duplicate tag.
    CHECK(message_of(head + "---\nMODULE_NAME: a\nMODULE_NAME: b\nMODULE_DESCRIPTION: d\n" + tail)
              .find("repeats") != std::string::npos);
    // Unknown tag.
    CHECK(message_of(head + "---\nMODULE_NAME: a\nMODULE_DESCRIPTION: d\nEXTRA: no\n" + tail)
              .find("EXTRA") != std::string::npos);
    // Invalid module name.
    CHECK(message_of(head + "---\nMODULE_NAME: not valid\nMODULE_DESCRIPTION: d\n" + tail)
              .find("MODULE_NAME") != std::string::npos);
    // Empty environment.
    CHECK(message_of("<<<BEGIN team_leader>>>\nENVIRONMENT:\n---\nMODULE_NAME: a\n"
                     "MODULE_DESCRIPTION: d\n" +
                     tail)
              .find("ENVIRONMENT") != std::string::npos);
    // No modules at all.
    CHECK(message_of(head + tail).find("no module blocks") != std::string::npos);

    // Every case above must actually have thrown.
    CHECK(message_of(head + "---\nMODULE_NAME: ok\nMODULE_DESCRIPTION: fine\n" + tail).empty());
}

TEST_CASE("malformed function thoughts and signatures fail loudly") {
    const std::string fn_head = "<<<BEGIN module_leader>>>\n";
    const std::string fn_tail = "<<<END module_leader>>>\n";
    CHECK_THROWS_WITH_AS(
        parse_function_thoughts(fn_head + "FUNCTION_NAME: f\nFUNCTION_DESCRIPTION: d\n"
                                          "INPUTS: broken field\nOUTPUTS: none\n" +
                                fn_tail),
        doctest::Contains("name: type"), GrammarError);
    CHECK_THROWS_WITH_AS(
        parse_function_thoughts(fn_head + "FUNCTION_NAME: f\nINPUTS: none\nOUTPUTS: none\n" +
                                fn_tail),
        doctest::Contains("FUNCTION_DESCRIPTION"), GrammarError);

    const std::string sig_head = "<<<BEGIN function_coordinator>>>\n";
    const std::string sig_tail = "<<<END function_coordinator>>>\n";
    // Signature whose name disagrees with the block's FUNCTION_NAME.
    CHECK_THROWS_WITH_AS(
        parse_signatures(sig_head + "FUNCTION_NAME: f\nSIGNATURE: def g() -> int:\n"
                                    "DOCSTRING: d\n" +
                         sig_tail),
        doctest::Contains("FUNCTION_NAME"), GrammarError);
    // Untyped parameter.
    CHECK_THROWS_AS(parse_signatures(sig_head + "FUNCTION_NAME: f\n"
                                                "SIGNATURE: def f(x) -> int:\nDOCSTRING: d\n" +
                                     sig_tail),
                    GrammarError);
}

TEST_CASE("signature rule accepts full annotations and rejects partial ones") {
    CHECK_NOTHROW(validate_signature_text("def f() -> None:"));
    CHECK_NOTHROW(validate_signature_text("def f(a: int, b: dict[str, int]) -> list[int]:"));
    CHECK_NOTHROW(validate_signature_text("def f(img: 'Image.Image') -> 'Image.Image':"));
    CHECK(signature_param_count("def f(a: int, b: tuple[int, int]) -> int:") == 2);
    CHECK(signature_param_count("def f() -> int:") == 0);
    CHECK(signature_function_name("def load_image(path: str) -> 'Image':") == "load_image");

    CHECK_THROWS_AS(validate_signature_text("def f(a) -> int:"), GrammarError);
    CHECK_THROWS_AS(validate_signature_text("def f(a: int)"), GrammarError);
    CHECK_THROWS_AS(validate_signature_text("def f(a: int) -> :"), GrammarError);
    CHECK_THROWS_AS(validate_signature_text("def f(a: int) -> int"), GrammarError);
    CHECK_THROWS_AS(validate_signature_text("f(a: int) -> int:"), GrammarError);
    CHECK_THROWS_AS(validate_signature_text("def 9f(a: int) -> int:"), GrammarError);
    CHECK_THROWS_AS(validate_signature_text("def f(a: int -> int:"), GrammarError);
}

TEST_CASE("code fence extraction is strict about fence count") {
    CHECK(extract_code_fence("before\n```python\nx = 1\n```\nafter\n") == "x = 1\n");
    CHECK(extract_code_fence("```\ndef f():\n    pass\n```") == "def f():\n    pass\n");
    CHECK_THROWS_WITH_AS(extract_code_fence("no fences here"), doctest::Contains("no code fence"),
                         GrammarError);
    CHECK_THROWS_WITH_AS(extract_code_fence("```python\nx = 1\n"),
                         doctest::Contains("never closes"), GrammarError);
    CHECK_THROWS_WITH_AS(extract_code_fence("```\na\n```\n```\nb\n```"),
                         doctest::Contains("more than one"), GrammarError);
}

TEST_CASE("top-level function names ignore nested definitions") {
    const std::string source =
        "import os\n"
        "def outer(a: int) -> int:\n"
        "    def inner():\n"
        "        pass\n"
        "    return a\n"
        "def second() -> None:\n"
        "    pass\n";
    CHECK(top_level_function_names(source) == std::vector<std::string>{"outer", "second"});
}

TEST_CASE("NO_CHANGES detection ignores fenced occurrences") {
    CHECK(is_no_changes_response("NO_CHANGES"));
    CHECK(is_no_changes_response("  NO_CHANGES  \n"));
    CHECK(is_no_changes_response("The tests look right.\nNO_CHANGES\n"));
    CHECK_FALSE(is_no_changes_response("```\nNO_CHANGES\n```"));
    CHECK_FALSE(is_no_changes_response("NO_CHANGES_REALLY"));
    CHECK_FALSE(is_no_changes_response("nothing here"));
}

TEST_CASE("subblock splitting keeps separators out of the pieces") {
    const std::vector<std::string> blocks = split_subblocks("a\n---\nb\nc\n---\nd\n");
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0] == "a\n");
    CHECK(blocks[1] == "b\nc\n");
    CHECK(blocks[2] == "d\n");
}
