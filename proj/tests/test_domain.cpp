#include <doctest.h>

#include "autoforge/domain/errors.hpp"
#include "autoforge/domain/tree.hpp"
#include "autoforge/domain/types.hpp"

using namespace autoforge;

namespace {

ProjectRequirement demo_requirement() {
    ProjectRequirement req;
    req.id = "demo";
    req.description = "Read an image and transform it.";
    req.input_files = {{"photo.png", FileKind::image}};
    return req;
}

ModuleThought demo_module(const std::string& name, int index) {
    ModuleThought module;
    module.hyper.module_name = name;
    module.hyper.runtime_environment = "vision-baseline";
    module.hyper.work_directory = "work";
    module.description = "does something";
    module.index = index;
    module.parent_project = "demo";
    return module;
}

FunctionThought demo_function(const std::string& name, const TreeAddress& parent) {
    FunctionThought fn;
    fn.name = name;
    fn.description = "computes";
    fn.inputs = {{"path", "str"}};
    fn.outputs = {{"image", "PIL image"}};
    fn.parent = parent;
    return fn;
}

}  // namespace

TEST_CASE("address formatting and parsing are inverse") {
    CHECK(format_address({}) == "root");
    CHECK(format_address({1}) == "1");
    CHECK(format_address({1, 0}) == "1.0");
    CHECK(parse_address("root") == TreeAddress{});
    CHECK(parse_address("2") == TreeAddress{2});
    CHECK(parse_address("2.7") == TreeAddress{2, 7});
    for (const TreeAddress addr :
         {TreeAddress{}, TreeAddress{0}, TreeAddress{3, 1}, TreeAddress{10, 12}})
        CHECK(parse_address(format_address(addr)) == addr);
    CHECK_THROWS_AS(parse_address(""), Error);
    CHECK_THROWS_AS(parse_address("a.b"), Error);
    CHECK_THROWS_AS(parse_address("1..2"), Error);
    CHECK_THROWS_AS(parse_address("-1"), Error);
}

TEST_CASE("identifier rule") {
    CHECK(is_valid_identifier("load_image"));
    CHECK(is_valid_identifier("_x9"));
    CHECK_FALSE(is_valid_identifier(""));
    CHECK_FALSE(is_valid_identifier("9lives"));
    CHECK_FALSE(is_valid_identifier("has space"));
    CHECK_FALSE(is_valid_identifier("has-dash"));
}

TEST_CASE("safe relative path rule") {
    CHECK(is_safe_relative_path("photo.png"));
    CHECK(is_safe_relative_path("sub/dir/photo.png"));
    CHECK_FALSE(is_safe_relative_path("/abs/photo.png"));
    CHECK_FALSE(is_safe_relative_path("../escape.png"));
    CHECK_FALSE(is_safe_relative_path("sub/../../escape.png"));
    CHECK_FALSE(is_safe_relative_path(""));
}

TEST_CASE("requirement validation rejects broken inputs") {
    CHECK_NOTHROW(validate(demo_requirement()));

    ProjectRequirement no_id = demo_requirement();
    no_id.id = "";
    CHECK_THROWS_AS(validate(no_id), DomainError);

    ProjectRequirement no_desc = demo_requirement();
    no_desc.description = "  ";
    CHECK_THROWS_AS(validate(no_desc), DomainError);

    ProjectRequirement bad_path = demo_requirement();
    bad_path.input_files.push_back({"../up.png", FileKind::image});
    CHECK_THROWS_AS(validate(bad_path), DomainError);
}

TEST_CASE("artifact validation enforces per-level invariants") {
    CodeArtifact fn;
    fn.level = ArtifactLevel::function;
    fn.source = "def f():\n    pass\n";
    fn.origin = {0, 0};
    fn.validation = ValidationStatus::passed;
    fn.attempts = 1;
    CHECK_NOTHROW(validate(fn, 3));

    CodeArtifact empty = fn;
    empty.source = "";
    CHECK_THROWS_AS(validate(empty, 3), DomainError);

    CodeArtifact too_many = fn;
    too_many.attempts = 5;  // over 1 + max retries 3
    CHECK_THROWS_AS(validate(too_many, 3), DomainError);

    CodeArtifact wrong_depth = fn;
    wrong_depth.origin = {0};  // module address on a function artifact
    CHECK_THROWS_AS(validate(wrong_depth, 3), DomainError);

    CodeArtifact module = fn;
    module.level = ArtifactLevel::module;
    module.origin = {0};
    CHECK_NOTHROW(validate(module, 3));

    CodeArtifact project = fn;
    project.level = ArtifactLevel::project;
    project.origin = {};
    CHECK_NOTHROW(validate(project, 3));
}

TEST_CASE("run config validation") {
    RunConfig config;
    config.decision_model.kind = llm::BackendKind::scripted;
    config.decision_model.script_dir = "somewhere";
    config.implementer_model = config.decision_model;
    CHECK_NOTHROW(validate(config));

    RunConfig negative = config;
    negative.max_function_retries = -1;
    CHECK_THROWS_AS(validate(negative), ConfigError);

    RunConfig zero_par = config;
    zero_par.module_parallelism = 0;
    CHECK_THROWS_AS(validate(zero_par), ConfigError);

    RunConfig bad_timeout = config;
    bad_timeout.sandbox_timeout_s = 0.0;
    CHECK_THROWS_AS(validate(bad_timeout), ConfigError);

    RunConfig no_script = config;
    no_script.decision_model.script_dir = "";
    CHECK_THROWS_AS(validate(no_script), ConfigError);

    RunConfig remote_no_credential = config;
    remote_no_credential.decision_model.kind = llm::BackendKind::remote;
    remote_no_credential.decision_model.model_name = "m";
    remote_no_credential.decision_model.endpoint = "http://localhost:1";
    remote_no_credential.decision_model.credential_env = "";
    CHECK_THROWS_AS(validate(remote_no_credential), ConfigError);
}

TEST_CASE("decomposition tree stores modules, functions and signatures") {
    DecompositionTree tree(demo_requirement());
    CHECK(tree.module_count() == 0);

    const int m0 = tree.add_module(demo_module("ImageInput", 0));
    const int m1 = tree.add_module(demo_module("Transform", 1));
    CHECK(m0 == 0);
    CHECK(m1 == 1);

    const int f0 = tree.add_function(0, demo_function("load_image", {0}));
    const int f1 = tree.add_function(0, demo_function("normalize", {0}));
    CHECK(f0 == 0);
    CHECK(f1 == 1);
    CHECK(tree.function_count(0) == 2);
    CHECK(tree.function_count(1) == 0);
    CHECK(tree.total_function_count() == 2);

    CHECK(tree.module_at(0).hyper.module_name == "ImageInput");
    CHECK(tree.function_at({0, 1}).name == "normalize");
    CHECK_FALSE(tree.has_signature({0, 0}));

    FunctionSignature sig;
    sig.thought = tree.function_at({0, 0});
    sig.signature_text = "def load_image(path: str) -> 'Image':";
    sig.docstring = "Loads.";
    tree.set_signature({0, 0}, sig);
    CHECK(tree.has_signature({0, 0}));
    CHECK(tree.signature_at({0, 0}).signature_text == sig.signature_text);

    CHECK(tree.contains({}));
    CHECK(tree.contains({1}));
    CHECK(tree.contains({0, 1}));
    CHECK_FALSE(tree.contains({2}));
    CHECK_FALSE(tree.contains({1, 0}));
    CHECK_THROWS_AS(tree.function_at({1, 0}), AddressingError);
    CHECK_THROWS_AS(tree.module_at(5), AddressingError);
    CHECK_THROWS_AS(tree.signature_at({0, 1}), AddressingError);
}

TEST_CASE("tree rejects out-of-order sibling indices") {
    DecompositionTree tree(demo_requirement());
    CHECK_THROWS_AS(tree.add_module(demo_module("Wrong", 1)), AddressingError);
    tree.add_module(demo_module("Right", 0));
    FunctionThought detached = demo_function("f", {3});
    CHECK_THROWS_AS(tree.add_function(0, detached), AddressingError);
    CHECK_THROWS_AS(tree.add_function(2, demo_function("f", {2})), AddressingError);
}

TEST_CASE("tree_address resolves registered nodes") {
    DecompositionTree tree(demo_requirement());
    tree.add_module(demo_module("A", 0));
    tree.add_function(0, demo_function("f", {0}));

    CHECK(tree_address(tree) == TreeAddress{});
    CHECK(tree_address(tree, tree.module_at(0)) == TreeAddress{0});
    CHECK(tree_address(tree, tree.function_at({0, 0})) == TreeAddress{0, 0});

    ModuleThought stranger = demo_module("B", 7);
    CHECK_THROWS_AS(tree_address(tree, stranger), AddressingError);
}

TEST_CASE("enum string round-trips") {
    CHECK(to_string(FileKind::image) == "image");
    CHECK(file_kind_from_string("data") == FileKind::data);
    CHECK(file_kind_from_string("other") == FileKind::other);
    CHECK(to_string(ValidationStatus::unvalidated_exhausted) == "unvalidated_exhausted");
    CHECK(to_string(ArtifactLevel::module) == "module");
}
