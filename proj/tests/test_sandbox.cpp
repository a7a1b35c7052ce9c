#include <doctest.h>

#include <chrono>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "autoforge/domain/errors.hpp"
#include "autoforge/sandbox/sandbox.hpp"
#include "autoforge/util/hash.hpp"
#include "autoforge/util/parallel.hpp"
#include "support.hpp"

using namespace autoforge;
using namespace autoforge::sandbox;
using testsupport::TempDir;

namespace {

SandboxSpec spec_for(const std::string& run_dir, double timeout_s = 30.0) {
    SandboxSpec spec;
    spec.image = "vision-baseline";
    spec.host_run_dir = run_dir;
    spec.timeout_s = timeout_s;
    spec.backend = SandboxBackendKind::subprocess;
    return spec;
}

}  // namespace

TEST_CASE("catalog parsing accepts comments and rejects broken lines") {
    TempDir dir;
    testsupport::write_file(dir.sub("catalog.txt"),
                            "# images\n"
                            "\n"
                            "vision-baseline: python with Pillow and numpy\n"
                            "vision-opencv: adds OpenCV bindings\n");
    const auto catalog = load_catalog(dir.sub("catalog.txt"));
    REQUIRE(catalog.size() == 2);
    CHECK(catalog[0].name == "vision-baseline");
    CHECK(catalog[1].description == "adds OpenCV bindings");
    CHECK(catalog_contains(catalog, "vision-opencv"));
    CHECK_FALSE(catalog_contains(catalog, "absent"));
    const std::string rendered = render_catalog(catalog);
    CHECK(rendered.find("- vision-baseline: python with Pillow and numpy") != std::string::npos);

    testsupport::write_file(dir.sub("empty.txt"), "# nothing\n");
    CHECK_THROWS_WITH_AS(load_catalog(dir.sub("empty.txt")), doctest::Contains("empty"),
                         ConfigError);
    testsupport::write_file(dir.sub("broken.txt"), "no separator here\n");
    CHECK_THROWS_AS(load_catalog(dir.sub("broken.txt")), ConfigError);
    CHECK_THROWS_AS(load_catalog(dir.sub("missing.txt")), ConfigError);
}

TEST_CASE("the shipped environment catalog loads") {
    const auto catalog = load_catalog(testsupport::repo_path("assets/catalog.txt"));
    CHECK(catalog.size() >= 2);
    CHECK(catalog_contains(catalog, "vision-baseline"));
}

TEST_CASE("run_script captures output, exit code and produced files") {
    TempDir dir;
    SandboxRunner runner(2);
    const std::string script =
        "import sys\n"
        "with open('photo.txt') as f:\n"
        "    data = f.read()\n"
        "print('read', len(data), 'bytes')\n"
        "with open('out.txt', 'w') as f:\n"
        "    f.write(data.upper())\n"
        "sys.stderr.write('warning line\\n')\n";
    const ExecutionResult result =
        runner.run_script(spec_for(dir.sub("run1")), script, {{"photo.txt", "abc"}}, "demo");

    CHECK(result.exit_code == 0);
    CHECK_FALSE(result.timed_out);
    CHECK(result.stdout_text == "read 3 bytes\n");
    CHECK(result.stderr_text == "warning line\n");
    CHECK(result.duration_s > 0.0);
    REQUIRE(result.produced_files.size() == 1);  // unchanged staged input is not "produced"
    CHECK(result.produced_files[0].path == "out.txt");

    // The pristine input copy and the working copy both exist; the script
    // saw the working copy in its cwd.
    CHECK(testsupport::read_file(dir.path() / "run1" / "inputs" / "photo.txt") == "abc");
    CHECK(testsupport::read_file(dir.path() / "run1" / "outputs" / "out.txt") == "ABC");
    CHECK(testsupport::read_file(dir.path() / "run1" / "logs" / "stdout.txt") ==
          "read 3 bytes\n");

    // A staged input the script overwrites counts as produced.
    const ExecutionResult overwrite = runner.run_script(
        spec_for(dir.sub("run2")),
        "with open('photo.txt', 'w') as f:\n    f.write('changed')\n", {{"photo.txt", "abc"}},
        "demo");
    REQUIRE(overwrite.produced_files.size() == 1);
    CHECK(overwrite.produced_files[0].path == "photo.txt");
    CHECK(testsupport::read_file(dir.path() / "run2" / "inputs" / "photo.txt") == "abc");

    // Nonzero exit is a normal result, not an exception.
    const ExecutionResult failing = runner.run_script(
        spec_for(dir.sub("run3")), "import sys\nsys.exit(3)\n", {}, "demo");
    CHECK(failing.exit_code == 3);

    CHECK(runner.invocation_count("demo") == 3);
    CHECK(runner.invocation_count() == 3);
    CHECK(runner.invocation_labels().size() == 3);
}

TEST_CASE("staged files with unsafe paths are rejected") {
    TempDir dir;
    SandboxRunner runner(1);
    CHECK_THROWS_AS(runner.run_script(spec_for(dir.sub("r")), "print(1)\n",
                                      {{"../escape.txt", "x"}}, "bad"),
                    DomainError);
    CHECK_THROWS_AS(runner.run_script(spec_for(dir.sub("r")), "print(1)\n",
                                      {{"/abs.txt", "x"}}, "bad"),
                    DomainError);
    SandboxSpec no_dir = spec_for("");
    CHECK_THROWS_AS(runner.run_script(no_dir, "print(1)\n", {}, "bad"), ConfigError);
    CHECK_THROWS_AS(SandboxRunner(0), ConfigError);
}

TEST_CASE("run_validation passes iff the test script exits zero") {
    TempDir dir;
    SandboxRunner runner(2);
    const std::string solution = "def double(x: int) -> int:\n    return 2 * x\n";

    const ValidationOutcome good = runner.run_validation(
        spec_for(dir.sub("v1")), solution,
        "from solution import double\nassert double(4) == 8\n", {}, "validate");
    CHECK(good.passed);
    CHECK(good.result.exit_code == 0);

    const ValidationOutcome bad = runner.run_validation(
        spec_for(dir.sub("v2")), solution,
        "from solution import double\nassert double(4) == 9, 'wrong doubling'\n", {}, "validate");
    CHECK_FALSE(bad.passed);
    CHECK(bad.result.stderr_text.find("AssertionError") != std::string::npos);

    CHECK_THROWS_AS(runner.run_validation(spec_for(dir.sub("v3")), "", "x", {}, "validate"),
                    DomainError);
    CHECK_THROWS_AS(runner.run_validation(spec_for(dir.sub("v4")), "x", "", {}, "validate"),
                    DomainError);
}

TEST_CASE("an infinite loop with a 2s budget reports timeout within 7s") {
    TempDir dir;
    SandboxRunner runner(1);
    const auto start = std::chrono::steady_clock::now();
    const ExecutionResult result = runner.run_script(
        spec_for(dir.sub("loop"), 2.0), "while True:\n    pass\n", {}, "timeout_demo");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    CHECK(result.timed_out);
    CHECK(result.exit_code == kTimeoutExitCode);
    CHECK(wall < 2.0 + kTimeoutGraceSeconds);
    CHECK(result.duration_s >= 2.0);

    // Timeout also kills children of the script (the whole process group).
    TempDir dir2;
    const auto start2 = std::chrono::steady_clock::now();
    const ExecutionResult forked = runner.run_script(
        spec_for(dir2.sub("fork"), 2.0),
        "import subprocess, sys\n"
        "subprocess.Popen([sys.executable, '-c', 'import time; time.sleep(600)'])\n"
        "import time\n"
        "time.sleep(600)\n",
        {}, "timeout_demo");
    const double wall2 =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start2).count();
    CHECK(forked.timed_out);
    CHECK(wall2 < 2.0 + kTimeoutGraceSeconds);
}

TEST_CASE("a missing interpreter is an environment error, not a script failure") {
    TempDir dir;
    SandboxRunner runner(1);
    SandboxSpec spec = spec_for(dir.sub("r"));
    spec.backend = SandboxBackendKind::container;  // docker is absent in this environment
    CHECK_THROWS_AS(runner.run_script(spec, "print(1)\n", {}, "env"), SandboxEnvironmentError);
}

TEST_CASE("container argv mounts the run directory read-write and confines the workdir") {
    SandboxSpec spec;
    spec.image = "vision-baseline";
    spec.host_run_dir = "/host/run/42";
    spec.sandbox_workdir = "/work";
    const std::vector<std::string> argv = build_container_argv(spec, "script.py");
    REQUIRE(argv.size() >= 10);
    CHECK(argv[0] == "docker");
    CHECK(argv[1] == "run");
    // No network inside the sandbox.
    bool network_none = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
        if (argv[i] == "--network" && argv[i + 1] == "none") network_none = true;
    CHECK(network_none);
    bool mount_ok = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
        if (argv[i] == "-v" && argv[i + 1] == "/host/run/42:/work") mount_ok = true;
    CHECK(mount_ok);
    CHECK(argv.back() == "/work/code/script.py");
}

TEST_CASE("50 randomized runs never touch files outside their run directories") {
    // A tripwire directory next to the run directories: if sandbox runs wrote
    // anywhere but their own outputs, these hashes would change.
    TempDir tripwire;
    testsupport::write_file(tripwire.path() / "precious.txt", "do not touch");
    testsupport::write_file(tripwire.path() / "nested" / "data.bin", std::string(256, '\x7f'));
    const auto before = testsupport::dir_contents(tripwire.path());

    TempDir runs;
    SandboxRunner runner(4);
    std::mt19937 rng(7);
    std::vector<std::string> scripts;
    for (int i = 0; i < 50; ++i) {
        std::uniform_int_distribution<int> coin(0, 2);
        std::string script = "import os\n";
        const int files = coin(rng) + 1;
        for (int f = 0; f < files; ++f)
            script += "open('gen_" + std::to_string(f) + ".txt', 'w').write('x' * " +
                      std::to_string(1 + (rng() % 512)) + ")\n";
        if (coin(rng) == 0) script += "os.makedirs('sub', exist_ok=True)\n";
        if (coin(rng) == 1) script += "import sys\nsys.exit(1)\n";
        scripts.push_back(script);
    }

    util::parallel_for(scripts.size(), 4, [&](std::size_t i) {
        runner.run_script(spec_for(runs.sub("run_" + std::to_string(i))), scripts[i],
                          {{"seed.txt", std::to_string(i)}}, "tripwire");
    });

    CHECK(runner.invocation_count("tripwire") == 50);
    const auto after = testsupport::dir_contents(tripwire.path());
    REQUIRE(after.size() == before.size());
    for (const auto& [path, content] : before) {
        REQUIRE(after.count(path) == 1);
        CHECK(util::fnv1a64_hex(after.at(path)) == util::fnv1a64_hex(content));
    }
}

TEST_CASE("concurrent executions never exceed the semaphore cap") {
    TempDir dir;
    SandboxRunner runner(2);
    // Each script records its start and end time; with a cap of 2, no three
    // executions may overlap. Verified via wall time: 6 scripts of ~0.3s at
    // cap 2 need at least 0.9s.
    const auto start = std::chrono::steady_clock::now();
    util::parallel_for(6, 6, [&](std::size_t i) {
        runner.run_script(spec_for(dir.sub("c" + std::to_string(i))),
                          "import time\ntime.sleep(0.3)\n", {}, "cap");
    });
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(wall >= 0.85);
}
