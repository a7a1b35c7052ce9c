#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "autoforge/domain/types.hpp"
#include "autoforge/util/semaphore.hpp"

namespace autoforge::sandbox {

// One entry of the environment-image catalog the Team Leader chooses from.
struct CatalogImage {
    std::string name;
    std::string description;  // human-readable dependency summary
};

// Catalog file: `name: description` lines; `#` comments and blank lines
// ignored. An empty catalog is a configuration error.
std::vector<CatalogImage> load_catalog(const std::string& path);
std::string render_catalog(const std::vector<CatalogImage>& catalog);
bool catalog_contains(const std::vector<CatalogImage>& catalog, const std::string& name);

struct SandboxSpec {
    std::string image;                      // must come from the catalog
    std::string host_run_dir;               // private per-run directory
    std::string sandbox_workdir = "/work";  // container-side mount point
    double timeout_s = 30.0;
    SandboxBackendKind backend = SandboxBackendKind::subprocess;
};

struct StagedFile {
    std::string path;  // relative, no parent traversal
    std::string content;
};

struct ProducedFile {
    std::string path;
    std::string content_hash;

    bool operator==(const ProducedFile&) const = default;
};

inline constexpr int kTimeoutExitCode = 124;
inline constexpr double kTimeoutGraceSeconds = 5.0;

struct ExecutionResult {
    int exit_code = 0;
    std::string stdout_text;
    std::string stderr_text;
    double duration_s = 0.0;
    std::vector<ProducedFile> produced_files;  // created/modified under outputs/
    bool timed_out = false;
};

struct ValidationOutcome {
    bool passed = false;
    ExecutionResult result;
};

// The exact argv used to run a script via the container CLI; exposed
// separately so it is testable without a container runtime.
std::vector<std::string> build_container_argv(const SandboxSpec& spec,
                                              const std::string& script_relpath);

// Executes generated code in a private run directory laid out as
// inputs/ (pristine staged copies), code/ (scripts), outputs/ (working
// directory; produced files are detected here by pre/post snapshot diff)
// and logs/ (captured stdout/stderr). A global semaphore caps concurrent
// executions. Every invocation is counted under a caller-supplied label.
class SandboxRunner {
public:
    explicit SandboxRunner(int max_concurrent = 4);

    // Runs `script` as a standalone file with outputs/ as the working
    // directory. Throws SandboxEnvironmentError when the backend itself is
    // unusable (missing runtime); a script that runs and fails is a normal
    // result, not an error.
    ExecutionResult run_script(const SandboxSpec& spec, const std::string& script,
                               const std::vector<StagedFile>& staged_inputs,
                               const std::string& label);

    // Stages `code_under_test` as an importable `solution.py` next to the
    // test script, then runs the test. passed ⇔ exit 0 and not timed out.
    ValidationOutcome run_validation(const SandboxSpec& spec, const std::string& code_under_test,
                                     const std::string& test_script,
                                     const std::vector<StagedFile>& staged_inputs,
                                     const std::string& label);

    std::vector<std::string> invocation_labels() const;
    long invocation_count(const std::string& label_prefix = "") const;

private:
    ExecutionResult execute(const SandboxSpec& spec, const std::vector<StagedFile>& code_files,
                            const std::string& entry_relpath,
                            const std::vector<StagedFile>& staged_inputs,
                            const std::string& label);

    mutable std::mutex mutex_;
    std::vector<std::string> labels_;
    util::Semaphore slots_;
};

}  // namespace autoforge::sandbox
