#include "autoforge/sandbox/sandbox.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "autoforge/domain/errors.hpp"
#include "autoforge/util/hash.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::sandbox {

namespace fs = std::filesystem;

namespace {

// Written to stderr by the child when exec itself fails, so a missing
// runtime is distinguishable from a script that exits 127 on its own.
const char* kExecFailedMarker = "SANDBOX_EXEC_FAILED:";

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SandboxEnvironmentError("cannot write file: " + path.string());
    out << content;
}

std::map<std::string, std::string> snapshot_dir(const fs::path& root) {
    std::map<std::string, std::string> hashes;
    if (!fs::is_directory(root)) return hashes;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), root).generic_string();
        hashes[rel] = util::fnv1a64_hex(read_text_file(entry.path()));
    }
    return hashes;
}

void check_staged_path(const std::string& path) {
    if (!is_safe_relative_path(path))
        throw DomainError("staged file path is not a safe relative path: '" + path + "'");
}

struct SpawnedProcess {
    pid_t pid = -1;
};

SpawnedProcess spawn(const std::vector<std::string>& argv, const fs::path& cwd,
                     const fs::path& stdout_path, const fs::path& stderr_path) {
    std::vector<char*> argv_c;
    argv_c.reserve(argv.size() + 1);
    for (const std::string& arg : argv) argv_c.push_back(const_cast<char*>(arg.c_str()));
    argv_c.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0) throw SandboxEnvironmentError("fork failed: " + std::string(strerror(errno)));
    if (pid == 0) {
        // Child. Own process group so a timeout can kill the whole tree.
        setpgid(0, 0);
        int out_fd = open(stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        int err_fd = open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (out_fd < 0 || err_fd < 0) _exit(126);
        dup2(out_fd, STDOUT_FILENO);
        dup2(err_fd, STDERR_FILENO);
        if (chdir(cwd.c_str()) != 0) {
            dprintf(STDERR_FILENO, "%s cannot chdir to %s\n", kExecFailedMarker, cwd.c_str());
            _exit(127);
        }
        setenv("PYTHONDONTWRITEBYTECODE", "1", 1);
        execvp(argv_c[0], argv_c.data());
        dprintf(STDERR_FILENO, "%s %s: %s\n", kExecFailedMarker, argv_c[0], strerror(errno));
        _exit(127);
    }
    return {pid};
}

// Waits for the child, killing its process group at the deadline.
void await(SpawnedProcess proc, double timeout_s, int& exit_code, bool& timed_out) {
    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_s));
    timed_out = false;
    int status = 0;
    while (true) {
        pid_t done = waitpid(proc.pid, &status, WNOHANG);
        if (done == proc.pid) break;
        if (done < 0)
            throw SandboxEnvironmentError("waitpid failed: " + std::string(strerror(errno)));
        if (std::chrono::steady_clock::now() >= deadline) {
            timed_out = true;
            kill(-proc.pid, SIGKILL);
            kill(proc.pid, SIGKILL);
            waitpid(proc.pid, &status, 0);
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (timed_out)
        exit_code = kTimeoutExitCode;
    else if (WIFEXITED(status))
        exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        exit_code = 128 + WTERMSIG(status);
    else
        exit_code = -1;
}

}  // namespace

std::vector<CatalogImage> load_catalog(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read environment catalog: " + path);
    std::vector<CatalogImage> catalog;
    std::string line;
    while (std::getline(in, line)) {
        const std::string trimmed = util::trim(line);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::size_t colon = trimmed.find(':');
        if (colon == std::string::npos || colon == 0)
            throw ConfigError("catalog line is not 'name: description': '" + trimmed + "'");
        CatalogImage image;
        image.name = util::trim(trimmed.substr(0, colon));
        image.description = util::trim(trimmed.substr(colon + 1));
        if (image.description.empty())
            throw ConfigError("catalog image '" + image.name + "' has no description");
        catalog.push_back(std::move(image));
    }
    if (catalog.empty()) throw ConfigError("environment catalog is empty: " + path);
    return catalog;
}

std::string render_catalog(const std::vector<CatalogImage>& catalog) {
    std::string out;
    for (const CatalogImage& image : catalog)
        out += "- " + image.name + ": " + image.description + "\n";
    return out;
}

bool catalog_contains(const std::vector<CatalogImage>& catalog, const std::string& name) {
    for (const CatalogImage& image : catalog)
        if (image.name == name) return true;
    return false;
}

std::vector<std::string> build_container_argv(const SandboxSpec& spec,
                                              const std::string& script_relpath) {
    return {
        "docker",
        "run",
        "--rm",
        "--network",
        "none",
        "-v",
        spec.host_run_dir + ":" + spec.sandbox_workdir,
        "-w",
        spec.sandbox_workdir + "/outputs",
        spec.image,
        "python3",
        spec.sandbox_workdir + "/code/" + script_relpath,
    };
}

SandboxRunner::SandboxRunner(int max_concurrent) : slots_(max_concurrent) {
    if (max_concurrent < 1)
        throw ConfigError("sandbox concurrency cap must be at least 1");
}

ExecutionResult SandboxRunner::run_script(const SandboxSpec& spec, const std::string& script,
                                          const std::vector<StagedFile>& staged_inputs,
                                          const std::string& label) {
    return execute(spec, {{"script.py", script}}, "script.py", staged_inputs, label);
}

ValidationOutcome SandboxRunner::run_validation(const SandboxSpec& spec,
                                                const std::string& code_under_test,
                                                const std::string& test_script,
                                                const std::vector<StagedFile>& staged_inputs,
                                                const std::string& label) {
    if (code_under_test.empty()) throw DomainError("validation has no code under test");
    if (test_script.empty()) throw DomainError("validation has no test script");
    ExecutionResult result =
        execute(spec, {{"solution.py", code_under_test}, {"test.py", test_script}}, "test.py",
                staged_inputs, label);
    ValidationOutcome outcome;
    outcome.passed = result.exit_code == 0 && !result.timed_out;
    outcome.result = std::move(result);
    return outcome;
}

ExecutionResult SandboxRunner::execute(const SandboxSpec& spec,
                                       const std::vector<StagedFile>& code_files,
                                       const std::string& entry_relpath,
                                       const std::vector<StagedFile>& staged_inputs,
                                       const std::string& label) {
    if (spec.host_run_dir.empty()) throw ConfigError("sandbox spec has no run directory");
    if (spec.timeout_s <= 0) throw ConfigError("sandbox timeout must be positive");

    util::SemaphoreGuard guard(slots_);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        labels_.push_back(label);
    }

    const fs::path run_dir(spec.host_run_dir);
    const fs::path inputs_dir = run_dir / "inputs";
    const fs::path code_dir = run_dir / "code";
    const fs::path outputs_dir = run_dir / "outputs";
    const fs::path logs_dir = run_dir / "logs";
    for (const fs::path& dir : {inputs_dir, code_dir, outputs_dir, logs_dir})
        fs::create_directories(dir);

    for (const StagedFile& file : staged_inputs) {
        check_staged_path(file.path);
        // Pristine copy for audit plus a working copy the script may read
        // and overwrite.
        write_text_file(inputs_dir / file.path, file.content);
        write_text_file(outputs_dir / file.path, file.content);
    }
    for (const StagedFile& file : code_files) {
        check_staged_path(file.path);
        write_text_file(code_dir / file.path, file.content);
    }

    const auto pre = snapshot_dir(outputs_dir);

    std::vector<std::string> argv;
    if (spec.backend == SandboxBackendKind::container) {
        argv = build_container_argv(spec, entry_relpath);
    } else {
        argv = {"python3", fs::absolute(code_dir / entry_relpath).string()};
    }

    const fs::path stdout_path = logs_dir / "stdout.txt";
    const fs::path stderr_path = logs_dir / "stderr.txt";

    const auto start = std::chrono::steady_clock::now();
    SpawnedProcess proc = spawn(argv, fs::absolute(outputs_dir), stdout_path, stderr_path);
    ExecutionResult result;
    await(proc, spec.timeout_s, result.exit_code, result.timed_out);
    result.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    result.stdout_text = read_text_file(stdout_path);
    result.stderr_text = read_text_file(stderr_path);

    if (util::starts_with(util::trim(result.stderr_text), kExecFailedMarker))
        throw SandboxEnvironmentError("sandbox backend unusable: " +
                                      util::trim(result.stderr_text));
    if (spec.backend == SandboxBackendKind::container && !result.timed_out &&
        result.exit_code >= 125 && result.exit_code <= 127)
        throw SandboxEnvironmentError("container runtime error (exit " +
                                      std::to_string(result.exit_code) +
                                      "): " + result.stderr_text);

    const auto post = snapshot_dir(outputs_dir);
    for (const auto& [path, hash] : post) {
        auto it = pre.find(path);
        if (it == pre.end() || it->second != hash) result.produced_files.push_back({path, hash});
    }
    return result;
}

std::vector<std::string> SandboxRunner::invocation_labels() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return labels_;
}

long SandboxRunner::invocation_count(const std::string& label_prefix) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (label_prefix.empty()) return static_cast<long>(labels_.size());
    long count = 0;
    for (const std::string& label : labels_)
        if (util::starts_with(label, label_prefix)) ++count;
    return count;
}

}  // namespace autoforge::sandbox
