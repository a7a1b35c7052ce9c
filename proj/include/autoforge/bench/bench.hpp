#pragma once

#include <functional>
#include <string>
#include <vector>

#include "autoforge/domain/types.hpp"
#include "autoforge/llm/gateway.hpp"
#include "autoforge/sandbox/sandbox.hpp"

namespace autoforge::bench {

enum class Difficulty { simple, medium, hard };

std::string to_string(Difficulty difficulty);
Difficulty difficulty_from_string(const std::string& text);  // BenchFixtureError on unknown

enum class CompareMode { exact, image_tolerance };

std::string to_string(CompareMode mode);
CompareMode compare_mode_from_string(const std::string& text);  // ConfigError on unknown

// One evaluation task: input files, a natural-language requirement, a known
// good solution, and either declared expected outputs or a comparison
// script. All components must be present.
struct ProjectFixture {
    std::string id;
    Difficulty difficulty = Difficulty::simple;
    std::string directory;            // fixture root on disk
    ProjectRequirement requirement;   // id, description, enumerated inputs
    std::string sample_solution;      // solution/main.py source
    std::vector<std::string> expected_files;  // relative paths under expected/
    bool has_compare_script = false;
    std::string compare_script;       // test/compare.py source when present
    double image_threshold = 1.0;     // image_tolerance bound, 0-255 scale
};

// Fixture layout on disk:
//   manifest.txt   id / difficulty / optional header fields + description
//   inputs/        staged into every sandbox run
//   solution/main.py
//   expected/ or test/compare.py
// Throws BenchFixtureError naming the absent component.
ProjectFixture load_fixture(const std::string& directory);

struct ComparisonResult {
    bool equal = false;
    std::string detail;  // names the first difference when not equal
};

// exact: same file set, byte-identical contents. image_tolerance: same file
// set; non-image files byte-identical; image files equal iff same
// dimensions and mean absolute per-channel difference <= threshold.
// The equal flag is symmetric in the two sides. Throws ComparisonError when
// a file that should decode as an image does not.
ComparisonResult compare_outputs(const std::vector<sandbox::StagedFile>& generated,
                                 const std::vector<sandbox::StagedFile>& expected,
                                 CompareMode mode, double image_threshold = 1.0);

// File extension says "image"; comparison and the manual-review probe treat
// such files pixel-wise.
bool looks_like_image(const std::string& path);

// Looser probe behind the manual-review flag: same file names and every
// image pair decodes to the same dimensions (contents ignored).
bool structurally_similar(const std::vector<sandbox::StagedFile>& a,
                          const std::vector<sandbox::StagedFile>& b);

struct EvalOutcome {
    std::string project_id;
    Difficulty difficulty = Difficulty::simple;
    std::vector<std::string> generated_output;  // produced file paths
    std::vector<std::string> expected_output;   // sample-run file paths
    int acc_p = 0;                              // 1 iff comparison succeeded
    std::string failure_reason;
    bool flagged_for_manual_review = false;
};

// Runs the sample solution and the generated project on the same staged
// inputs in separate fresh sandbox directories under `work_dir`, then
// compares their outputs. A crash or timeout of the generated project
// yields acc_p = 0 with a failure reason; the sample solution failing (or
// not reproducing the declared expected outputs) is a BenchFixtureError.
EvalOutcome evaluate_project(const ProjectFixture& fixture, const CodeArtifact& generated,
                             sandbox::SandboxRunner& runner,
                             const sandbox::SandboxSpec& base_spec, CompareMode mode,
                             const std::string& work_dir);

struct TierResult {
    Difficulty difficulty = Difficulty::simple;
    int total = 0;
    int passed = 0;
    double percent = 0.0;  // rounded to two decimals
};

struct BenchmarkReport {
    std::vector<EvalOutcome> outcomes;  // fixture-id order
    std::vector<TierResult> tiers;      // simple, medium, hard; present tiers only
    int total = 0;
    int passed = 0;
    double overall_percent = 0.0;  // rounded to two decimals
    llm::CostSummary cost;
    std::vector<std::string> fixture_errors;
};

// Deterministic fold over the outcomes in fixture-id order; percentages are
// rounded to two decimals and the overall accuracy is the project-count
// weighted mean of the tier accuracies.
BenchmarkReport aggregate_outcomes(std::vector<EvalOutcome> outcomes,
                                   std::vector<std::string> fixture_errors = {},
                                   llm::CostSummary cost = {});

struct GeneratedProject {
    CodeArtifact project;
    llm::CostSummary cost;
};

using ProjectGenerator = std::function<GeneratedProject(const ProjectFixture&)>;

// Runs a shell command with AUTOFORGE_FIXTURE_DIR and AUTOFORGE_PROJECT_OUT
// exported; the command must write the generated project source to
// $AUTOFORGE_PROJECT_OUT and exit 0.
ProjectGenerator make_external_generator(const std::string& command);

struct BenchOptions {
    CompareMode mode = CompareMode::image_tolerance;
    std::string work_root = "bench_work";  // per-fixture sandbox dirs live here
    int parallelism = 4;
};

// Loads every fixture under `fixtures_root` (one subdirectory each), runs
// the generator, evaluates, and aggregates. A generator failure scores
// acc_p = 0 for that project; an invalid fixture is excluded from the
// accuracy counts and recorded under fixture_errors.
BenchmarkReport run_benchmark(const std::string& fixtures_root,
                              const ProjectGenerator& generator,
                              sandbox::SandboxRunner& runner,
                              const sandbox::SandboxSpec& base_spec,
                              const BenchOptions& options);

// Text table: one row per difficulty tier plus the overall row, then the
// manual-review count, cost summary, and any fixture errors.
std::string render_report(const BenchmarkReport& report);

// Structured form of the same report.
std::string report_to_json(const BenchmarkReport& report);

void write_report_files(const BenchmarkReport& report, const std::string& directory);

}  // namespace autoforge::bench
