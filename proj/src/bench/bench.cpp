#include "autoforge/bench/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "autoforge/config/manifest.hpp"
#include "autoforge/domain/errors.hpp"
#include "autoforge/util/parallel.hpp"
#include "autoforge/util/strings.hpp"

namespace autoforge::bench {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Difficulty difficulty) {
    switch (difficulty) {
        case Difficulty::simple: return "simple";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
    }
    return "simple";
}

Difficulty difficulty_from_string(const std::string& text) {
    if (text == "simple") return Difficulty::simple;
    if (text == "medium") return Difficulty::medium;
    if (text == "hard") return Difficulty::hard;
    throw BenchFixtureError("unknown difficulty label '" + text + "'");
}

std::string to_string(CompareMode mode) {
    return mode == CompareMode::exact ? "exact" : "image_tolerance";
}

CompareMode compare_mode_from_string(const std::string& text) {
    if (text == "exact") return CompareMode::exact;
    if (text == "image_tolerance") return CompareMode::image_tolerance;
    throw ConfigError("unknown compare mode '" + text + "' (expected exact or image_tolerance)");
}

bool looks_like_image(const std::string& path) {
    const std::size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    const std::string ext = util::to_lower(path.substr(dot + 1));
    return ext == "png" || ext == "jpg" || ext == "jpeg" || ext == "bmp" || ext == "tif" ||
           ext == "tiff" || ext == "webp";
}

namespace {

double round2(double value) { return std::round(value * 100.0) / 100.0; }

std::string format_percent(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f%%", value);
    return buffer;
}

std::string read_file(const fs::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BenchFixtureError(std::string(what) + ": cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

cv::Mat decode_image(const sandbox::StagedFile& file) {
    const cv::Mat raw(1, static_cast<int>(file.content.size()), CV_8UC1,
                      const_cast<char*>(file.content.data()));
    cv::Mat image = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
    if (image.empty()) throw ComparisonError("undecodable image: " + file.path);
    return image;
}

// Mean of |a - b| over every pixel and channel, on the natural value scale.
double mean_abs_difference(const cv::Mat& a, const cv::Mat& b) {
    cv::Mat da, db;
    a.convertTo(da, CV_64F);
    b.convertTo(db, CV_64F);
    cv::Mat diff;
    cv::absdiff(da, db, diff);
    const cv::Scalar channel_means = cv::mean(diff);
    double sum = 0.0;
    for (int c = 0; c < diff.channels(); ++c) sum += channel_means[c];
    return sum / diff.channels();
}

std::map<std::string, std::string> by_path(const std::vector<sandbox::StagedFile>& files) {
    std::map<std::string, std::string> out;
    for (const sandbox::StagedFile& file : files) out[file.path] = file.content;
    return out;
}

std::vector<sandbox::StagedFile> read_run_outputs(const std::string& run_dir,
                                                  const sandbox::ExecutionResult& result) {
    std::vector<sandbox::StagedFile> out;
    for (const sandbox::ProducedFile& produced : result.produced_files) {
        std::ifstream in(fs::path(run_dir) / "outputs" / produced.path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        out.push_back({produced.path, buffer.str()});
    }
    return out;
}

std::vector<std::string> paths_of(const std::vector<sandbox::StagedFile>& files) {
    std::vector<std::string> out;
    out.reserve(files.size());
    for (const sandbox::StagedFile& file : files) out.push_back(file.path);
    std::sort(out.begin(), out.end());
    return out;
}

std::string describe_failure(const sandbox::ExecutionResult& result, double timeout_s) {
    if (result.timed_out)
        return "timeout: no result within " + std::to_string(timeout_s) + "s";
    std::string detail = "crash: exit code " + std::to_string(result.exit_code);
    const std::string stderr_text = util::trim(result.stderr_text);
    if (!stderr_text.empty()) {
        const std::vector<std::string> lines = util::split_lines(stderr_text);
        detail += " (" + lines.back() + ")";
    }
    return detail;
}

}  // namespace

ComparisonResult compare_outputs(const std::vector<sandbox::StagedFile>& generated,
                                 const std::vector<sandbox::StagedFile>& expected,
                                 CompareMode mode, double image_threshold) {
    const auto lhs = by_path(generated);
    const auto rhs = by_path(expected);
    for (const auto& [path, content] : lhs)
        if (!rhs.count(path)) return {false, "file only on one side: " + path};
    for (const auto& [path, content] : rhs)
        if (!lhs.count(path)) return {false, "file only on one side: " + path};

    for (const auto& [path, left] : lhs) {
        const std::string& right = rhs.at(path);
        if (mode == CompareMode::image_tolerance && looks_like_image(path)) {
            const cv::Mat a = decode_image({path, left});
            const cv::Mat b = decode_image({path, right});
            if (a.rows != b.rows || a.cols != b.cols || a.channels() != b.channels())
                return {false, "image dimensions differ: " + path};
            if (a.type() != b.type()) return {false, "image value types differ: " + path};
            const double difference = mean_abs_difference(a, b);
            if (difference > image_threshold) {
                char buffer[64];
                std::snprintf(buffer, sizeof(buffer), "%.4f > %.4f", difference, image_threshold);
                return {false, "image difference exceeds tolerance (" + std::string(buffer) +
                                   "): " + path};
            }
            continue;
        }
        if (left != right) return {false, "contents differ: " + path};
    }
    return {true, ""};
}

bool structurally_similar(const std::vector<sandbox::StagedFile>& a,
                          const std::vector<sandbox::StagedFile>& b) {
    if (paths_of(a) != paths_of(b)) return false;
    const auto lhs = by_path(a);
    const auto rhs = by_path(b);
    for (const auto& [path, left] : lhs) {
        if (!looks_like_image(path)) continue;
        try {
            const cv::Mat ia = decode_image({path, left});
            const cv::Mat ib = decode_image({path, rhs.at(path)});
            if (ia.rows != ib.rows || ia.cols != ib.cols || ia.channels() != ib.channels())
                return false;
        } catch (const ComparisonError&) {
            return false;
        }
    }
    return true;
}

ProjectFixture load_fixture(const std::string& directory) {
    const fs::path root(directory);
    if (!fs::is_directory(root))
        throw BenchFixtureError("fixture directory absent: " + directory);
    if (!fs::is_regular_file(root / "manifest.txt"))
        throw BenchFixtureError("manifest absent in fixture " + directory);

    config::ManifestDocument manifest;
    try {
        manifest = config::load_manifest_file((root / "manifest.txt").string());
    } catch (const ConfigError& e) {
        throw BenchFixtureError("fixture " + directory + ": " + e.what());
    }

    ProjectFixture fixture;
    fixture.directory = directory;
    auto field = [&manifest](const char* key) {
        auto it = manifest.fields.find(key);
        return it == manifest.fields.end() ? std::string() : it->second;
    };
    fixture.id = field("id");
    if (fixture.id.empty()) throw BenchFixtureError("id absent in fixture " + directory);
    const std::string difficulty = field("difficulty");
    if (difficulty.empty())
        throw BenchFixtureError("difficulty absent in fixture " + directory);
    fixture.difficulty = difficulty_from_string(difficulty);
    if (manifest.description.empty())
        throw BenchFixtureError("description absent in fixture " + directory);
    const std::string threshold = field("image_threshold");
    if (!threshold.empty()) fixture.image_threshold = std::stod(threshold);

    fixture.requirement.id = fixture.id;
    fixture.requirement.description = manifest.description;
    fixture.requirement.workdir = field("workdir");
    fixture.requirement.environment_hint = field("environment_hint");

    const fs::path inputs = root / "inputs";
    if (fs::is_directory(inputs)) {
        for (const auto& entry : fs::recursive_directory_iterator(inputs)) {
            if (!entry.is_regular_file()) continue;
            const std::string rel = fs::relative(entry.path(), inputs).generic_string();
            fixture.requirement.input_files.push_back(
                {rel, looks_like_image(rel) ? FileKind::image : FileKind::data});
        }
    }
    std::sort(fixture.requirement.input_files.begin(), fixture.requirement.input_files.end(),
              [](const InputFile& a, const InputFile& b) { return a.path < b.path; });
    if (fixture.requirement.input_files.empty())
        throw BenchFixtureError("inputs absent in fixture " + directory);

    if (!fs::is_regular_file(root / "solution" / "main.py"))
        throw BenchFixtureError("sample_solution absent in fixture " + directory);
    fixture.sample_solution = read_file(root / "solution" / "main.py", "sample_solution");

    const fs::path expected = root / "expected";
    if (fs::is_directory(expected)) {
        for (const auto& entry : fs::recursive_directory_iterator(expected)) {
            if (!entry.is_regular_file()) continue;
            fixture.expected_files.push_back(
                fs::relative(entry.path(), expected).generic_string());
        }
        std::sort(fixture.expected_files.begin(), fixture.expected_files.end());
    }
    if (fs::is_regular_file(root / "test" / "compare.py")) {
        fixture.has_compare_script = true;
        fixture.compare_script = read_file(root / "test" / "compare.py", "test module");
    }
    if (fixture.expected_files.empty() && !fixture.has_compare_script)
        throw BenchFixtureError("test module absent in fixture " + directory +
                                " (need expected/ or test/compare.py)");
    return fixture;
}

EvalOutcome evaluate_project(const ProjectFixture& fixture, const CodeArtifact& generated,
                             sandbox::SandboxRunner& runner,
                             const sandbox::SandboxSpec& base_spec, CompareMode mode,
                             const std::string& work_dir) {
    if (generated.source.empty())
        throw DomainError("evaluate_project requires a generated project with source");

    EvalOutcome outcome;
    outcome.project_id = fixture.id;
    outcome.difficulty = fixture.difficulty;

    std::vector<sandbox::StagedFile> inputs;
    for (const InputFile& file : fixture.requirement.input_files)
        inputs.push_back({file.path, read_file(fs::path(fixture.directory) / "inputs" / file.path,
                                               "input file")});

    // Reference run first: a broken sample solution invalidates the fixture.
    sandbox::SandboxSpec sample_spec = base_spec;
    sample_spec.host_run_dir = (fs::path(work_dir) / "sample").string();
    const sandbox::ExecutionResult sample_run = runner.run_script(
        sample_spec, fixture.sample_solution, inputs, "bench_" + fixture.id + "_sample");
    if (sample_run.exit_code != 0 || sample_run.timed_out)
        throw BenchFixtureError("sample solution failed for fixture '" + fixture.id +
                                "': " + describe_failure(sample_run, base_spec.timeout_s));
    const std::vector<sandbox::StagedFile> sample_outputs =
        read_run_outputs(sample_spec.host_run_dir, sample_run);
    outcome.expected_output = paths_of(sample_outputs);

    if (!fixture.expected_files.empty()) {
        std::vector<sandbox::StagedFile> declared;
        for (const std::string& rel : fixture.expected_files)
            declared.push_back({rel, read_file(fs::path(fixture.directory) / "expected" / rel,
                                               "expected output")});
        ComparisonResult integrity;
        try {
            integrity = compare_outputs(sample_outputs, declared, mode, fixture.image_threshold);
        } catch (const ComparisonError& e) {
            throw BenchFixtureError("fixture '" + fixture.id + "': " + e.what());
        }
        if (!integrity.equal)
            throw BenchFixtureError("sample solution does not reproduce the declared expected "
                                    "outputs for fixture '" +
                                    fixture.id + "': " + integrity.detail);
    }

    sandbox::SandboxSpec generated_spec = base_spec;
    generated_spec.host_run_dir = (fs::path(work_dir) / "generated").string();
    const sandbox::ExecutionResult generated_run = runner.run_script(
        generated_spec, generated.source, inputs, "bench_" + fixture.id + "_generated");
    const std::vector<sandbox::StagedFile> generated_outputs =
        read_run_outputs(generated_spec.host_run_dir, generated_run);
    outcome.generated_output = paths_of(generated_outputs);

    if (generated_run.exit_code != 0 || generated_run.timed_out) {
        outcome.acc_p = 0;
        outcome.failure_reason = describe_failure(generated_run, base_spec.timeout_s);
        return outcome;
    }

    if (fixture.has_compare_script) {
        std::vector<sandbox::StagedFile> staged;
        for (const sandbox::StagedFile& file : generated_outputs)
            staged.push_back({"generated/" + file.path, file.content});
        for (const sandbox::StagedFile& file : sample_outputs)
            staged.push_back({"expected/" + file.path, file.content});
        sandbox::SandboxSpec compare_spec = base_spec;
        compare_spec.host_run_dir = (fs::path(work_dir) / "compare").string();
        const sandbox::ExecutionResult verdict = runner.run_script(
            compare_spec, fixture.compare_script, staged, "bench_" + fixture.id + "_compare");
        if (verdict.exit_code == 0 && !verdict.timed_out) {
            outcome.acc_p = 1;
        } else {
            outcome.acc_p = 0;
            std::string detail = util::trim(verdict.stdout_text);
            if (detail.empty()) detail = util::trim(verdict.stderr_text);
            outcome.failure_reason =
                detail.empty() ? "comparison script reported a mismatch" : detail;
        }
    } else {
        ComparisonResult comparison;
        try {
            comparison =
                compare_outputs(generated_outputs, sample_outputs, mode, fixture.image_threshold);
        } catch (const ComparisonError& e) {
            outcome.acc_p = 0;
            outcome.failure_reason = e.what();
            return outcome;
        }
        outcome.acc_p = comparison.equal ? 1 : 0;
        outcome.failure_reason = comparison.detail;
    }

    if (outcome.acc_p == 0)
        outcome.flagged_for_manual_review = structurally_similar(generated_outputs, sample_outputs);
    return outcome;
}

BenchmarkReport aggregate_outcomes(std::vector<EvalOutcome> outcomes,
                                   std::vector<std::string> fixture_errors,
                                   llm::CostSummary cost) {
    std::stable_sort(outcomes.begin(), outcomes.end(),
                     [](const EvalOutcome& a, const EvalOutcome& b) {
                         return a.project_id < b.project_id;
                     });
    BenchmarkReport report;
    report.fixture_errors = std::move(fixture_errors);
    report.cost = std::move(cost);
    for (const Difficulty tier :
         {Difficulty::simple, Difficulty::medium, Difficulty::hard}) {
        TierResult result;
        result.difficulty = tier;
        for (const EvalOutcome& outcome : outcomes) {
            if (outcome.difficulty != tier) continue;
            ++result.total;
            result.passed += outcome.acc_p;
        }
        if (result.total == 0) continue;
        result.percent = round2(100.0 * result.passed / result.total);
        report.tiers.push_back(result);
        report.total += result.total;
        report.passed += result.passed;
    }
    if (report.total > 0)
        report.overall_percent = round2(100.0 * report.passed / report.total);
    report.outcomes = std::move(outcomes);
    return report;
}

ProjectGenerator make_external_generator(const std::string& command) {
    auto counter = std::make_shared<std::atomic<long>>(0);
    return [command, counter](const ProjectFixture& fixture) -> GeneratedProject {
        const fs::path out_path =
            fs::temp_directory_path() /
            ("autoforge_generated_" + fixture.id + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter->fetch_add(1)) + ".py");
        // Export before running so the command itself can expand the variables.
        const std::string shell = "export AUTOFORGE_FIXTURE_DIR='" + fixture.directory +
                                  "' AUTOFORGE_PROJECT_OUT='" + out_path.string() + "'; " + command;
        const int status = std::system(shell.c_str());
        if (status != 0) {
            std::error_code ignored;
            fs::remove(out_path, ignored);
            throw Error("generator command failed with status " + std::to_string(status) +
                        " for fixture '" + fixture.id + "'");
        }
        std::ifstream in(out_path, std::ios::binary);
        if (!in)
            throw Error("generator command produced no project file for fixture '" + fixture.id +
                        "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        std::error_code ignored;
        fs::remove(out_path, ignored);

        GeneratedProject result;
        result.project.level = ArtifactLevel::project;
        result.project.source = buffer.str();
        result.project.attempts = 1;
        return result;
    };
}

namespace {

void merge_cost(llm::CostSummary& total, const llm::CostSummary& part) {
    for (const auto& line : part.models) {
        auto it = std::find_if(total.models.begin(), total.models.end(),
                               [&line](const auto& m) { return m.model == line.model; });
        if (it == total.models.end()) {
            total.models.push_back(line);
        } else {
            it->tally += line.tally;
            it->cost += line.cost;
        }
    }
    std::sort(total.models.begin(), total.models.end(),
              [](const auto& a, const auto& b) { return a.model < b.model; });
    total.decision_maker += part.decision_maker;
    total.implementer += part.implementer;
    total.total_cost += part.total_cost;
}

}  // namespace

BenchmarkReport run_benchmark(const std::string& fixtures_root,
                              const ProjectGenerator& generator,
                              sandbox::SandboxRunner& runner,
                              const sandbox::SandboxSpec& base_spec,
                              const BenchOptions& options) {
    if (!fs::is_directory(fixtures_root))
        throw ConfigError("fixtures root is not a directory: " + fixtures_root);

    std::vector<std::string> fixture_errors;
    std::vector<ProjectFixture> fixtures;
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(fixtures_root))
        if (entry.is_directory()) dirs.push_back(entry.path().string());
    std::sort(dirs.begin(), dirs.end());
    for (const std::string& dir : dirs) {
        try {
            fixtures.push_back(load_fixture(dir));
        } catch (const BenchFixtureError& e) {
            fixture_errors.push_back(e.what());
        }
    }
    if (fixtures.empty() && fixture_errors.empty())
        throw ConfigError("no fixtures under " + fixtures_root);
    std::sort(fixtures.begin(), fixtures.end(),
              [](const ProjectFixture& a, const ProjectFixture& b) { return a.id < b.id; });

    std::vector<EvalOutcome> outcomes(fixtures.size());
    std::vector<bool> valid(fixtures.size(), false);
    llm::CostSummary cost;
    std::mutex mutex;

    util::parallel_for(fixtures.size(), options.parallelism, [&](std::size_t i) {
        const ProjectFixture& fixture = fixtures[i];
        const std::string work_dir = (fs::path(options.work_root) / fixture.id).string();

        GeneratedProject generated;
        try {
            generated = generator(fixture);
        } catch (const Error& e) {
            EvalOutcome outcome;
            outcome.project_id = fixture.id;
            outcome.difficulty = fixture.difficulty;
            outcome.acc_p = 0;
            outcome.failure_reason = std::string("generator failed: ") + e.what();
            std::lock_guard<std::mutex> lock(mutex);
            outcomes[i] = std::move(outcome);
            valid[i] = true;
            return;
        }

        sandbox::SandboxSpec spec = base_spec;
        if (!fixture.requirement.environment_hint.empty())
            spec.image = fixture.requirement.environment_hint;
        try {
            EvalOutcome outcome = evaluate_project(fixture, generated.project, runner, spec,
                                                   options.mode, work_dir);
            std::lock_guard<std::mutex> lock(mutex);
            outcomes[i] = std::move(outcome);
            valid[i] = true;
            merge_cost(cost, generated.cost);
        } catch (const BenchFixtureError& e) {
            std::lock_guard<std::mutex> lock(mutex);
            fixture_errors.push_back(e.what());
            merge_cost(cost, generated.cost);
        }
    });

    std::vector<EvalOutcome> kept;
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (valid[i]) kept.push_back(std::move(outcomes[i]));
    std::sort(fixture_errors.begin(), fixture_errors.end());
    return aggregate_outcomes(std::move(kept), std::move(fixture_errors), std::move(cost));
}

std::string render_report(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "Difficulty  Projects  Passed  Accuracy\n";
    auto row = [&out](const std::string& name, int total, int passed, double percent) {
        char line[96];
        std::snprintf(line, sizeof(line), "%-10s  %8d  %6d  %8s\n", name.c_str(), total, passed,
                      format_percent(percent).c_str());
        out << line;
    };
    for (const TierResult& tier : report.tiers)
        row(to_string(tier.difficulty), tier.total, tier.passed, tier.percent);
    row("overall", report.total, report.passed, report.overall_percent);

    int flagged = 0;
    for (const EvalOutcome& outcome : report.outcomes)
        if (outcome.flagged_for_manual_review) ++flagged;
    out << "\nFlagged for manual review: " << flagged << "\n";
    out << "\n" << llm::render_cost_summary(report.cost);
    if (!report.fixture_errors.empty()) {
        out << "\nFixture errors:\n";
        for (const std::string& error : report.fixture_errors) out << "  - " << error << "\n";
    }
    return out.str();
}

std::string report_to_json(const BenchmarkReport& report) {
    ordered_json j;
    j["tiers"] = ordered_json::array();
    for (const TierResult& tier : report.tiers) {
        ordered_json t;
        t["difficulty"] = to_string(tier.difficulty);
        t["total"] = tier.total;
        t["passed"] = tier.passed;
        t["percent"] = tier.percent;
        j["tiers"].push_back(t);
    }
    j["overall"] = {{"total", report.total},
                    {"passed", report.passed},
                    {"percent", report.overall_percent}};
    j["outcomes"] = ordered_json::array();
    for (const EvalOutcome& outcome : report.outcomes) {
        ordered_json o;
        o["id"] = outcome.project_id;
        o["difficulty"] = to_string(outcome.difficulty);
        o["acc_p"] = outcome.acc_p;
        o["flagged_for_manual_review"] = outcome.flagged_for_manual_review;
        if (!outcome.failure_reason.empty()) o["failure_reason"] = outcome.failure_reason;
        o["generated_output"] = outcome.generated_output;
        o["expected_output"] = outcome.expected_output;
        j["outcomes"].push_back(o);
    }
    j["fixture_errors"] = report.fixture_errors;
    ordered_json cost;
    cost["models"] = ordered_json::array();
    for (const auto& line : report.cost.models) {
        ordered_json m;
        m["model"] = line.model;
        m["requests"] = line.tally.requests;
        m["prompt_tokens"] = line.tally.prompt_tokens;
        m["completion_tokens"] = line.tally.completion_tokens;
        m["cost"] = line.cost;
        cost["models"].push_back(m);
    }
    cost["total"] = report.cost.total_cost;
    j["cost"] = cost;
    return j.dump(2) + "\n";
}

void write_report_files(const BenchmarkReport& report, const std::string& directory) {
    fs::create_directories(directory);
    std::ofstream json_out(fs::path(directory) / "report.json", std::ios::binary);
    json_out << report_to_json(report);
    std::ofstream text_out(fs::path(directory) / "report.txt", std::ios::binary);
    text_out << render_report(report);
}

}  // namespace autoforge::bench
