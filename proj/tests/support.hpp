#pragma once

// Shared helpers for the test binaries: temp directories, file I/O, small
// PNG factories, and scripted-backend fixture builders.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#ifndef AUTOFORGE_TEST_REPO_DIR
#error "AUTOFORGE_TEST_REPO_DIR must be defined by the build"
#endif

namespace testsupport {

namespace fs = std::filesystem;

inline std::string repo_dir() { return AUTOFORGE_TEST_REPO_DIR; }
inline std::string repo_path(const std::string& rel) {
    return (fs::path(repo_dir()) / rel).string();
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "autoforge_test") {
        static std::atomic<long> counter{0};
        path_ = fs::temp_directory_path() /
                (tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ignored;
        fs::remove_all(path_, ignored);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    std::string str() const { return path_.string(); }
    std::string sub(const std::string& rel) const { return (path_ / rel).string(); }

private:
    fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// Writes scripted-backend response files `<key>.<NNN>.txt` in queue order.
class ScriptBuilder {
public:
    explicit ScriptBuilder(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void add(const std::string& key, const std::string& body) {
        const int n = ++counts_[key];
        char name[256];
        std::snprintf(name, sizeof(name), "%s.%03d.txt", key.c_str(), n);
        write_file(dir_ / name, body);
    }

    std::string dir() const { return dir_.string(); }

private:
    fs::path dir_;
    std::map<std::string, int> counts_;
};

// PNG-encoded bytes of a deterministic BGR gradient with a per-seed offset.
inline std::string png_bytes(int width, int height, int seed = 0, int compression = 3) {
    cv::Mat image(height, width, CV_8UC3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            image.at<cv::Vec3b>(y, x) =
                cv::Vec3b(static_cast<unsigned char>((x * 3 + seed) % 256),
                          static_cast<unsigned char>((y * 5 + 2 * seed) % 256),
                          static_cast<unsigned char>((x + y + 7 * seed) % 256));
    std::vector<unsigned char> buffer;
    cv::imencode(".png", image, buffer, {cv::IMWRITE_PNG_COMPRESSION, compression});
    return std::string(buffer.begin(), buffer.end());
}

// Re-encodes PNG bytes at a different compression level: same pixels,
// (almost always) different bytes.
inline std::string reencode_png(const std::string& png, int compression) {
    const cv::Mat raw(1, static_cast<int>(png.size()), CV_8UC1, const_cast<char*>(png.data()));
    const cv::Mat image = cv::imdecode(raw, cv::IMREAD_UNCHANGED);
    std::vector<unsigned char> buffer;
    cv::imencode(".png", image, buffer, {cv::IMWRITE_PNG_COMPRESSION, compression});
    return std::string(buffer.begin(), buffer.end());
}

// Recursive relative-path -> content map, for whole-tree comparisons.
inline std::map<std::string, std::string> dir_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    if (!fs::exists(root)) return out;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            out[fs::relative(entry.path(), root).generic_string()] = read_file(entry.path());
    return out;
}

struct CommandResult {
    int exit_code = 0;
    std::string output;  // stdout + stderr interleaved
};

// Runs a shell command, capturing combined output.
inline CommandResult run_command(const std::string& command) {
    const fs::path capture =
        fs::temp_directory_path() / ("autoforge_cmd_" + std::to_string(::getpid()) + "_" +
                                     std::to_string(reinterpret_cast<std::uintptr_t>(&command)));
    const std::string full = command + " >" + capture.string() + " 2>&1";
    const int status = std::system(full.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.output = read_file(capture);
    std::error_code ignored;
    fs::remove(capture, ignored);
    return result;
}

}  // namespace testsupport
