#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace fixtures {

inline std::filesystem::path dir() { return OPRA_FIXTURES_DIR; }
inline std::filesystem::path path(const std::string& rel) { return dir() / rel; }

inline std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json json_file(const std::string& rel) { return nlohmann::json::parse(read(path(rel))); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        p_ = std::filesystem::temp_directory_path() /
             ("opra-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(p_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(p_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return p_; }
    std::filesystem::path operator/(const std::string& rel) const { return p_ / rel; }

private:
    std::filesystem::path p_;
};

}  // namespace fixtures
