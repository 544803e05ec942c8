#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace gasc {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64 over file contents, hex encoded
inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string() + " for digest");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

struct RunManifest {
    std::string command;
    nlohmann::json config;  // fully resolved configuration
    std::map<std::string, std::string> input_digests;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;

    static std::string now_iso8601() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
        return buf;
    }

    nlohmann::json json() const {
        return nlohmann::json{{"format", "gasc-manifest"}, {"version", 1},
                              {"tool_version", kToolVersion}, {"command", command},
                              {"config", config},           {"inputs", input_digests},
                              {"seed", seed},               {"started_at", started_at},
                              {"finished_at", finished_at}};
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path);
        out << json().dump(2) << "\n";
    }
};

// Output directory created atomically: populate a temp sibling, then rename.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path target, bool force = false)
        : target_(std::move(target)) {
        if (std::filesystem::exists(target_)) {
            if (!force)
                throw std::runtime_error("output directory already exists: " + target_.string());
            std::filesystem::remove_all(target_);
        }
        tmp_ = target_;
        tmp_ += ".tmp";
        std::filesystem::remove_all(tmp_);
        std::filesystem::create_directories(tmp_);
    }

    ~OutputDir() {
        if (!committed_) {
            std::error_code ec;
            std::filesystem::remove_all(tmp_, ec);
        }
    }

    const std::filesystem::path& staging() const { return tmp_; }

    void commit() {
        std::filesystem::rename(tmp_, target_);
        committed_ = true;
    }

private:
    std::filesystem::path target_, tmp_;
    bool committed_ = false;
};

}  // namespace gasc
