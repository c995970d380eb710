#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nie/model.hpp"
#include "nie/rng.hpp"

namespace nie {

/// Hex FNV-1a hash of a file's bytes, for input/output integrity records.
inline std::string hash_file(const std::string& path) {
    return to_hex(fnv1a64(modelio::read_file(path)));
}

/// Every CLI run writes exactly one of these next to its outputs.
struct RunManifest {
    std::string command;
    nlohmann::json resolved_config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_ms = 0.0;
    std::map<std::string, std::string> artifact_hashes;
    nlohmann::json errors = nlohmann::json::array();

    void hash_artifact(const std::string& path) { artifact_hashes[path] = hash_file(path); }

    void write(const std::string& path) const {
        nlohmann::json j;
        j["command"] = command;
        j["resolved_config"] = resolved_config;
        j["seed"] = seed;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["wall_ms"] = wall_ms;
        j["artifact_hashes"] = artifact_hashes;
        j["errors"] = errors;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write manifest: " + path);
        out << j.dump(2) << "\n";
    }
};

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        auto d = std::chrono::steady_clock::now() - start_;
        return std::chrono::duration<double, std::milli>(d).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace nie
