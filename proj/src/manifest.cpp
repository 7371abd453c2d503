#include "cec/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cec/common.hpp"
#include "cec/rng.hpp"

namespace cec {

std::string fnv1a64_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot hash missing file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return fnv1a64_hex(ss.str());
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const RunManifest& m, const std::string& dir) {
    nlohmann::ordered_json j;
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["seed_derivation"] = "per-stage: splitmix64(root_seed XOR fnv1a64(stage_tag))";
    j["inputs"] = m.inputs;
    j["input_hashes"] = m.input_hashes;
    j["config_hash"] = m.config_hash;
    j["dataset_hash"] = m.dataset_hash;
    j["outputs"] = m.outputs;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest in: " + dir);
    out << j.dump(2) << "\n";
}

}  // namespace cec
