#pragma once

#include <map>
#include <string>
#include <vector>

namespace cec {

// Provenance record written once per output directory. Numeric outputs are a
// pure function of (command, configs, inputs, seed); timestamps live only
// here so re-runs can still be diffed on the data files.
struct RunManifest {
    std::string command;
    uint64_t seed = 0;
    std::map<std::string, std::string> inputs;        // label -> path
    std::map<std::string, std::string> input_hashes;  // label -> fnv1a64 hex
    std::string config_hash;
    std::string dataset_hash;
    std::vector<std::string> outputs;
    std::string started_at;
    std::string finished_at;
};

std::string fnv1a64_hex(const std::string& bytes);
std::string file_hash_hex(const std::string& path);
std::string utc_timestamp();

void write_manifest(const RunManifest& manifest, const std::string& dir);

}  // namespace cec
