#pragma once

#include <string>
#include <vector>

#include "ilseg/common.hpp"

namespace ilseg {

inline constexpr const char* kIlsegVersion = "0.1.0";

// Provenance record written as run_manifest.json into every run directory.
struct RunManifest {
    std::string command;
    std::string version = kIlsegVersion;
    std::string created_utc;
    uint64_t seed = 0;
    std::string config_json;  // snapshot of the effective config ("" if none)
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void add_input(const std::string& path) { inputs.push_back(path); }
    void add_output(const std::string& path) { outputs.push_back(path); }
};

// Serializes with fnv1a64 checksums for every referenced file.
void write_run_manifest(const RunManifest& m, const std::string& out_dir);

// Verifies that every referenced file exists and matches its checksum.
// Returns a list of problems (empty when clean).
std::vector<std::string> verify_run_manifest(const std::string& manifest_path);

// Creates out_dir; errors if it already contains files unless force is set.
// Run directories are append-only by default.
void prepare_run_dir(const std::string& out_dir, bool force);

std::string utc_timestamp();

}  // namespace ilseg
