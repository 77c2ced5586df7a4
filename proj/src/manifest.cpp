#include "ilseg/manifest.hpp"

#include <ctime>
#include <filesystem>

#include "json.hpp"

namespace ilseg {

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

void write_run_manifest(const RunManifest& m, const std::string& out_dir) {
    nlohmann::json j;
    j["tool"] = "ilseg";
    j["version"] = m.version;
    j["command"] = m.command;
    j["created_utc"] = m.created_utc.empty() ? utc_timestamp() : m.created_utc;
    j["seed"] = m.seed;
    if (!m.config_json.empty()) j["config"] = nlohmann::json::parse(m.config_json);
    auto file_list = [](const std::vector<std::string>& paths) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : paths) {
            nlohmann::json e;
            e["path"] = p;
            e["checksum"] = file_checksum(p);
            arr.push_back(e);
        }
        return arr;
    };
    j["inputs"] = file_list(m.inputs);
    j["outputs"] = file_list(m.outputs);
    write_file_text(out_dir + "/run_manifest.json", j.dump(2) + "\n");
}

std::vector<std::string> verify_run_manifest(const std::string& manifest_path) {
    std::vector<std::string> problems;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file_text(manifest_path));
    } catch (const std::exception& e) {
        return {std::string("unreadable manifest: ") + e.what()};
    }
    for (const char* section : {"inputs", "outputs"}) {
        if (!j.contains(section)) continue;
        for (const auto& e : j[section]) {
            std::string path = e.value("path", std::string());
            std::string expect = e.value("checksum", std::string());
            if (!std::filesystem::exists(path)) {
                problems.push_back("missing file: " + path);
                continue;
            }
            if (file_checksum(path) != expect)
                problems.push_back("checksum mismatch: " + path);
        }
    }
    return problems;
}

void prepare_run_dir(const std::string& out_dir, bool force) {
    namespace fs = std::filesystem;
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        throw ConfigError("run directory is not empty (use --force to reuse): " + out_dir);
    fs::create_directories(out_dir);
}

}  // namespace ilseg
