#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace flatlens {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

struct FileEntry {
    std::string path;  // relative to the manifest's directory
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct RunManifest {
    std::string command;
    std::string version{kToolkitVersion};
    std::string config_hash;  // sha256 of the canonical config text
    std::string started;      // UTC, ISO 8601; excluded from determinism checks
    std::string finished;
    std::vector<FileEntry> files;
    // Every choice the method leaves open (activation, init, scaling, floors,
    // finite-difference step, detector thresholds, ...).
    nlohmann::ordered_json settings = nlohmann::ordered_json::object();
    // Fit results, accuracies, acceptance verdicts.
    nlohmann::ordered_json results = nlohmann::ordered_json::object();

    // Hashes `dir / rel` and appends the entry.
    void add_file(const std::filesystem::path& dir, const std::string& rel);
};

std::string utc_now();

nlohmann::ordered_json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::ordered_json& j);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& path);

// Re-hashes every listed file relative to `dir`; throws Error(integrity) on a
// missing file or a checksum mismatch.
void verify_manifest(const RunManifest& m, const std::filesystem::path& dir);

}  // namespace flatlens
