#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vqad {

/// Run provenance record: written to the output directory before any long
/// computation starts, then finalized with wall-clock timings. A run is
/// reproducible from its manifest alone (command + argv + config snapshot +
/// seed).
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_snapshot;
    std::uint64_t seed = 0;
    std::string version;
    std::vector<std::string> outputs;
    std::string started_at;
    double wall_seconds = -1.0;  // -1 until finalized

    static RunManifest start(const std::string& command, const std::vector<std::string>& argv,
                             const std::string& config_snapshot, std::uint64_t seed,
                             const std::vector<std::string>& outputs);

    void write(const std::filesystem::path& dir) const;
    void finalize(const std::filesystem::path& dir, double wall_seconds_elapsed);

    static RunManifest load(const std::filesystem::path& file);
};

}  // namespace vqad
