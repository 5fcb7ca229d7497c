#include "vqad/manifest.hpp"

#include <json.hpp>

#include <chrono>
#include <fstream>

#include "vqad/errors.hpp"
#include "vqad/version.hpp"

namespace fs = std::filesystem;

namespace vqad {

namespace {
using nlohmann::json;

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}
}  // namespace

RunManifest RunManifest::start(const std::string& command, const std::vector<std::string>& argv,
                               const std::string& config_snapshot, std::uint64_t seed,
                               const std::vector<std::string>& outputs) {
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.config_snapshot = config_snapshot;
    m.seed = seed;
    m.version = kVersionTag;
    m.outputs = outputs;
    m.started_at = now_iso8601();
    return m;
}

void RunManifest::write(const fs::path& dir) const {
    fs::create_directories(dir);
    json j{{"command", command},
           {"argv", argv},
           {"config", config_snapshot},
           {"seed", seed},
           {"version", version},
           {"outputs", outputs},
           {"started_at", started_at},
           {"wall_seconds", wall_seconds}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

void RunManifest::finalize(const fs::path& dir, double wall_seconds_elapsed) {
    wall_seconds = wall_seconds_elapsed;
    write(dir);
}

RunManifest RunManifest::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open manifest " + file.string());
    json j;
    in >> j;
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config_snapshot = j.at("config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.started_at = j.at("started_at").get<std::string>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    return m;
}

}  // namespace vqad
