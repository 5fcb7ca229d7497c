#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqad/dataset.hpp"

namespace vqad {

/// Kinds of injected test-split anomalies: a novel textured shape, a 3x
/// speed-up of an existing entity, or a normal-looking entity inside the
/// forbidden region.
enum class AnomalyKind { shape, speed, location };

struct AnomalySpec {
    int clip_index = 0;  // index into the test split
    AnomalyKind kind = AnomalyKind::shape;
    int start = 0;
    int length = 0;
};

/// Desk-scale moving-shapes video generator. Training clips contain only
/// normal entities; test clips add the configured anomaly segments with
/// per-frame flags and explanation labels. Deterministic for a fixed seed.
struct SyntheticConfig {
    int width = 128;
    int height = 128;
    double fps = 25.0;
    int train_clips = 6;
    int test_clips = 4;
    int train_frames = 36;
    int test_frames = 48;
    int entities_min = 3;
    int entities_max = 4;
    // x1,y1,x2,y2; all zero = no forbidden region
    int region[4] = {0, 0, 0, 0};
    std::vector<AnomalySpec> anomalies;
    bool emit_detections = true;  // oracle detection fixtures for both splits

    bool has_region() const { return region[2] > region[0] && region[3] > region[1]; }
    void validate() const;

    static SyntheticConfig parse_file(const std::filesystem::path& file);
    static SyntheticConfig parse_text(const std::string& text);
    std::string to_text() const;
};

/// Ground-truth detection fixture emitted by the generator (a perfect
/// detector over the rendered entities).
struct SynthBox {
    double x1, y1, x2, y2;
    std::string label;
    std::string source;  // "object" | "action"
    double confidence;
};

struct SyntheticData {
    std::vector<VideoClip> training;
    std::vector<VideoClip> testing;
    std::map<std::string, GroundTruthLabels> labels;
    // detections[clip_id][frame] -> boxes (training and testing clips)
    std::map<std::string, std::vector<std::vector<SynthBox>>> detections;
};

/// Pure in-memory render (used by generate_synthetic and by tests).
SyntheticData render_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Renders and writes the on-disk dataset layout, including labels,
/// explanation JSONL files, detection fixtures and meta.ini.
void generate_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                        const std::filesystem::path& out_root);

}  // namespace vqad
