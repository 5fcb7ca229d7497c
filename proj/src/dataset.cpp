#include "vqad/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "vqad/errors.hpp"

namespace fs = std::filesystem;

namespace vqad {

namespace {

using nlohmann::json;

bool is_frame_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

VideoClip load_clip(const fs::path& dir, int resize_to, double fps) {
    VideoClip clip;
    clip.clip_id = dir.filename().string();
    clip.fps = fps;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
    if (files.empty()) throw LoadError("clip '" + clip.clip_id + "' has no frames in " + dir.string());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
        Image img = normalize_image(load_raw_image(f));
        if (resize_to > 0 && (img.h != resize_to || img.w != resize_to))
            img = resize_bilinear(img, resize_to, resize_to);
        if (!clip.frames.empty() && (img.h != clip.frames.front().h || img.w != clip.frames.front().w))
            throw LoadError("clip '" + clip.clip_id + "': frame size mismatch at " + f.filename().string());
        clip.frames.push_back(std::move(img));
    }
    return clip;
}

std::vector<int> load_flags_csv(const fs::path& file, const std::string& clip_id) {
    std::ifstream in(file);
    if (!in) throw LoadError("clip '" + clip_id + "': missing label file " + file.string());
    std::vector<int> flags;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line != "0" && line != "1")
            throw LoadError("clip '" + clip_id + "': label line '" + line + "' is not 0 or 1");
        flags.push_back(line == "1" ? 1 : 0);
    }
    return flags;
}

void load_explanations_jsonl(const fs::path& file, const std::string& clip_id, GroundTruthLabels& gt) {
    std::ifstream in(file);
    if (!in) return;  // explanations are optional
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw LoadError("clip '" + clip_id + "': bad JSON at " + file.filename().string() + ":" +
                            std::to_string(lineno));
        const int frame = j.at("frame").get<int>();
        if (frame < 0 || frame >= static_cast<int>(gt.frame_flags.size()))
            throw LoadError("clip '" + clip_id + "': explanation frame " + std::to_string(frame) +
                            " out of range");
        for (const auto& lbl : j.at("labels"))
            gt.explanation_labels[static_cast<size_t>(frame)].push_back(lbl.get<std::string>());
        if (!gt.explanation_labels[static_cast<size_t>(frame)].empty() &&
            gt.frame_flags[static_cast<size_t>(frame)] != 1)
            throw LoadError("clip '" + clip_id + "': frame " + std::to_string(frame) +
                            " has explanation labels but flag 0");
    }
}

double read_meta_fps(const fs::path& root) {
    std::ifstream in(root / "meta.ini");
    if (!in) return 25.0;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
        if (key == "fps") return std::stod(line.substr(eq + 1));
    }
    return 25.0;
}

}  // namespace

MatXf FrameWindow::inputs() const {
    const int count = std::max(n, 1);
    const Image& first = clip->frames[static_cast<size_t>(t0)];
    MatXf out(3 * count, static_cast<Eigen::Index>(first.h) * first.w);
    for (int i = 0; i < count; ++i)
        out.middleRows(static_cast<Eigen::Index>(3) * i, 3) = clip->frames[static_cast<size_t>(t0 + i)].data;
    return out;
}

WindowSet make_windows(const VideoClip& clip, int n) {
    if (n < 0) throw ConfigError("make_windows: n must be >= 0");
    WindowSet out;
    const int needed = n + 1;
    if (clip.length() < needed) {
        out.warnings.push_back("clip '" + clip.clip_id + "' too short for n=" + std::to_string(n) +
                               " (length " + std::to_string(clip.length()) + ")");
        return out;
    }
    const int count = clip.length() - n;
    out.windows.reserve(static_cast<size_t>(count));
    for (int t0 = 0; t0 < count; ++t0) {
        FrameWindow w;
        w.clip = &clip;
        w.clip_id = clip.clip_id;
        w.t0 = t0;
        w.n = n;
        out.windows.push_back(std::move(w));
    }
    return out;
}

LoadedDataset load_dataset(const fs::path& root, DatasetLayout layout, int resize_to) {
    if (!fs::is_directory(root)) throw LoadError("dataset root does not exist: " + root.string());
    LoadedDataset ds;
    ds.fps = layout == DatasetLayout::synthetic ? read_meta_fps(root) : 25.0;

    auto load_split = [&](const std::string& split) {
        std::vector<VideoClip> clips;
        const fs::path frames = root / split / "frames";
        if (!fs::is_directory(frames))
            throw LoadError("dataset missing " + (root / split / "frames").string());
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(frames))
            if (entry.is_directory()) dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        for (const fs::path& d : dirs) clips.push_back(load_clip(d, resize_to, ds.fps));
        return clips;
    };

    ds.training = load_split("training");
    ds.testing = load_split("testing");

    for (const VideoClip& clip : ds.testing) {
        GroundTruthLabels gt;
        gt.frame_flags = load_flags_csv(root / "testing" / "labels" / (clip.clip_id + ".csv"), clip.clip_id);
        if (static_cast<int>(gt.frame_flags.size()) != clip.length())
            throw LoadError("clip '" + clip.clip_id + "': label length " +
                            std::to_string(gt.frame_flags.size()) + " != " + std::to_string(clip.length()));
        gt.explanation_labels.resize(gt.frame_flags.size());
        load_explanations_jsonl(root / "testing" / "explanations" / (clip.clip_id + ".jsonl"),
                                clip.clip_id, gt);
        ds.labels[clip.clip_id] = std::move(gt);
    }
    return ds;
}

}  // namespace vqad
