#include "vqad/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "vqad/errors.hpp"

namespace fs = std::filesystem;

namespace vqad {

SaliencyMap saliency(const Image& predicted, const Image& target) {
    if (predicted.h != target.h || predicted.w != target.w)
        throw NumericError("saliency: shape mismatch");
    SaliencyMap map;
    map.values = MatXd::Zero(predicted.h, predicted.w);
    for (int y = 0; y < predicted.h; ++y) {
        for (int x = 0; x < predicted.w; ++x) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = static_cast<double>(predicted.at(c, y, x)) - target.at(c, y, x);
                acc += d * d;
            }
            map.values(y, x) = acc;
        }
    }
    return map;
}

double frame_score(const SaliencyMap& map) { return map.values.sum(); }

const char* to_string(Normalization n) {
    return n == Normalization::per_video_minmax ? "per_video_minmax" : "none";
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "per_video_minmax") return Normalization::per_video_minmax;
    if (s == "none") return Normalization::none;
    throw ConfigError("unknown normalization '" + s + "'");
}

void apply_normalization(ScoreSeries& series, Normalization mode) {
    series.normalization = mode;
    for (auto& clip : series.clips) {
        clip.normalized = clip.raw;
        if (mode != Normalization::per_video_minmax || clip.raw.empty()) continue;
        const auto [mn, mx] = std::minmax_element(clip.raw.begin(), clip.raw.end());
        const double lo = *mn, hi = *mx;
        if (hi - lo <= 0.0) {
            std::fill(clip.normalized.begin(), clip.normalized.end(), 0.0);
        } else {
            for (double& v : clip.normalized) v = (v - lo) / (hi - lo);
        }
    }
}

double evaluate_auc(const ScoreSeries& scores, const std::map<std::string, GroundTruthLabels>& labels) {
    std::vector<std::pair<double, int>> samples;  // (score, label)
    for (const auto& clip : scores.clips) {
        auto it = labels.find(clip.clip_id);
        if (it == labels.end()) throw LoadError("evaluate_auc: no labels for clip '" + clip.clip_id + "'");
        const auto& flags = it->second.frame_flags;
        const std::vector<double>& vals =
            clip.normalized.size() == clip.raw.size() && !clip.normalized.empty() ? clip.normalized
                                                                                  : clip.raw;
        for (size_t i = 0; i < vals.size(); ++i) {
            const size_t frame = static_cast<size_t>(clip.first_frame) + i;
            if (frame >= flags.size())
                throw LoadError("evaluate_auc: clip '" + clip.clip_id + "' has " +
                                std::to_string(flags.size()) + " labels but score for frame " +
                                std::to_string(frame));
            samples.emplace_back(vals[i], flags[frame]);
        }
    }
    const long pos = static_cast<long>(std::count_if(samples.begin(), samples.end(),
                                                     [](const auto& s) { return s.second == 1; }));
    const long neg = static_cast<long>(samples.size()) - pos;
    if (pos == 0) throw NumericError("evaluate_auc: degenerate labels, no anomalous frames");
    if (neg == 0) throw NumericError("evaluate_auc: degenerate labels, no normal frames");

    // Mann-Whitney via average ranks (ties share their rank).
    std::vector<size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&samples](size_t a, size_t b) { return samples[a].first < samples[b].first; });
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && samples[order[j + 1]].first == samples[order[i]].first) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k)
            if (samples[order[k]].second == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * (static_cast<double>(pos) + 1.0);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

Image heatmap_image(const SaliencyMap& map, double vmax) {
    if (vmax <= 0.0) vmax = 1.0;
    Image img(static_cast<int>(map.values.rows()), static_cast<int>(map.values.cols()));
    // dark blue (0) -> teal -> light green (1)
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const double t = std::clamp(map.values(y, x) / vmax, 0.0, 1.0);
            const double r = 0.15 * t + 0.50 * t * t;
            const double g = 0.05 + 0.90 * t;
            const double b = 0.45 - 0.25 * t;
            img.at(0, y, x) = static_cast<float>(2.0 * r - 1.0);
            img.at(1, y, x) = static_cast<float>(2.0 * g - 1.0);
            img.at(2, y, x) = static_cast<float>(2.0 * b - 1.0);
        }
    }
    return img;
}

void save_score_series(const fs::path& dir, const ScoreSeries& series) {
    fs::create_directories(dir);
    for (const auto& clip : series.clips) {
        std::ofstream out(dir / (clip.clip_id + ".csv"));
        if (!out) throw IoError("cannot write scores for " + clip.clip_id);
        out << "frame_index,raw_score,normalized_score\n";
        for (size_t i = 0; i < clip.raw.size(); ++i) {
            const double norm = i < clip.normalized.size() ? clip.normalized[i] : clip.raw[i];
            out << (clip.first_frame + static_cast<int>(i)) << "," << std::setprecision(17) << clip.raw[i]
                << "," << norm << "\n";
        }
    }
    std::ofstream meta(dir / "normalization.txt");
    meta << to_string(series.normalization) << "\n";
}

ScoreSeries load_score_series(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw LoadError("score directory does not exist: " + dir.string());
    ScoreSeries series;
    {
        std::ifstream meta(dir / "normalization.txt");
        std::string mode;
        if (meta && std::getline(meta, mode) && !mode.empty())
            series.normalization = normalization_from_string(mode);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
        ScoreSeries::ClipScores clip;
        clip.clip_id = f.stem().string();
        std::ifstream in(f);
        std::string line;
        std::getline(in, line);  // header
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string fi, raw, norm;
            std::getline(ss, fi, ',');
            std::getline(ss, raw, ',');
            std::getline(ss, norm, ',');
            if (first) {
                clip.first_frame = std::stoi(fi);
                first = false;
            }
            clip.raw.push_back(std::stod(raw));
            clip.normalized.push_back(std::stod(norm));
        }
        series.clips.push_back(std::move(clip));
    }
    if (series.clips.empty()) throw LoadError("no score CSV files in " + dir.string());
    return series;
}

}  // namespace vqad
