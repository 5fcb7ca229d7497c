#pragma once

#include <map>
#include <string>
#include <vector>

#include "vqad/dataset.hpp"
#include "vqad/image.hpp"

namespace vqad {

/// Per-pixel squared prediction error summed over channels, for one frame.
struct SaliencyMap {
    MatXd values;  // (h, w), non-negative
    std::string clip_id;
    int frame_id = 0;
};

/// values[y][x] = sum_c (predicted[c,y,x] - target[c,y,x])^2.
SaliencyMap saliency(const Image& predicted, const Image& target);

/// Global frame anomaly score: the saliency map summed over the whole frame.
double frame_score(const SaliencyMap& map);

enum class Normalization { none, per_video_minmax };

const char* to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

/// Frame scores per clip. `first_frame` is the clip index of the first
/// scored frame (n for prediction windows, 0 for reconstruction).
struct ScoreSeries {
    struct ClipScores {
        std::string clip_id;
        int first_frame = 0;
        std::vector<double> raw;
        std::vector<double> normalized;
    };
    std::vector<ClipScores> clips;
    Normalization normalization = Normalization::none;
};

/// Fills `normalized` per clip: min-max onto [0,1] for per_video_minmax
/// (constant clips map to all zeros), or a copy of raw for none.
void apply_normalization(ScoreSeries& series, Normalization mode);

/// Area under the ROC curve over all scored frames, equal to the
/// Mann-Whitney statistic with ties counted 1/2. Throws if the aligned
/// labels contain only one class.
double evaluate_auc(const ScoreSeries& scores, const std::map<std::string, GroundTruthLabels>& labels);

/// Heatmap rendering of a saliency map: zero error maps to dark blue,
/// rising through green to light green/yellow at `vmax` (values clamp).
Image heatmap_image(const SaliencyMap& map, double vmax);

/// Score CSV persistence: one file per clip with rows
/// frame_index,raw_score,normalized_score.
void save_score_series(const std::filesystem::path& dir, const ScoreSeries& series);
ScoreSeries load_score_series(const std::filesystem::path& dir);

}  // namespace vqad
