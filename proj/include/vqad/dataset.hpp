#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqad/image.hpp"
#include "vqad/tensor.hpp"

namespace vqad {

/// Ordered frames of one video, normalized to [-1, 1]. All frames share one
/// resolution; fps is metadata only.
struct VideoClip {
    std::string clip_id;
    std::vector<Image> frames;
    double fps = 25.0;

    int length() const { return static_cast<int>(frames.size()); }
    int height() const { return frames.empty() ? 0 : frames.front().h; }
    int width() const { return frames.empty() ? 0 : frames.front().w; }
};

/// Per-frame binary anomaly flags and optional explanation label sets.
/// Every labeled frame must carry flag 1.
struct GroundTruthLabels {
    std::vector<int> frame_flags;
    std::vector<std::vector<std::string>> explanation_labels;
};

/// A sliding window over a clip: n input frames concatenated along the
/// channel dimension and the following frame as the target. n = 0 is the
/// reconstruction case where the single input frame is its own target.
struct FrameWindow {
    const VideoClip* clip = nullptr;  // non-owning; windows must not outlive the clip
    std::string clip_id;
    int t0 = 0;
    int n = 0;

    /// (max(n,1)*3, h*w) channel-stacked inputs.
    MatXf inputs() const;
    const Image& target() const { return clip->frames[static_cast<size_t>(t0 + n)]; }
    int input_channels() const { return std::max(n, 1) * 3; }
};

struct WindowSet {
    std::vector<FrameWindow> windows;
    std::vector<std::string> warnings;
};

/// One window per valid start index, stride 1; count = length - n (or the
/// full length when n = 0). Too-short clips yield no windows plus a warning
/// record.
WindowSet make_windows(const VideoClip& clip, int n);

enum class DatasetLayout { ucsd_avenue, synthetic };

struct LoadedDataset {
    std::vector<VideoClip> training;
    std::vector<VideoClip> testing;
    std::map<std::string, GroundTruthLabels> labels;  // keyed by testing clip id
    double fps = 25.0;
};

/// Loads `root/{training,testing}/frames/<clip>/<frame>.png|jpg` plus
/// `root/testing/labels/<clip>.csv` (one 0/1 per line) and optional
/// `root/testing/explanations/<clip>.jsonl`. Clips come back sorted
/// lexicographically by id. `resize_to` > 0 resamples frames to a square
/// resolution with bilinear interpolation.
LoadedDataset load_dataset(const std::filesystem::path& root, DatasetLayout layout, int resize_to = 0);

/// Batch assembly for training/scoring: stacks the windows' inputs and
/// targets into network tensors.
template <typename S>
void windows_to_batch(const std::vector<const FrameWindow*>& windows, Tensor<S>& inputs, Tensor<S>& targets) {
    if (windows.empty()) throw NumericError("windows_to_batch: empty batch");
    const FrameWindow& first = *windows.front();
    const int h = first.clip->height(), w = first.clip->width();
    inputs = Tensor<S>(first.input_channels(), static_cast<int>(windows.size()), h, w);
    targets = Tensor<S>(3, static_cast<int>(windows.size()), h, w);
    for (size_t b = 0; b < windows.size(); ++b) {
        inputs.sample(static_cast<int>(b)) = windows[b]->inputs().template cast<S>();
        targets.sample(static_cast<int>(b)) = windows[b]->target().data.template cast<S>();
    }
}

}  // namespace vqad
