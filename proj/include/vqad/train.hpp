#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "vqad/checkpoint.hpp"
#include "vqad/dataset.hpp"
#include "vqad/detect.hpp"
#include "vqad/losses.hpp"
#include "vqad/model.hpp"

namespace vqad {

/// Full training run configuration. learning_rate = 0 selects the mode
/// default: 2e-4 for prediction, 2e-5 for reconstruction.
struct TrainConfig {
    ModelMode mode = ModelMode::prediction;
    bool use_codebook = true;
    double learning_rate = 0.0;
    int epochs = 60;
    int batch_size = 8;
    std::uint64_t seed = 1;
    double clip_norm = 0.0;  // 0 disables gradient clipping
    CodebookInit codebook_scheme = CodebookInit::uniform_small;
    LossWeights weights;
    NetworkConfig network;
    std::string dataset_root;
    DatasetLayout layout = DatasetLayout::synthetic;
    int input_size = 0;  // resize frames; 0 keeps native resolution
    std::string out_dir = "run";

    double effective_lr() const {
        if (learning_rate > 0.0) return learning_rate;
        return mode == ModelMode::prediction ? 2e-4 : 2e-5;
    }

    /// Propagates mode/use_codebook into the network config and checks
    /// invariants.
    void finalize();

    static TrainConfig parse_file(const std::filesystem::path& file);
    static TrainConfig parse_text(const std::string& text);
    /// Environment overrides: VQAD_<UPPERCASED KEY>.
    void apply_env_overrides();
    void apply_override(const std::string& key, const std::string& value);
    std::string to_text() const;
};

struct TrainResult {
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    std::filesystem::path metrics_csv;
    int epochs_completed = 0;
    long steps_logged = 0;
    std::vector<double> epoch_mean_pred;
    std::vector<double> epoch_mean_total;
};

/// Runs the optimization loop: deterministic for a fixed seed, one metrics
/// CSV row per step (step,pred,embed,commit,sep,total), a checkpoint at
/// every epoch end plus best.ckpt at the lowest epoch-mean total loss.
/// A non-finite loss aborts with NumericError naming the offending term;
/// the last epoch checkpoint stays on disk as the recovery point.
TrainResult train(const TrainConfig& config);

/// Frame scores for every clip under a frozen model (eval-mode batch norm).
/// first_frame = n for prediction windows, 0 for reconstruction.
ScoreSeries score_clips(VqUnet<float>& net, const std::vector<VideoClip>& clips, int batch_size = 8);

/// Streaming access to per-frame saliency maps (used by the explanation
/// pipeline and heatmap emission).
void for_each_saliency(VqUnet<float>& net, const VideoClip& clip, int batch_size,
                       const std::function<void(const SaliencyMap&)>& fn);

struct AblationCell {
    bool temporal = false;
    bool codebook = false;
    double auc = 0.0;
    bool failed = false;
    std::string error;
    std::filesystem::path checkpoint;
};

struct AblationResult {
    std::vector<AblationCell> cells;  // (t,c) in order: (0,0),(0,1),(1,0),(1,1)
    std::filesystem::path summary_csv;
};

/// Trains the 2x2 {reconstruction, prediction} x {codebook off, on} grid
/// and evaluates each cell's AUC on the test split. A failing cell is
/// recorded and the remaining cells still run.
AblationResult run_ablation(const TrainConfig& base,
                            Normalization normalization = Normalization::per_video_minmax);

}  // namespace vqad
