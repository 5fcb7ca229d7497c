#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "vqad/model.hpp"
#include "vqad/optimizer.hpp"

namespace vqad {

/// Checkpoint archive: a versioned binary file holding the network
/// parameters, codebook (entries + usage), batch-norm running statistics,
/// optimizer state, the NetworkConfig, epoch/step counters and the dataset
/// normalization constants. Writes are atomic (temp file + rename).
struct CheckpointMeta {
    NetworkConfig network;
    int epoch = 0;
    long step = 0;
    std::string version;
    double norm_scale = 127.5;   // pixel = (value + 1) * scale
    double norm_offset = -1.0;   // value = pixel / scale + offset
};

void save_checkpoint(const std::filesystem::path& file, VqUnet<float>& net,
                     Adam<float>* optimizer, int epoch, long step);

CheckpointMeta peek_checkpoint(const std::filesystem::path& file);

/// Rebuilds the network (and optionally the optimizer state; pass the
/// optimizer constructed over the loaded net's parameters).
VqUnet<float> load_checkpoint(const std::filesystem::path& file, CheckpointMeta* meta = nullptr);
void load_optimizer_state(const std::filesystem::path& file, VqUnet<float>& net, Adam<float>& optimizer);

}  // namespace vqad
