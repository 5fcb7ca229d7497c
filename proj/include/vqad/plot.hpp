#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vqad/dataset.hpp"
#include "vqad/detect.hpp"

namespace vqad {

/// ROC curve over the scored frames, rendered to a PNG.
void plot_roc(const ScoreSeries& scores, const std::map<std::string, GroundTruthLabels>& labels,
              const std::filesystem::path& file);

/// Per-clip score-vs-frame timeline; anomalous ground-truth spans are shaded
/// when labels are provided.
void plot_timeline(const ScoreSeries::ClipScores& clip, const GroundTruthLabels* labels,
                   const std::filesystem::path& file);

}  // namespace vqad
