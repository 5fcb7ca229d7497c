#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vqad/dataset.hpp"
#include "vqad/detect.hpp"

namespace vqad {

enum class DetectionSource { object, action };

const char* to_string(DetectionSource s);

/// One detector output box in pixel coordinates (x1 < x2, y1 < y2 after
/// clipping to the frame).
struct DetectionBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    std::string label;
    double confidence = 0.0;
    DetectionSource source = DetectionSource::object;
};

struct FrameDetections {
    std::string clip_id;
    int frame = 0;
    std::vector<DetectionBox> boxes;
};

/// Detections in file order, one record per (clip, frame).
struct DetectionSet {
    std::vector<FrameDetections> frames;

    const FrameDetections* find(const std::string& clip_id, int frame) const;
};

/// Parses the detection JSON-lines schema, clipping boxes to the frame and
/// rejecting malformed records with their line number.
DetectionSet load_detections(const std::filesystem::path& file, int frame_w, int frame_h);

enum class BoxAccum { sum, mean };

BoxAccum box_accum_from_string(const std::string& s);
const char* to_string(BoxAccum m);

/// Saliency accumulated per box. A pixel belongs to a box when its center
/// (px+0.5, py+0.5) lies in [x1,x2) x [y1,y2); mean mode divides by the
/// member pixel count.
std::vector<double> box_scores(const SaliencyMap& map, const std::vector<DetectionBox>& boxes,
                               BoxAccum mode);

struct ExplanationEntry {
    DetectionBox box;
    double box_score = 0.0;
    bool anomalous = false;
};

/// Ranked per-frame explanation: entries sorted by box_score descending,
/// anomalous iff box_score >= threshold.
struct ExplanationRecord {
    std::string clip_id;
    int frame_id = 0;
    std::vector<ExplanationEntry> entries;
};

ExplanationRecord explain_frame(const SaliencyMap& map, const std::vector<DetectionBox>& boxes,
                                double threshold, BoxAccum mode);

void save_explanations(const std::filesystem::path& file, const std::vector<ExplanationRecord>& records);
std::vector<ExplanationRecord> load_explanations(const std::filesystem::path& file);

struct ClassAp {
    std::string label;
    double ap = 0.0;
    int support = 0;  // ground-truth frame occurrences
};

struct ApReport {
    std::vector<ClassAp> per_class;
    double map = 0.0;
};

/// Frame-level mean average precision over the explanation classes present
/// in the ground truth. Every emitted entry is a prediction for its label,
/// scored by box_score; a prediction is a true positive when the frame's
/// label set contains the class (each ground-truth label consumable once per
/// frame). AP uses the interpolation-free area under the precision-recall
/// curve. Classes in `exclude` are dropped from both sides.
ApReport evaluate_map(const std::vector<ExplanationRecord>& records,
                      const std::map<std::string, GroundTruthLabels>& ground_truth,
                      const std::set<std::string>& exclude = {});

void save_ap_report(const std::filesystem::path& file, const ApReport& report);

/// p-th percentile (0-100) of the pooled box scores, used to calibrate the
/// anomaly threshold on a normal-only split.
double score_percentile(std::vector<double> scores, double p);

}  // namespace vqad
