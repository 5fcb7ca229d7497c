#include "vqad/explain.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "vqad/errors.hpp"

namespace fs = std::filesystem;

namespace vqad {

namespace {
using nlohmann::json;

DetectionSource source_from_string(const std::string& s, int lineno) {
    if (s == "object") return DetectionSource::object;
    if (s == "action") return DetectionSource::action;
    throw LoadError("detections line " + std::to_string(lineno) + ": unknown source '" + s + "'");
}

/// Pixel range [first, last) whose centers fall in [lo, hi).
std::pair<int, int> pixel_range(double lo, double hi, int extent) {
    int first = static_cast<int>(std::ceil(lo - 0.5));
    int last = static_cast<int>(std::ceil(hi - 0.5));
    first = std::max(first, 0);
    last = std::min(last, extent);
    return {first, last};
}

}  // namespace

const char* to_string(DetectionSource s) { return s == DetectionSource::object ? "object" : "action"; }

const FrameDetections* DetectionSet::find(const std::string& clip_id, int frame) const {
    for (const FrameDetections& fd : frames)
        if (fd.clip_id == clip_id && fd.frame == frame) return &fd;
    return nullptr;
}

DetectionSet load_detections(const fs::path& file, int frame_w, int frame_h) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open detections " + file.string());
    DetectionSet set;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw LoadError("detections line " + std::to_string(lineno) + ": invalid JSON");
        FrameDetections fd;
        try {
            fd.clip_id = j.at("clip").get<std::string>();
            fd.frame = j.at("frame").get<int>();
            for (const auto& bj : j.at("boxes")) {
                DetectionBox box;
                const auto& coords = bj.at("box");
                if (!coords.is_array() || coords.size() != 4)
                    throw LoadError("detections line " + std::to_string(lineno) +
                                    ": box must be [x1,y1,x2,y2]");
                box.x1 = coords[0].get<double>();
                box.y1 = coords[1].get<double>();
                box.x2 = coords[2].get<double>();
                box.y2 = coords[3].get<double>();
                box.label = bj.at("label").get<std::string>();
                box.confidence = bj.at("score").get<double>();
                box.source = source_from_string(bj.at("source").get<std::string>(), lineno);
                if (box.label.empty())
                    throw LoadError("detections line " + std::to_string(lineno) + ": empty label");
                if (!(box.x1 < box.x2) || !(box.y1 < box.y2))
                    throw LoadError("detections line " + std::to_string(lineno) + ": degenerate box [" +
                                    std::to_string(box.x1) + "," + std::to_string(box.y1) + "," +
                                    std::to_string(box.x2) + "," + std::to_string(box.y2) + "]");
                box.x1 = std::clamp(box.x1, 0.0, static_cast<double>(frame_w));
                box.x2 = std::clamp(box.x2, 0.0, static_cast<double>(frame_w));
                box.y1 = std::clamp(box.y1, 0.0, static_cast<double>(frame_h));
                box.y2 = std::clamp(box.y2, 0.0, static_cast<double>(frame_h));
                fd.boxes.push_back(std::move(box));
            }
        } catch (const json::exception& e) {
            throw LoadError("detections line " + std::to_string(lineno) + ": " + e.what());
        }
        set.frames.push_back(std::move(fd));
    }
    return set;
}

BoxAccum box_accum_from_string(const std::string& s) {
    if (s == "sum") return BoxAccum::sum;
    if (s == "mean") return BoxAccum::mean;
    throw ConfigError("unknown box accumulation mode '" + s + "'");
}

const char* to_string(BoxAccum m) { return m == BoxAccum::sum ? "sum" : "mean"; }

std::vector<double> box_scores(const SaliencyMap& map, const std::vector<DetectionBox>& boxes,
                               BoxAccum mode) {
    std::vector<double> scores;
    scores.reserve(boxes.size());
    const int h = static_cast<int>(map.values.rows());
    const int w = static_cast<int>(map.values.cols());
    for (const DetectionBox& box : boxes) {
        const auto [x0, x1] = pixel_range(box.x1, box.x2, w);
        const auto [y0, y1] = pixel_range(box.y1, box.y2, h);
        double acc = 0.0;
        long count = 0;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                acc += map.values(y, x);
                ++count;
            }
        }
        if (mode == BoxAccum::mean) acc = count > 0 ? acc / static_cast<double>(count) : 0.0;
        scores.push_back(acc);
    }
    return scores;
}

ExplanationRecord explain_frame(const SaliencyMap& map, const std::vector<DetectionBox>& boxes,
                                double threshold, BoxAccum mode) {
    if (threshold < 0.0) throw ConfigError("explain_frame: threshold must be >= 0");
    ExplanationRecord rec;
    rec.clip_id = map.clip_id;
    rec.frame_id = map.frame_id;
    const std::vector<double> scores = box_scores(map, boxes, mode);
    std::vector<size_t> order(boxes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });
    for (size_t i : order) {
        ExplanationEntry e;
        e.box = boxes[i];
        e.box_score = scores[i];
        e.anomalous = scores[i] >= threshold;
        rec.entries.push_back(std::move(e));
    }
    return rec;
}

void save_explanations(const fs::path& file, const std::vector<ExplanationRecord>& records) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write explanations " + file.string());
    for (const ExplanationRecord& rec : records) {
        json entries = json::array();
        for (const ExplanationEntry& e : rec.entries) {
            entries.push_back({{"box", {e.box.x1, e.box.y1, e.box.x2, e.box.y2}},
                               {"label", e.box.label},
                               {"source", to_string(e.box.source)},
                               {"detector_confidence", e.box.confidence},
                               {"box_score", e.box_score},
                               {"anomalous", e.anomalous}});
        }
        json j{{"clip", rec.clip_id}, {"frame", rec.frame_id}, {"entries", entries}};
        out << j.dump() << "\n";
    }
}

std::vector<ExplanationRecord> load_explanations(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open explanations " + file.string());
    std::vector<ExplanationRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw LoadError("explanations line " + std::to_string(lineno) + ": invalid JSON");
        ExplanationRecord rec;
        rec.clip_id = j.at("clip").get<std::string>();
        rec.frame_id = j.at("frame").get<int>();
        for (const auto& ej : j.at("entries")) {
            ExplanationEntry e;
            const auto& coords = ej.at("box");
            e.box.x1 = coords[0].get<double>();
            e.box.y1 = coords[1].get<double>();
            e.box.x2 = coords[2].get<double>();
            e.box.y2 = coords[3].get<double>();
            e.box.label = ej.at("label").get<std::string>();
            e.box.source = ej.at("source").get<std::string>() == "action" ? DetectionSource::action
                                                                          : DetectionSource::object;
            e.box.confidence = ej.at("detector_confidence").get<double>();
            e.box_score = ej.at("box_score").get<double>();
            e.anomalous = ej.at("anomalous").get<bool>();
            rec.entries.push_back(std::move(e));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

ApReport evaluate_map(const std::vector<ExplanationRecord>& records,
                      const std::map<std::string, GroundTruthLabels>& ground_truth,
                      const std::set<std::string>& exclude) {
    struct Prediction {
        double score;
        std::string clip_id;
        int frame;
        size_t order;  // insertion order, final tiebreak
    };
    std::map<std::string, std::vector<Prediction>> by_class;
    size_t counter = 0;
    for (const ExplanationRecord& rec : records) {
        auto it = ground_truth.find(rec.clip_id);
        if (it == ground_truth.end())
            throw LoadError("evaluate_map: clip '" + rec.clip_id + "' not in ground truth");
        if (rec.frame_id < 0 || rec.frame_id >= static_cast<int>(it->second.frame_flags.size()))
            throw LoadError("evaluate_map: frame " + std::to_string(rec.frame_id) +
                            " of clip '" + rec.clip_id + "' not in ground truth");
        for (const ExplanationEntry& e : rec.entries) {
            if (exclude.count(e.box.label)) continue;
            by_class[e.box.label].push_back({e.box_score, rec.clip_id, rec.frame_id, counter++});
        }
    }

    // Ground-truth positives per class: (clip, frame) occurrences.
    std::map<std::string, std::set<std::pair<std::string, int>>> gt_frames;
    for (const auto& [clip_id, gt] : ground_truth) {
        for (size_t f = 0; f < gt.explanation_labels.size(); ++f)
            for (const std::string& label : gt.explanation_labels[f])
                if (!exclude.count(label)) gt_frames[label].insert({clip_id, static_cast<int>(f)});
    }

    ApReport report;
    double ap_sum = 0.0;
    for (const auto& [label, positives] : gt_frames) {
        ClassAp entry;
        entry.label = label;
        entry.support = static_cast<int>(positives.size());
        auto preds_it = by_class.find(label);
        if (preds_it != by_class.end() && !positives.empty()) {
            auto preds = preds_it->second;
            std::sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.clip_id != b.clip_id) return a.clip_id < b.clip_id;
                if (a.frame != b.frame) return a.frame < b.frame;
                return a.order < b.order;
            });
            std::set<std::pair<std::string, int>> consumed;
            long tp = 0, seen = 0;
            double term_sum = 0.0;  // sum of precision at each new true positive
            for (const Prediction& p : preds) {
                ++seen;
                const std::pair<std::string, int> key{p.clip_id, p.frame};
                if (positives.count(key) && !consumed.count(key)) {
                    consumed.insert(key);
                    ++tp;
                    term_sum += static_cast<double>(tp) / static_cast<double>(seen);
                }
            }
            entry.ap = term_sum / static_cast<double>(positives.size());
        }
        ap_sum += entry.ap;
        report.per_class.push_back(std::move(entry));
    }
    report.map = report.per_class.empty() ? 0.0 : ap_sum / static_cast<double>(report.per_class.size());
    return report;
}

void save_ap_report(const fs::path& file, const ApReport& report) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot write AP report " + file.string());
    out << "class,AP,support\n" << std::setprecision(17);
    for (const ClassAp& c : report.per_class) out << c.label << "," << c.ap << "," << c.support << "\n";
    out << "mAP," << report.map << "," << report.per_class.size() << "\n";
}

double score_percentile(std::vector<double> scores, double p) {
    if (scores.empty()) throw NumericError("score_percentile: no scores");
    p = std::clamp(p, 0.0, 100.0);
    std::sort(scores.begin(), scores.end());
    const double idx = p / 100.0 * static_cast<double>(scores.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(idx));
    const size_t hi = std::min(lo + 1, scores.size() - 1);
    const double frac = idx - std::floor(idx);
    return scores[lo] * (1.0 - frac) + scores[hi] * frac;
}

}  // namespace vqad
