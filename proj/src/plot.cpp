#include "vqad/plot.hpp"

#include <algorithm>
#include <cmath>

#include "vqad/errors.hpp"
#include "vqad/image.hpp"

namespace fs = std::filesystem;

namespace vqad {

namespace {

struct Color {
    float r, g, b;
};

constexpr Color kWhite{1.0f, 1.0f, 1.0f};
constexpr Color kAxis{-0.6f, -0.6f, -0.6f};
constexpr Color kCurve{-0.8f, -0.2f, 0.9f};
constexpr Color kShade{0.95f, 0.55f, 0.45f};
constexpr Color kDiag{0.4f, 0.4f, 0.4f};

void fill(Image& img, Color c) {
    img.data.row(0).setConstant(c.r);
    img.data.row(1).setConstant(c.g);
    img.data.row(2).setConstant(c.b);
}

void put(Image& img, int x, int y, Color c) {
    if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
    img.at(0, y, x) = c.r;
    img.at(1, y, x) = c.g;
    img.at(2, y, x) = c.b;
}

void draw_line(Image& img, int x0, int y0, int x1, int y1, Color c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put(img, x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, Color c) {
    for (int y = std::max(0, y0); y < std::min(img.h, y1); ++y)
        for (int x = std::max(0, x0); x < std::min(img.w, x1); ++x) put(img, x, y, c);
}

struct Frame {
    int left, top, right, bottom;  // plot area in pixels
    int px(double t) const { return left + static_cast<int>(std::lround(t * (right - left))); }
    int py(double t) const { return bottom - static_cast<int>(std::lround(t * (bottom - top))); }
};

Frame draw_axes(Image& img) {
    Frame f{48, 16, img.w - 16, img.h - 32};
    draw_line(img, f.left, f.top, f.left, f.bottom, kAxis);
    draw_line(img, f.left, f.bottom, f.right, f.bottom, kAxis);
    for (int i = 0; i <= 4; ++i) {
        const int x = f.px(i / 4.0), y = f.py(i / 4.0);
        draw_line(img, x, f.bottom, x, f.bottom + 4, kAxis);
        draw_line(img, f.left - 4, y, f.left, y, kAxis);
    }
    return f;
}

}  // namespace

void plot_roc(const ScoreSeries& scores, const std::map<std::string, GroundTruthLabels>& labels,
              const fs::path& file) {
    std::vector<std::pair<double, int>> samples;
    for (const auto& clip : scores.clips) {
        auto it = labels.find(clip.clip_id);
        if (it == labels.end()) throw LoadError("plot_roc: no labels for clip '" + clip.clip_id + "'");
        const auto& vals = clip.normalized.size() == clip.raw.size() ? clip.normalized : clip.raw;
        for (size_t i = 0; i < vals.size(); ++i)
            samples.emplace_back(vals[i], it->second.frame_flags[static_cast<size_t>(clip.first_frame) + i]);
    }
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const double pos = static_cast<double>(
        std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.second == 1; }));
    const double neg = static_cast<double>(samples.size()) - pos;
    if (pos == 0 || neg == 0) throw NumericError("plot_roc: degenerate labels");

    Image img(360, 480);
    fill(img, kWhite);
    const Frame f = draw_axes(img);
    draw_line(img, f.px(0), f.py(0), f.px(1), f.py(1), kDiag);

    double tp = 0, fp = 0;
    int lx = f.px(0), ly = f.py(0);
    size_t i = 0;
    while (i < samples.size()) {
        size_t j = i;
        while (j + 1 < samples.size() && samples[j + 1].first == samples[i].first) ++j;
        for (size_t k = i; k <= j; ++k) {
            if (samples[k].second == 1) tp += 1;
            else fp += 1;
        }
        const int x = f.px(fp / neg), y = f.py(tp / pos);
        draw_line(img, lx, ly, x, y, kCurve);
        lx = x;
        ly = y;
        i = j + 1;
    }
    save_png(file, denormalize_image(img));
}

void plot_timeline(const ScoreSeries::ClipScores& clip, const GroundTruthLabels* labels,
                   const fs::path& file) {
    Image img(240, 640);
    fill(img, kWhite);
    const Frame f = draw_axes(img);
    const auto& vals = clip.normalized.size() == clip.raw.size() ? clip.normalized : clip.raw;
    if (vals.empty()) throw NumericError("plot_timeline: no scores for clip " + clip.clip_id);
    const double hi = *std::max_element(vals.begin(), vals.end());
    const double lo = *std::min_element(vals.begin(), vals.end());
    const double span = hi - lo > 0 ? hi - lo : 1.0;
    const double total = static_cast<double>(vals.size() - 1 > 0 ? vals.size() - 1 : 1);

    if (labels != nullptr) {
        for (size_t i = 0; i < vals.size(); ++i) {
            const size_t frame = static_cast<size_t>(clip.first_frame) + i;
            if (frame < labels->frame_flags.size() && labels->frame_flags[frame] == 1) {
                const int x0 = f.px(static_cast<double>(i) / total);
                const int x1 = f.px(static_cast<double>(i + 1) / total);
                fill_rect(img, x0, f.top, std::max(x1, x0 + 1), f.bottom, kShade);
            }
        }
    }
    int lx = f.px(0), ly = f.py((vals[0] - lo) / span);
    for (size_t i = 1; i < vals.size(); ++i) {
        const int x = f.px(static_cast<double>(i) / total);
        const int y = f.py((vals[i] - lo) / span);
        draw_line(img, lx, ly, x, y, kCurve);
        lx = x;
        ly = y;
    }
    save_png(file, denormalize_image(img));
}

}  // namespace vqad
