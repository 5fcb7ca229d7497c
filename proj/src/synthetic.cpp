#include "vqad/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vqad/errors.hpp"
#include "vqad/rng.hpp"

namespace fs = std::filesystem;

namespace vqad {

namespace {

using nlohmann::json;

struct Rgb {
    std::uint8_t r, g, b;
};

constexpr Rgb kBackground{40, 42, 46};
constexpr Rgb kBoxColor{70, 200, 90};
constexpr Rgb kDiscColor{230, 150, 60};
constexpr Rgb kCheckerA{250, 240, 70};
constexpr Rgb kCheckerB{70, 90, 250};

enum class EntityShape { box, disc, checker };

const char* shape_label(EntityShape s) {
    switch (s) {
        case EntityShape::box: return "box";
        case EntityShape::disc: return "disc";
        case EntityShape::checker: return "checker";
    }
    return "?";
}

struct Entity {
    EntityShape shape = EntityShape::box;
    double cx = 0, cy = 0;
    int dir_x = 1, dir_y = 0;  // unit direction per axis
    int base_speed = 1;
    int half = 5;              // half-extent in pixels
    bool fast = false;         // 3x speed active
    bool confined = false;     // bounces inside the forbidden region
    int spawn_frame = 0, despawn_frame = 1 << 30;

    int speed() const { return fast ? 3 * base_speed : base_speed; }
    double x1() const { return cx - half; }
    double y1() const { return cy - half; }
    double x2() const { return cx + half; }
    double y2() const { return cy + half; }
};

struct Field {
    int x1, y1, x2, y2;  // entity centers stay in [x1+half, x2-half)
};

void advance(Entity& e, const Field& field) {
    const int s = e.speed();
    for (int step = 0; step < s; ++step) {
        double nx = e.cx + e.dir_x;
        if (nx - e.half < field.x1 || nx + e.half > field.x2) e.dir_x = -e.dir_x;
        e.cx += e.dir_x;
        double ny = e.cy + e.dir_y;
        if (ny - e.half < field.y1 || ny + e.half > field.y2) e.dir_y = -e.dir_y;
        e.cy += e.dir_y;
    }
}

void put_pixel(RawImage& img, int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
    const size_t i = (static_cast<size_t>(y) * img.w + x) * 3;
    img.rgb[i] = c.r;
    img.rgb[i + 1] = c.g;
    img.rgb[i + 2] = c.b;
}

void render_entity(RawImage& img, const Entity& e) {
    const int x0 = static_cast<int>(std::lround(e.x1())), x1 = static_cast<int>(std::lround(e.x2()));
    const int y0 = static_cast<int>(std::lround(e.y1())), y1 = static_cast<int>(std::lround(e.y2()));
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            switch (e.shape) {
                case EntityShape::box:
                    put_pixel(img, x, y, kBoxColor);
                    break;
                case EntityShape::disc: {
                    const double dx = x + 0.5 - e.cx, dy = y + 0.5 - e.cy;
                    if (dx * dx + dy * dy <= e.half * e.half) put_pixel(img, x, y, kDiscColor);
                    break;
                }
                case EntityShape::checker: {
                    const int cell = ((x - x0) / 3 + (y - y0) / 3) % 2;
                    put_pixel(img, x, y, cell == 0 ? kCheckerA : kCheckerB);
                    break;
                }
            }
        }
    }
}

struct ClipPlan {
    std::vector<Entity> entities;
    std::vector<const AnomalySpec*> anomalies;  // test clips only
};

// Direction set: axis-aligned and diagonal unit steps.
constexpr int kDirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {-1, -1}, {1, -1}, {-1, 1}};

Entity spawn_entity(Rng& rng, const Field& field, EntityShape shape, int half,
                    const std::vector<Entity>& existing) {
    Entity e;
    e.shape = shape;
    e.half = half;
    const auto& d = kDirs[rng.uniform_int(0, 7)];
    e.dir_x = d[0];
    e.dir_y = d[1];
    e.base_speed = 1;
    for (int attempt = 0; attempt < 64; ++attempt) {
        e.cx = static_cast<double>(rng.uniform_int(field.x1 + half, field.x2 - half));
        e.cy = static_cast<double>(rng.uniform_int(field.y1 + half, field.y2 - half));
        bool clear = true;
        for (const Entity& o : existing) {
            if (std::abs(o.cx - e.cx) < o.half + half + 6 && std::abs(o.cy - e.cy) < o.half + half + 6) {
                clear = false;
                break;
            }
        }
        if (clear) break;
    }
    return e;
}

double box_confidence(Rng& rng) { return 0.80 + 0.15 * rng.uniform(); }

}  // namespace

void SyntheticConfig::validate() const {
    if (width < 16 || height < 16) throw ConfigError("synthetic: frame size too small");
    if (train_clips < 1 || test_clips < 1) throw ConfigError("synthetic: need at least one clip per split");
    if (train_frames < 1 || test_frames < 1) throw ConfigError("synthetic: need at least one frame per clip");
    if (entities_min < 1 || entities_max < entities_min)
        throw ConfigError("synthetic: bad entity count range");
    if (has_region()) {
        if (region[0] < 0 || region[1] < 0 || region[2] > width || region[3] > height)
            throw ConfigError("synthetic: forbidden region outside frame bounds");
    }
    for (const AnomalySpec& a : anomalies) {
        if (a.clip_index < 0 || a.clip_index >= test_clips)
            throw ConfigError("synthetic: anomaly clip index " + std::to_string(a.clip_index) +
                              " out of range");
        if (a.start < 0 || a.length < 1 || a.start + a.length > test_frames)
            throw ConfigError("synthetic: anomaly segment [" + std::to_string(a.start) + ", " +
                              std::to_string(a.start + a.length) + ") outside clip");
        if (a.kind == AnomalyKind::location && !has_region())
            throw ConfigError("synthetic: location anomaly requires a forbidden region");
    }
}

SyntheticData render_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
    config.validate();
    SyntheticData data;
    Rng master(seed);

    // Normal entities keep out of the forbidden region by construction: the
    // playfield starts below it when the region is a top strip, otherwise
    // spawning simply avoids the rectangle.
    Field field{0, 0, config.width, config.height};
    if (config.has_region() && config.region[1] == 0 && config.region[0] == 0 &&
        config.region[2] == config.width)
        field.y1 = config.region[3];

    auto render_clip = [&](int clip_index, bool test_split) {
        const int frames = test_split ? config.test_frames : config.train_frames;
        Rng rng = master.fork(static_cast<std::uint64_t>(test_split ? 100000 + clip_index : clip_index));

        std::vector<Entity> entities;
        const int count = static_cast<int>(rng.uniform_int(config.entities_min, config.entities_max));
        for (int i = 0; i < count; ++i) {
            const EntityShape shape = (i % 2 == 0) ? EntityShape::box : EntityShape::disc;
            const int half = shape == EntityShape::box ? 5 : 6;
            entities.push_back(spawn_entity(rng, field, shape, half, entities));
        }

        std::vector<const AnomalySpec*> clip_anoms;
        if (test_split)
            for (const AnomalySpec& a : config.anomalies)
                if (a.clip_index == clip_index) clip_anoms.push_back(&a);

        // Pre-spawn anomaly entities (inactive until their segment).
        std::map<const AnomalySpec*, size_t> anom_entity;
        for (const AnomalySpec* a : clip_anoms) {
            if (a->kind == AnomalyKind::shape) {
                Entity e = spawn_entity(rng, field, EntityShape::checker, 9, entities);
                e.spawn_frame = a->start;
                e.despawn_frame = a->start + a->length;
                anom_entity[a] = entities.size();
                entities.push_back(e);
            } else if (a->kind == AnomalyKind::location) {
                Field inner{config.region[0], config.region[1], config.region[2], config.region[3]};
                Entity e;
                e.shape = EntityShape::box;
                e.half = 5;
                e.confined = true;
                const auto& d = kDirs[rng.uniform_int(0, 3)];
                e.dir_x = d[0];
                e.dir_y = d[1];
                e.cx = static_cast<double>(rng.uniform_int(inner.x1 + e.half, inner.x2 - e.half));
                e.cy = static_cast<double>(rng.uniform_int(inner.y1 + e.half, inner.y2 - e.half));
                e.spawn_frame = a->start;
                e.despawn_frame = a->start + a->length;
                anom_entity[a] = entities.size();
                entities.push_back(e);
            }
        }

        VideoClip clip;
        clip.clip_id = (test_split ? "test_" : "train_") + std::string(clip_index < 10 ? "0" : "") +
                       std::to_string(clip_index);
        clip.fps = config.fps;
        GroundTruthLabels gt;
        gt.frame_flags.assign(static_cast<size_t>(frames), 0);
        gt.explanation_labels.resize(static_cast<size_t>(frames));
        std::vector<std::vector<SynthBox>> dets(static_cast<size_t>(frames));

        for (int f = 0; f < frames; ++f) {
            // Activate/deactivate segments.
            for (const AnomalySpec* a : clip_anoms) {
                if (a->kind == AnomalyKind::speed)
                    entities[0].fast = f >= a->start && f < a->start + a->length;
            }

            RawImage raw;
            raw.w = config.width;
            raw.h = config.height;
            raw.rgb.assign(static_cast<size_t>(raw.w) * raw.h * 3, 0);
            for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(raw.w) * raw.h; ++p) {
                raw.rgb[static_cast<size_t>(p) * 3] = kBackground.r;
                raw.rgb[static_cast<size_t>(p) * 3 + 1] = kBackground.g;
                raw.rgb[static_cast<size_t>(p) * 3 + 2] = kBackground.b;
            }

            for (Entity& e : entities) {
                if (f < e.spawn_frame || f >= e.despawn_frame) continue;
                render_entity(raw, e);
                if (config.emit_detections) {
                    const double bx1 = std::max(0.0, e.x1()), by1 = std::max(0.0, e.y1());
                    const double bx2 = std::min<double>(config.width, e.x2());
                    const double by2 = std::min<double>(config.height, e.y2());
                    dets[static_cast<size_t>(f)].push_back(
                        {bx1, by1, bx2, by2, shape_label(e.shape), "object", box_confidence(rng)});
                    dets[static_cast<size_t>(f)].push_back(
                        {bx1, by1, bx2, by2, e.speed() >= 3 ? "dash" : "drift", "action",
                         box_confidence(rng)});
                }
            }

            for (const AnomalySpec* a : clip_anoms) {
                if (f < a->start || f >= a->start + a->length) continue;
                gt.frame_flags[static_cast<size_t>(f)] = 1;
                const char* label = a->kind == AnomalyKind::shape     ? "checker"
                                    : a->kind == AnomalyKind::speed   ? "dash"
                                                                      : "restricted";
                auto& labels = gt.explanation_labels[static_cast<size_t>(f)];
                if (std::find(labels.begin(), labels.end(), label) == labels.end())
                    labels.emplace_back(label);
            }

            clip.frames.push_back(normalize_image(raw));

            for (Entity& e : entities) {
                if (f < e.spawn_frame || f >= e.despawn_frame) continue;
                if (e.confined) {
                    Field inner{config.region[0], config.region[1], config.region[2], config.region[3]};
                    advance(e, inner);
                } else {
                    advance(e, field);
                }
            }
        }

        if (config.emit_detections) data.detections[clip.clip_id] = std::move(dets);
        if (test_split) {
            data.labels[clip.clip_id] = std::move(gt);
            data.testing.push_back(std::move(clip));
        } else {
            data.training.push_back(std::move(clip));
        }
    };

    for (int i = 0; i < config.train_clips; ++i) render_clip(i, false);
    for (int i = 0; i < config.test_clips; ++i) render_clip(i, true);
    return data;
}

void generate_synthetic(const SyntheticConfig& config, std::uint64_t seed, const fs::path& out_root) {
    SyntheticData data = render_synthetic(config, seed);

    auto write_clip = [&](const VideoClip& clip, const std::string& split) {
        const fs::path dir = out_root / split / "frames" / clip.clip_id;
        fs::create_directories(dir);
        char name[32];
        for (size_t f = 0; f < clip.frames.size(); ++f) {
            std::snprintf(name, sizeof(name), "%06zu.png", f);
            save_png(dir / name, denormalize_image(clip.frames[f]));
        }
    };

    for (const VideoClip& clip : data.training) write_clip(clip, "training");
    fs::create_directories(out_root / "testing" / "labels");
    fs::create_directories(out_root / "testing" / "explanations");
    for (const VideoClip& clip : data.testing) {
        write_clip(clip, "testing");
        const GroundTruthLabels& gt = data.labels.at(clip.clip_id);
        {
            std::ofstream out(out_root / "testing" / "labels" / (clip.clip_id + ".csv"));
            for (int flag : gt.frame_flags) out << flag << "\n";
        }
        {
            std::ofstream out(out_root / "testing" / "explanations" / (clip.clip_id + ".jsonl"));
            for (size_t f = 0; f < gt.explanation_labels.size(); ++f) {
                if (gt.explanation_labels[f].empty()) continue;
                json j{{"frame", static_cast<int>(f)}, {"labels", gt.explanation_labels[f]}};
                out << j.dump() << "\n";
            }
        }
    }

    if (config.emit_detections) {
        std::ofstream out(out_root / "detections.jsonl");
        for (const auto& [clip_id, frames] : data.detections) {
            for (size_t f = 0; f < frames.size(); ++f) {
                json boxes = json::array();
                for (const SynthBox& b : frames[f])
                    boxes.push_back({{"box", {b.x1, b.y1, b.x2, b.y2}},
                                     {"label", b.label},
                                     {"score", b.confidence},
                                     {"source", b.source}});
                json j{{"clip", clip_id}, {"frame", static_cast<int>(f)}, {"boxes", boxes}};
                out << j.dump() << "\n";
            }
        }
    }

    std::ofstream meta(out_root / "meta.ini");
    meta << "width = " << config.width << "\n"
         << "height = " << config.height << "\n"
         << "fps = " << config.fps << "\n"
         << "seed = " << seed << "\n";
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

AnomalyKind parse_kind(const std::string& s) {
    if (s == "shape") return AnomalyKind::shape;
    if (s == "speed") return AnomalyKind::speed;
    if (s == "location") return AnomalyKind::location;
    throw ConfigError("synthetic: unknown anomaly kind '" + s + "'");
}

const char* kind_name(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::shape: return "shape";
        case AnomalyKind::speed: return "speed";
        case AnomalyKind::location: return "location";
    }
    return "?";
}

}  // namespace

SyntheticConfig SyntheticConfig::parse_text(const std::string& text) {
    SyntheticConfig c;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("synthetic config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "width") c.width = std::stoi(value);
            else if (key == "height") c.height = std::stoi(value);
            else if (key == "fps") c.fps = std::stod(value);
            else if (key == "train_clips") c.train_clips = std::stoi(value);
            else if (key == "test_clips") c.test_clips = std::stoi(value);
            else if (key == "train_frames") c.train_frames = std::stoi(value);
            else if (key == "test_frames") c.test_frames = std::stoi(value);
            else if (key == "entities_min") c.entities_min = std::stoi(value);
            else if (key == "entities_max") c.entities_max = std::stoi(value);
            else if (key == "emit_detections") c.emit_detections = (value == "true" || value == "1");
            else if (key == "forbidden_region") {
                const auto parts = split_commas(value);
                if (parts.size() != 4) throw ConfigError("forbidden_region needs x1,y1,x2,y2");
                for (int i = 0; i < 4; ++i) c.region[i] = std::stoi(parts[static_cast<size_t>(i)]);
            } else if (key == "anomaly") {
                const auto parts = split_commas(value);
                if (parts.size() != 4) throw ConfigError("anomaly needs clip,kind,start,length");
                AnomalySpec a;
                a.clip_index = std::stoi(parts[0]);
                a.kind = parse_kind(parts[1]);
                a.start = std::stoi(parts[2]);
                a.length = std::stoi(parts[3]);
                c.anomalies.push_back(a);
            } else {
                throw ConfigError("synthetic config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("synthetic config line " + std::to_string(lineno) + ": bad value '" + value +
                              "'");
        }
    }
    c.validate();
    return c;
}

SyntheticConfig SyntheticConfig::parse_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open synthetic config " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

std::string SyntheticConfig::to_text() const {
    std::stringstream out;
    out << "width = " << width << "\nheight = " << height << "\nfps = " << fps
        << "\ntrain_clips = " << train_clips << "\ntest_clips = " << test_clips
        << "\ntrain_frames = " << train_frames << "\ntest_frames = " << test_frames
        << "\nentities_min = " << entities_min << "\nentities_max = " << entities_max
        << "\nemit_detections = " << (emit_detections ? "true" : "false") << "\n";
    if (has_region())
        out << "forbidden_region = " << region[0] << "," << region[1] << "," << region[2] << ","
            << region[3] << "\n";
    for (const AnomalySpec& a : anomalies)
        out << "anomaly = " << a.clip_index << "," << kind_name(a.kind) << "," << a.start << ","
            << a.length << "\n";
    return out.str();
}

}  // namespace vqad
