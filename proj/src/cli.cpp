#include "vqad/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>

#include "vqad/checkpoint.hpp"
#include "vqad/dataset.hpp"
#include "vqad/detect.hpp"
#include "vqad/errors.hpp"
#include "vqad/explain.hpp"
#include "vqad/manifest.hpp"
#include "vqad/plot.hpp"
#include "vqad/synthetic.hpp"
#include "vqad/train.hpp"
#include "vqad/version.hpp"

namespace fs = std::filesystem;

namespace vqad::cli {

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::vector<std::string> to_args(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 0; i < argc; ++i) args.emplace_back(argv[i]);
    return args;
}

TrainConfig resolve_train_config(const std::string& config_path,
                                 const std::vector<std::string>& overrides) {
    TrainConfig config =
        config_path.empty() ? TrainConfig{} : TrainConfig::parse_file(config_path);
    // Precedence: file < environment (VQAD_*) < --override.
    config.apply_env_overrides();
    for (const std::string& kv : overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--override expects key=value, got '" + kv + "'");
        config.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return config;
}

DatasetLayout layout_from_string(const std::string& s) {
    if (s == "synthetic") return DatasetLayout::synthetic;
    if (s == "ucsd_avenue") return DatasetLayout::ucsd_avenue;
    throw ConfigError("layout must be synthetic or ucsd_avenue");
}

int run_gen_synthetic(const std::vector<std::string>& argv, const std::string& config_path,
                      std::uint64_t seed, const std::string& out) {
    SyntheticConfig config =
        config_path.empty() ? SyntheticConfig{} : SyntheticConfig::parse_file(config_path);
    if (config_path.empty()) {
        // Default demo schedule: two anomaly segments per test clip.
        for (int clip = 0; clip < config.test_clips; ++clip) {
            config.anomalies.push_back({clip, AnomalyKind::shape, 8 + 2 * clip, 14});
            config.anomalies.push_back({clip, AnomalyKind::speed, 30, 10});
        }
    }
    Timer timer;
    RunManifest manifest = RunManifest::start("gen-synthetic", argv, config.to_text(), seed, {out});
    manifest.write(out);
    generate_synthetic(config, seed, out);
    manifest.finalize(out, timer.seconds());
    std::cout << "synthetic dataset written to " << out << "\n";
    return 0;
}

int run_train(const std::vector<std::string>& argv, const std::string& config_path,
              const std::vector<std::string>& overrides) {
    TrainConfig config = resolve_train_config(config_path, overrides);
    config.finalize();
    Timer timer;
    RunManifest manifest =
        RunManifest::start("train", argv, config.to_text(), config.seed, {config.out_dir});
    manifest.write(config.out_dir);
    TrainResult result = train(config);
    manifest.outputs.push_back(result.best_checkpoint.string());
    manifest.outputs.push_back(result.metrics_csv.string());
    manifest.finalize(config.out_dir, timer.seconds());
    std::cout << "trained " << result.epochs_completed << " epochs, " << result.steps_logged
              << " steps\nbest checkpoint: " << result.best_checkpoint.string() << "\n";
    return 0;
}

int run_ablate(const std::vector<std::string>& argv, const std::string& config_path,
               const std::vector<std::string>& overrides, const std::string& normalization) {
    TrainConfig config = resolve_train_config(config_path, overrides);
    config.finalize();
    Timer timer;
    RunManifest manifest =
        RunManifest::start("ablate", argv, config.to_text(), config.seed, {config.out_dir});
    manifest.write(config.out_dir);
    AblationResult result = run_ablation(config, normalization_from_string(normalization));
    manifest.finalize(config.out_dir, timer.seconds());

    std::cout << "Temporal  Codebook  AUC\n";
    for (const AblationCell& cell : result.cells) {
        std::cout << (cell.temporal ? "yes       " : "no        ")
                  << (cell.codebook ? "yes       " : "no        ");
        if (cell.failed)
            std::cout << "FAILED (" << cell.error << ")\n";
        else
            std::cout << cell.auc << "\n";
    }
    std::cout << "summary: " << result.summary_csv.string() << "\n";
    return 0;
}

int run_score(const std::vector<std::string>& argv, const std::string& checkpoint,
              const std::string& dataset_root, const std::string& layout, const std::string& out,
              const std::string& split, const std::string& normalization, int batch, int heatmap_every) {
    Timer timer;
    RunManifest manifest = RunManifest::start("score", argv, "", 0, {out});
    manifest.write(out);

    CheckpointMeta meta;
    VqUnet<float> net = load_checkpoint(checkpoint, &meta);
    LoadedDataset dataset = load_dataset(dataset_root, layout_from_string(layout), 0);
    const auto& clips = split == "training" ? dataset.training : dataset.testing;
    if (clips.empty()) throw LoadError("split '" + split + "' is empty");

    ScoreSeries scores = score_clips(net, clips, batch);
    apply_normalization(scores, normalization_from_string(normalization));
    save_score_series(out, scores);

    if (heatmap_every > 0) {
        const fs::path hm_dir = fs::path(out) / "heatmaps";
        fs::create_directories(hm_dir);
        for (const VideoClip& clip : clips) {
            for_each_saliency(net, clip, batch, [&](const SaliencyMap& map) {
                if ((map.frame_id - net.config().n) % heatmap_every != 0) return;
                char name[64];
                std::snprintf(name, sizeof(name), "%s_%06d.png", map.clip_id.c_str(), map.frame_id);
                const double vmax = std::max(1e-12, map.values.maxCoeff());
                save_png(hm_dir / name, denormalize_image(heatmap_image(map, vmax)));
            });
        }
    }
    manifest.finalize(out, timer.seconds());
    std::cout << "scores written to " << out << "\n";
    return 0;
}

int run_eval_auc(const std::string& scores_dir, const std::string& labels_root,
                 const std::string& layout, const std::string& normalization) {
    LoadedDataset dataset = load_dataset(labels_root, layout_from_string(layout), 0);
    ScoreSeries series = load_score_series(scores_dir);

    ScoreSeries minmax = series;
    apply_normalization(minmax, Normalization::per_video_minmax);
    ScoreSeries raw = series;
    apply_normalization(raw, Normalization::none);
    const double auc_minmax = evaluate_auc(minmax, dataset.labels);
    const double auc_raw = evaluate_auc(raw, dataset.labels);

    std::cout << "auc[per_video_minmax] = " << auc_minmax << "\n";
    std::cout << "auc[none] = " << auc_raw << "\n";
    const double selected =
        normalization_from_string(normalization) == Normalization::per_video_minmax ? auc_minmax : auc_raw;
    std::cout << "auc = " << selected << " (" << normalization << ")\n";
    return 0;
}

int run_explain(const std::vector<std::string>& argv, const std::string& checkpoint,
                const std::string& detections_path, const std::string& dataset_root,
                const std::string& layout, const std::string& out, double threshold,
                double threshold_percentile, const std::string& mode_str,
                const std::string& calib_split, int batch) {
    Timer timer;
    RunManifest manifest = RunManifest::start("explain", argv, "", 0, {out});
    manifest.write(out);

    const BoxAccum mode = box_accum_from_string(mode_str);
    VqUnet<float> net = load_checkpoint(checkpoint);
    LoadedDataset dataset = load_dataset(dataset_root, layout_from_string(layout), 0);
    if (dataset.testing.empty()) throw LoadError("testing split is empty");
    const int w = dataset.testing.front().width();
    const int h = dataset.testing.front().height();
    DetectionSet detections = load_detections(detections_path, w, h);

    // Index detections per clip/frame.
    std::map<std::string, std::map<int, const FrameDetections*>> index;
    for (const FrameDetections& fd : detections.frames) index[fd.clip_id][fd.frame] = &fd;

    struct PendingFrame {
        std::string clip_id;
        int frame_id;
        const FrameDetections* dets;
        std::vector<double> scores;
    };
    std::vector<PendingFrame> pending;
    for (const VideoClip& clip : dataset.testing) {
        auto clip_it = index.find(clip.clip_id);
        if (clip_it == index.end()) continue;
        for_each_saliency(net, clip, batch, [&](const SaliencyMap& map) {
            auto frame_it = clip_it->second.find(map.frame_id);
            if (frame_it == clip_it->second.end()) return;
            pending.push_back({map.clip_id, map.frame_id, frame_it->second,
                               box_scores(map, frame_it->second->boxes, mode)});
        });
    }

    double effective_threshold = threshold;
    if (effective_threshold < 0) {
        // Calibrate on a normal-only split when detection fixtures cover it,
        // otherwise fall back to the scores of the current run.
        std::vector<double> calib;
        if (calib_split == "training") {
            for (const VideoClip& clip : dataset.training) {
                auto clip_it = index.find(clip.clip_id);
                if (clip_it == index.end()) continue;
                for_each_saliency(net, clip, batch, [&](const SaliencyMap& map) {
                    auto frame_it = clip_it->second.find(map.frame_id);
                    if (frame_it == clip_it->second.end()) return;
                    for (double s : box_scores(map, frame_it->second->boxes, mode)) calib.push_back(s);
                });
            }
        }
        if (calib.empty())
            for (const PendingFrame& pf : pending)
                calib.insert(calib.end(), pf.scores.begin(), pf.scores.end());
        if (calib.empty()) throw LoadError("no detection boxes overlap the scored frames");
        effective_threshold = score_percentile(calib, threshold_percentile);
        std::cout << "calibrated threshold = " << effective_threshold << " (p" << threshold_percentile
                  << ")\n";
    }

    std::vector<ExplanationRecord> records;
    for (const PendingFrame& pf : pending) {
        ExplanationRecord rec;
        rec.clip_id = pf.clip_id;
        rec.frame_id = pf.frame_id;
        std::vector<size_t> order(pf.dets->boxes.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&pf](size_t a, size_t b) { return pf.scores[a] > pf.scores[b]; });
        for (size_t i : order) {
            ExplanationEntry e;
            e.box = pf.dets->boxes[i];
            e.box_score = pf.scores[i];
            e.anomalous = pf.scores[i] >= effective_threshold;
            rec.entries.push_back(std::move(e));
        }
        records.push_back(std::move(rec));
    }

    const fs::path out_file = fs::path(out) / "explanations.jsonl";
    save_explanations(out_file, records);
    manifest.outputs.push_back(out_file.string());
    manifest.finalize(out, timer.seconds());
    std::cout << records.size() << " frames explained -> " << out_file.string() << "\n";
    return 0;
}

int run_eval_map(const std::string& explanations_path, const std::string& labels_root,
                 const std::string& layout, const std::vector<std::string>& exclude,
                 const std::string& out_csv) {
    LoadedDataset dataset = load_dataset(labels_root, layout_from_string(layout), 0);
    fs::path file = explanations_path;
    if (fs::is_directory(file)) file /= "explanations.jsonl";
    const std::vector<ExplanationRecord> records = load_explanations(file);
    const std::set<std::string> excluded(exclude.begin(), exclude.end());
    const ApReport report = evaluate_map(records, dataset.labels, excluded);
    for (const ClassAp& c : report.per_class)
        std::cout << "AP[" << c.label << "] = " << c.ap << " (support " << c.support << ")\n";
    std::cout << "mAP = " << report.map << " over " << report.per_class.size() << " classes\n";
    if (!out_csv.empty()) save_ap_report(out_csv, report);
    return 0;
}

int run_plot(const std::vector<std::string>& argv, const std::string& scores_dir,
             const std::string& labels_root, const std::string& layout, const std::string& out) {
    Timer timer;
    RunManifest manifest = RunManifest::start("plot", argv, "", 0, {out});
    manifest.write(out);
    ScoreSeries series = load_score_series(scores_dir);
    std::map<std::string, GroundTruthLabels> labels;
    if (!labels_root.empty()) {
        LoadedDataset dataset = load_dataset(labels_root, layout_from_string(layout), 0);
        labels = dataset.labels;
        plot_roc(series, labels, fs::path(out) / "roc.png");
    }
    for (const auto& clip : series.clips) {
        const GroundTruthLabels* gt = nullptr;
        auto it = labels.find(clip.clip_id);
        if (it != labels.end()) gt = &it->second;
        plot_timeline(clip, gt, fs::path(out) / ("timeline_" + clip.clip_id + ".png"));
    }
    manifest.finalize(out, timer.seconds());
    std::cout << "plots written to " << out << "\n";
    return 0;
}

int run_codebook_dump(const std::string& checkpoint, const std::string& out_csv) {
    VqUnet<float> net = load_checkpoint(checkpoint);
    if (!net.config().use_codebook) throw LoadError("checkpoint has no codebook");
    std::ofstream out(out_csv);
    if (!out) throw IoError("cannot write " + out_csv);
    const Codebook<float>& cb = net.codebook();
    out << "entry,usage";
    for (int d = 0; d < cb.dim(); ++d) out << ",e" << d;
    out << "\n";
    for (int j = 0; j < cb.size(); ++j) {
        out << j << "," << cb.usage[static_cast<size_t>(j)];
        for (int d = 0; d < cb.dim(); ++d) out << "," << cb.entries()(d, j);
        out << "\n";
    }
    std::cout << "codebook dumped to " << out_csv << " (K=" << cb.size() << ", D=" << cb.dim() << ")\n";
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{
        "vqad - video anomaly detection via vector-quantized future-frame prediction.\n"
        "Config precedence: config file < VQAD_* environment variables < --override key=value."};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersionTag);
    const std::vector<std::string> argv_copy = to_args(argc, argv);

    // gen-synthetic
    std::string gs_config, gs_out;
    std::uint64_t gs_seed = 1;
    auto* gen = app.add_subcommand("gen-synthetic", "Generate a deterministic synthetic dataset");
    gen->add_option("--config", gs_config, "Synthetic config file (key = value schema)");
    gen->add_option("--seed", gs_seed, "Generator seed");
    gen->add_option("--out", gs_out, "Output dataset root")->required();

    // train
    std::string tr_config;
    std::vector<std::string> tr_overrides;
    auto* tr = app.add_subcommand("train", "Train a model");
    tr->add_option("--config", tr_config, "Train config file");
    tr->add_option("--override", tr_overrides, "key=value config override (repeatable)");

    // ablate
    std::string ab_config, ab_norm = "per_video_minmax";
    std::vector<std::string> ab_overrides;
    auto* ab = app.add_subcommand("ablate",
                                  "Train the {temporal} x {codebook} grid and report per-cell AUC");
    ab->add_option("--config", ab_config, "Train config file (base for all four cells)");
    ab->add_option("--override", ab_overrides, "key=value config override (repeatable)");
    ab->add_option("--normalization", ab_norm, "per_video_minmax|none");

    // score
    std::string sc_ckpt, sc_dataset, sc_out, sc_split = "testing", sc_norm = "per_video_minmax",
                sc_layout = "synthetic";
    int sc_batch = 8, sc_heatmaps = 0;
    auto* sc = app.add_subcommand("score", "Score frames of a dataset split with a trained model");
    sc->add_option("--checkpoint", sc_ckpt)->required();
    sc->add_option("--dataset", sc_dataset, "Dataset root")->required();
    sc->add_option("--layout", sc_layout, "synthetic|ucsd_avenue");
    sc->add_option("--out", sc_out, "Output directory for score CSVs")->required();
    sc->add_option("--split", sc_split, "testing|training");
    sc->add_option("--normalization", sc_norm, "per_video_minmax|none");
    sc->add_option("--batch", sc_batch, "Scoring batch size");
    sc->add_option("--heatmaps", sc_heatmaps, "Also write every Nth saliency heatmap PNG (0 = off)");

    // eval-auc
    std::string ea_scores, ea_labels, ea_norm = "per_video_minmax", ea_layout = "synthetic";
    auto* ea = app.add_subcommand("eval-auc", "Frame-level ROC-AUC of saved scores against labels");
    ea->add_option("--scores", ea_scores, "Directory of per-clip score CSVs")->required();
    ea->add_option("--labels", ea_labels, "Dataset root providing ground-truth labels")->required();
    ea->add_option("--layout", ea_layout, "synthetic|ucsd_avenue");
    ea->add_option("--normalization", ea_norm, "Normalization of the headline number");

    // explain
    std::string ex_ckpt, ex_dets, ex_dataset, ex_out, ex_mode = "sum", ex_calib = "training",
                ex_layout = "synthetic";
    double ex_threshold = -1.0, ex_percentile = 99.0;
    int ex_batch = 8;
    auto* ex = app.add_subcommand("explain", "Label anomalous regions using detector outputs");
    ex->add_option("--checkpoint", ex_ckpt)->required();
    ex->add_option("--detections", ex_dets, "Detection JSON-lines file")->required();
    ex->add_option("--dataset", ex_dataset, "Dataset root")->required();
    ex->add_option("--layout", ex_layout, "synthetic|ucsd_avenue");
    ex->add_option("--out", ex_out, "Output directory")->required();
    ex->add_option("--threshold", ex_threshold, "Absolute anomaly threshold (omit to calibrate)");
    ex->add_option("--threshold-percentile", ex_percentile,
                   "Percentile for calibrated threshold (default 99)");
    ex->add_option("--mode", ex_mode, "Box accumulation: sum|mean");
    ex->add_option("--calib-split", ex_calib, "training|none: split used for threshold calibration");
    ex->add_option("--batch", ex_batch, "Scoring batch size");

    // eval-map
    std::string em_expl, em_labels, em_out, em_layout = "synthetic";
    std::vector<std::string> em_exclude;
    auto* em = app.add_subcommand("eval-map", "Per-class AP / mAP of explanations against labels");
    em->add_option("--explanations", em_expl, "explanations.jsonl file or its directory")->required();
    em->add_option("--labels", em_labels, "Dataset root providing explanation labels")->required();
    em->add_option("--layout", em_layout, "synthetic|ucsd_avenue");
    em->add_option("--exclude", em_exclude, "Class labels to exclude (repeatable)");
    em->add_option("--out", em_out, "Write the per-class AP report CSV here");

    // plot
    std::string pl_scores, pl_labels, pl_out, pl_layout = "synthetic";
    auto* pl = app.add_subcommand("plot", "Render ROC and per-clip score timeline PNGs");
    pl->add_option("--scores", pl_scores, "Directory of per-clip score CSVs")->required();
    pl->add_option("--labels", pl_labels, "Dataset root (enables ROC + shading)");
    pl->add_option("--layout", pl_layout, "synthetic|ucsd_avenue");
    pl->add_option("--out", pl_out, "Output directory")->required();

    // codebook-dump
    std::string cd_ckpt, cd_out;
    auto* cd = app.add_subcommand("codebook-dump", "Dump codebook entries and usage counts as CSV");
    cd->add_option("--checkpoint", cd_ckpt)->required();
    cd->add_option("--out", cd_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << kVersionTag << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) return run_gen_synthetic(argv_copy, gs_config, gs_seed, gs_out);
        if (tr->parsed()) return run_train(argv_copy, tr_config, tr_overrides);
        if (ab->parsed()) return run_ablate(argv_copy, ab_config, ab_overrides, ab_norm);
        if (sc->parsed())
            return run_score(argv_copy, sc_ckpt, sc_dataset, sc_layout, sc_out, sc_split, sc_norm,
                             sc_batch, sc_heatmaps);
        if (ea->parsed()) return run_eval_auc(ea_scores, ea_labels, ea_layout, ea_norm);
        if (ex->parsed())
            return run_explain(argv_copy, ex_ckpt, ex_dets, ex_dataset, ex_layout, ex_out, ex_threshold,
                               ex_percentile, ex_mode, ex_calib, ex_batch);
        if (em->parsed()) return run_eval_map(em_expl, em_labels, em_layout, em_exclude, em_out);
        if (pl->parsed()) return run_plot(argv_copy, pl_scores, pl_labels, pl_layout, pl_out);
        if (cd->parsed()) return run_codebook_dump(cd_ckpt, cd_out);
    } catch (const Error& e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[runtime]: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int dispatch(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace vqad::cli
