#include "vqad/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "vqad/errors.hpp"
#include "vqad/rng.hpp"

namespace fs = std::filesystem;

namespace vqad {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected boolean, got '" + v + "'");
}

const char* const kKnownKeys[] = {
    "mode",       "use_codebook", "learning_rate", "epochs",        "batch_size",
    "seed",       "clip_norm",    "codebook_init", "dataset_root",  "layout",
    "input_size", "out_dir",      "n",             "levels",        "base_channels",
    "bottleneck_dim", "codebook_size", "lambda_e", "lambda_c",      "lambda_s",
    "beta",       "gamma",        "alpha"};

std::string format_value(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

Image image_from_column(const Tensor<float>& batch, int b, int h, int w) {
    Image img(h, w);
    img.data = batch.sample(b);
    return img;
}

}  // namespace

void TrainConfig::finalize() {
    network.mode = mode;
    network.use_codebook = use_codebook;
    if (mode == ModelMode::reconstruction) network.n = 0;
    if (mode == ModelMode::prediction && network.n < 1)
        throw ConfigError("prediction mode requires n >= 1");
    network.validate();
    weights.validate();
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
    if (dataset_root.empty()) throw ConfigError("dataset_root is required");
}

void TrainConfig::apply_override(const std::string& key, const std::string& value) {
    try {
        if (key == "mode") {
            if (value == "prediction") mode = ModelMode::prediction;
            else if (value == "reconstruction") mode = ModelMode::reconstruction;
            else throw ConfigError("mode must be prediction or reconstruction");
        } else if (key == "use_codebook") use_codebook = parse_bool(value);
        else if (key == "learning_rate") learning_rate = std::stod(value);
        else if (key == "epochs") epochs = std::stoi(value);
        else if (key == "batch_size") batch_size = std::stoi(value);
        else if (key == "seed") seed = std::stoull(value);
        else if (key == "clip_norm") clip_norm = std::stod(value);
        else if (key == "codebook_init") {
            if (value == "uniform_small") codebook_scheme = CodebookInit::uniform_small;
            else if (value == "data_driven") codebook_scheme = CodebookInit::data_driven;
            else throw ConfigError("codebook_init must be uniform_small or data_driven");
        } else if (key == "dataset_root") dataset_root = value;
        else if (key == "layout") {
            if (value == "synthetic") layout = DatasetLayout::synthetic;
            else if (value == "ucsd_avenue") layout = DatasetLayout::ucsd_avenue;
            else throw ConfigError("layout must be synthetic or ucsd_avenue");
        } else if (key == "input_size") input_size = std::stoi(value);
        else if (key == "out_dir") out_dir = value;
        else if (key == "n") network.n = std::stoi(value);
        else if (key == "levels") network.levels = std::stoi(value);
        else if (key == "base_channels") network.base_channels = std::stoi(value);
        else if (key == "bottleneck_dim") network.bottleneck_dim = std::stoi(value);
        else if (key == "codebook_size") network.codebook_size = std::stoi(value);
        else if (key == "lambda_e") weights.lambda_e = std::stod(value);
        else if (key == "lambda_c") weights.lambda_c = std::stod(value);
        else if (key == "lambda_s") weights.lambda_s = std::stod(value);
        else if (key == "beta") weights.beta = std::stod(value);
        else if (key == "gamma") weights.gamma = std::stod(value);
        else if (key == "alpha") weights.alpha = std::stod(value);
        else throw ConfigError("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value '" + value + "' for key '" + key + "'");
    }
}

TrainConfig TrainConfig::parse_text(const std::string& text) {
    TrainConfig c;
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
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        c.apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

TrainConfig TrainConfig::parse_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

void TrainConfig::apply_env_overrides() {
    for (const char* key : kKnownKeys) {
        std::string env = "VQAD_";
        for (const char* p = key; *p; ++p) env += static_cast<char>(std::toupper(*p));
        if (const char* value = std::getenv(env.c_str())) apply_override(key, value);
    }
}

std::string TrainConfig::to_text() const {
    std::ostringstream out;
    out << "mode = " << to_string(mode) << "\n"
        << "use_codebook = " << (use_codebook ? "true" : "false") << "\n"
        << "learning_rate = " << format_value(learning_rate) << "\n"
        << "epochs = " << epochs << "\n"
        << "batch_size = " << batch_size << "\n"
        << "seed = " << seed << "\n"
        << "clip_norm = " << format_value(clip_norm) << "\n"
        << "codebook_init = "
        << (codebook_scheme == CodebookInit::uniform_small ? "uniform_small" : "data_driven") << "\n"
        << "dataset_root = " << dataset_root << "\n"
        << "layout = " << (layout == DatasetLayout::synthetic ? "synthetic" : "ucsd_avenue") << "\n"
        << "input_size = " << input_size << "\n"
        << "out_dir = " << out_dir << "\n"
        << "n = " << network.n << "\n"
        << "levels = " << network.levels << "\n"
        << "base_channels = " << network.base_channels << "\n"
        << "bottleneck_dim = " << network.bottleneck_dim << "\n"
        << "codebook_size = " << network.codebook_size << "\n"
        << "lambda_e = " << format_value(weights.lambda_e) << "\n"
        << "lambda_c = " << format_value(weights.lambda_c) << "\n"
        << "lambda_s = " << format_value(weights.lambda_s) << "\n"
        << "beta = " << format_value(weights.beta) << "\n"
        << "gamma = " << format_value(weights.gamma) << "\n"
        << "alpha = " << format_value(weights.alpha) << "\n";
    return out.str();
}

TrainResult train(const TrainConfig& config_in) {
    TrainConfig config = config_in;
    config.finalize();

    LoadedDataset dataset = load_dataset(config.dataset_root, config.layout, config.input_size);
    if (dataset.training.empty()) throw LoadError("training split is empty");

    // All training windows across clips, clip-major order.
    std::vector<FrameWindow> windows;
    for (const VideoClip& clip : dataset.training) {
        WindowSet ws = make_windows(clip, config.network.n);
        for (FrameWindow& w : ws.windows) windows.push_back(std::move(w));
    }
    if (windows.empty())
        throw LoadError("no training windows: clips shorter than n+1 = " +
                        std::to_string(config.network.n + 1));

    VqUnet<float> net(config.network, config.seed);
    Rng rng(config.seed);

    if (config.use_codebook && config.codebook_scheme == CodebookInit::data_driven) {
        const int probe = std::min<int>(config.batch_size, static_cast<int>(windows.size()));
        std::vector<const FrameWindow*> first;
        for (int i = 0; i < probe; ++i) first.push_back(&windows[static_cast<size_t>(i)]);
        Tensor<float> inputs, targets;
        windows_to_batch(first, inputs, targets);
        Tensor<float> z_e = net.encode(inputs, /*train=*/false);
        net.codebook() = codebook_init<float>(config.network.codebook_size, config.network.bottleneck_dim,
                                              rng.fork(0xdada).seed(), CodebookInit::data_driven, &z_e.data);
    }

    Adam<float> optimizer(net.parameters(), config.effective_lr(), config.clip_norm);

    fs::create_directories(config.out_dir);
    const fs::path out_dir = config.out_dir;
    const fs::path metrics_path = out_dir / "metrics.csv";
    std::ofstream metrics(metrics_path);
    if (!metrics) throw IoError("cannot write " + metrics_path.string());
    metrics << "step,pred,embed,commit,sep,total\n";

    auto epoch_ckpt_path = [&out_dir](int epoch) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
        return out_dir / name;
    };

    save_checkpoint(epoch_ckpt_path(0), net, &optimizer, 0, 0);
    fs::path last_good = epoch_ckpt_path(0);

    TrainResult result;
    result.metrics_csv = metrics_path;
    double best_total = std::numeric_limits<double>::infinity();
    long step = 0;

    std::vector<size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng = rng.fork(static_cast<std::uint64_t>(epoch));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

        double epoch_pred = 0.0, epoch_total = 0.0;
        long epoch_steps = 0;

        for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
            std::vector<const FrameWindow*> batch;
            for (size_t i = begin; i < end; ++i) batch.push_back(&windows[order[i]]);

            Tensor<float> inputs, targets;
            windows_to_batch(batch, inputs, targets);

            ForwardOutput<float> out = net.forward(inputs, /*train=*/true);
            net.zero_grad();
            LossComputation<float> lc =
                total_loss<float>(out, targets, config.weights,
                                  config.use_codebook ? &net.codebook() : nullptr,
                                  /*with_gradients=*/true);

            const struct { const char* name; float v; } terms[] = {{"prediction", lc.breakdown.pred},
                                                                   {"embedding", lc.breakdown.embed},
                                                                   {"commitment", lc.breakdown.commit},
                                                                   {"separatedness", lc.breakdown.sep},
                                                                   {"total", lc.breakdown.total}};
            for (const auto& term : terms) {
                if (!std::isfinite(term.v))
                    throw NumericError("non-finite " + std::string(term.name) + " loss at step " +
                                       std::to_string(step + 1) + "; last good checkpoint: " +
                                       last_good.string());
            }

            net.backward(lc.d_prediction, lc.has_ze_extra ? &lc.d_ze_extra : nullptr);
            optimizer.step();

            ++step;
            metrics << step << "," << format_value(lc.breakdown.pred) << ","
                    << format_value(lc.breakdown.embed) << "," << format_value(lc.breakdown.commit) << ","
                    << format_value(lc.breakdown.sep) << "," << format_value(lc.breakdown.total) << "\n";
            epoch_pred += lc.breakdown.pred;
            epoch_total += lc.breakdown.total;
            ++epoch_steps;
        }
        metrics.flush();

        const double mean_pred = epoch_pred / static_cast<double>(std::max<long>(epoch_steps, 1));
        const double mean_total = epoch_total / static_cast<double>(std::max<long>(epoch_steps, 1));
        result.epoch_mean_pred.push_back(mean_pred);
        result.epoch_mean_total.push_back(mean_total);

        const fs::path ckpt = epoch_ckpt_path(epoch);
        save_checkpoint(ckpt, net, &optimizer, epoch, step);
        last_good = ckpt;
        result.last_checkpoint = ckpt;
        if (mean_total < best_total) {
            best_total = mean_total;
            save_checkpoint(out_dir / "best.ckpt", net, &optimizer, epoch, step);
        }
        result.epochs_completed = epoch;
    }

    result.best_checkpoint = out_dir / "best.ckpt";
    result.steps_logged = step;
    return result;
}

void for_each_saliency(VqUnet<float>& net, const VideoClip& clip, int batch_size,
                       const std::function<void(const SaliencyMap&)>& fn) {
    const int n = net.config().n;
    WindowSet ws = make_windows(clip, n);
    if (ws.windows.empty()) return;
    const int h = clip.height(), w = clip.width();
    for (size_t begin = 0; begin < ws.windows.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(ws.windows.size(), begin + static_cast<size_t>(batch_size));
        std::vector<const FrameWindow*> batch;
        for (size_t i = begin; i < end; ++i) batch.push_back(&ws.windows[i]);
        Tensor<float> inputs, targets;
        windows_to_batch(batch, inputs, targets);
        ForwardOutput<float> out = net.forward(inputs, /*train=*/false);
        for (size_t i = begin; i < end; ++i) {
            const int b = static_cast<int>(i - begin);
            const Image predicted = image_from_column(out.prediction, b, h, w);
            const Image target = image_from_column(targets, b, h, w);
            SaliencyMap map = saliency(predicted, target);
            map.clip_id = clip.clip_id;
            map.frame_id = ws.windows[i].t0 + n;
            fn(map);
        }
    }
}

ScoreSeries score_clips(VqUnet<float>& net, const std::vector<VideoClip>& clips, int batch_size) {
    ScoreSeries series;
    for (const VideoClip& clip : clips) {
        ScoreSeries::ClipScores cs;
        cs.clip_id = clip.clip_id;
        cs.first_frame = net.config().n;
        for_each_saliency(net, clip, batch_size,
                          [&cs](const SaliencyMap& map) { cs.raw.push_back(frame_score(map)); });
        series.clips.push_back(std::move(cs));
    }
    apply_normalization(series, Normalization::none);
    return series;
}

AblationResult run_ablation(const TrainConfig& base, Normalization normalization) {
    AblationResult result;
    const fs::path out_root = base.out_dir;
    fs::create_directories(out_root);

    const struct { bool temporal, codebook; const char* name; } cells[] = {
        {false, false, "rec_plain"},
        {false, true, "rec_vq"},
        {true, false, "pred_plain"},
        {true, true, "pred_vq"},
    };

    for (const auto& cell : cells) {
        AblationCell record;
        record.temporal = cell.temporal;
        record.codebook = cell.codebook;
        try {
            TrainConfig config = base;
            config.mode = cell.temporal ? ModelMode::prediction : ModelMode::reconstruction;
            config.use_codebook = cell.codebook;
            config.out_dir = (out_root / cell.name).string();
            TrainResult tr = train(config);
            record.checkpoint = tr.best_checkpoint;

            VqUnet<float> net = load_checkpoint(tr.best_checkpoint);
            LoadedDataset dataset = load_dataset(config.dataset_root, config.layout, config.input_size);
            ScoreSeries scores = score_clips(net, dataset.testing, config.batch_size);
            apply_normalization(scores, normalization);
            record.auc = evaluate_auc(scores, dataset.labels);
        } catch (const std::exception& e) {
            record.failed = true;
            record.error = e.what();
        }
        result.cells.push_back(std::move(record));
    }

    result.summary_csv = out_root / "ablation.csv";
    std::ofstream out(result.summary_csv);
    out << "temporal,codebook,auc,error\n";
    for (const AblationCell& c : result.cells) {
        out << (c.temporal ? "yes" : "no") << "," << (c.codebook ? "yes" : "no") << ",";
        if (c.failed)
            out << "," << c.error << "\n";
        else
            out << format_value(c.auc) << ",\n";
    }
    return result;
}

}  // namespace vqad
