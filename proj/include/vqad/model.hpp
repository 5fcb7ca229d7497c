#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "vqad/codebook.hpp"
#include "vqad/layers.hpp"

namespace vqad {

enum class ModelMode { prediction, reconstruction };

inline const char* to_string(ModelMode m) {
    return m == ModelMode::prediction ? "prediction" : "reconstruction";
}

/// Architecture switches. Level i runs at resolution (H/2^i, W/2^i) with
/// base_channels*2^i channels; after `levels` stride-2 stages the bottleneck
/// map has `bottleneck_dim` channels at (H/2^levels, W/2^levels).
struct NetworkConfig {
    int n = 5;                 // input frames; 0 in reconstruction mode
    int frame_channels = 3;    // C per frame
    int levels = 4;
    int base_channels = 64;
    int bottleneck_dim = 512;  // D
    int codebook_size = 256;   // K
    ModelMode mode = ModelMode::prediction;
    bool use_codebook = true;

    int input_channels() const { return std::max(n, 1) * frame_channels; }
    int output_channels() const { return frame_channels; }
    bool skips_enabled() const { return mode == ModelMode::prediction; }
    int level_channels(int i) const { return base_channels << i; }
    int downsample_factor() const { return 1 << levels; }

    void validate() const {
        if (mode == ModelMode::prediction && n < 1)
            throw ConfigError("prediction mode requires n >= 1");
        if (mode == ModelMode::reconstruction && n != 0)
            throw ConfigError("reconstruction mode requires n = 0");
        if (levels < 1 || levels > 8) throw ConfigError("levels must be in [1, 8]");
        if (base_channels < 1) throw ConfigError("base_channels must be positive");
        if (bottleneck_dim < 1) throw ConfigError("bottleneck_dim must be positive");
        if (frame_channels < 1) throw ConfigError("frame_channels must be positive");
        if (use_codebook && codebook_size < 2)
            throw ConfigError("codebook_size must be >= 2 when the codebook is enabled");
    }
};

/// One forward pass: the predicted frame plus, when the codebook is active,
/// the bottleneck quantization details the losses consume.
template <typename S>
struct ForwardOutput {
    Tensor<S> prediction;
    Tensor<S> z_e;  // encoder output at the bottleneck
    bool has_quantization = false;
    QuantizationResult<S> quantization;
};

/// Encoder/decoder with a vector-quantized bottleneck. Prediction mode keeps
/// skip connections from each encoder level into the decoder; reconstruction
/// mode removes them so the network cannot copy its input. The final
/// convolution has no batch normalization and no rectifier, and all
/// convolutions pad so spatial size is preserved between resampling stages.
template <typename S>
class VqUnet {
public:
    VqUnet() = default;

    VqUnet(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
        config.validate();
        Rng rng(seed);
        const int L = config.levels;
        enc_a_.resize(L);
        enc_b_.resize(L);
        enc_down_.resize(L);
        dec_up_.resize(L);
        dec_bn_.resize(L);
        dec_relu_.resize(L);
        dec_c1_.resize(L);
        dec_c2_.resize(L);
        int prev = config.input_channels();
        for (int i = 0; i < L; ++i) {
            const int ch = config.level_channels(i);
            const int next = (i + 1 < L) ? config.level_channels(i + 1) : config.bottleneck_dim;
            enc_a_[i] = ConvBlock<S>("enc" + std::to_string(i) + ".a", prev, ch, 3, 1, true, true);
            enc_b_[i] = ConvBlock<S>("enc" + std::to_string(i) + ".b", ch, ch, 3, 1, true, true);
            enc_down_[i] = ConvBlock<S>("enc" + std::to_string(i) + ".down", ch, next, 3, 2, true, true);
            prev = next;
        }
        for (int i = L - 1; i >= 0; --i) {
            const int ch = config.level_channels(i);
            const int from = (i + 1 < L) ? config.level_channels(i + 1) : config.bottleneck_dim;
            const std::string name = "dec" + std::to_string(i);
            dec_up_[i] = ConvTranspose2x2<S>(name + ".up", from, ch);
            dec_bn_[i] = BatchNorm2d<S>(name + ".up.bn", ch);
            const int cat = config.skips_enabled() ? 2 * ch : ch;
            dec_c1_[i] = ConvBlock<S>(name + ".c1", cat, ch, 3, 1, true, true);
            dec_c2_[i] = ConvBlock<S>(name + ".c2", ch, ch, 3, 1, true, true);
        }
        out_conv_ = ConvBlock<S>("out", config.base_channels, config.output_channels(), 3, 1,
                                 /*bn=*/false, /*relu=*/false);

        std::uint64_t salt = 1;
        for (int i = 0; i < L; ++i) {
            Rng r1 = rng.fork(salt++), r2 = rng.fork(salt++), r3 = rng.fork(salt++);
            enc_a_[i].init(r1);
            enc_b_[i].init(r2);
            enc_down_[i].init(r3);
        }
        for (int i = 0; i < L; ++i) {
            Rng r1 = rng.fork(salt++), r2 = rng.fork(salt++), r3 = rng.fork(salt++);
            dec_up_[i].init_kaiming(r1);
            dec_c1_[i].init(r2);
            dec_c2_[i].init(r3);
        }
        Rng ro = rng.fork(salt++);
        out_conv_.init(ro);

        if (config.use_codebook)
            codebook_ = codebook_init<S>(config.codebook_size, config.bottleneck_dim,
                                         rng.fork(salt++).seed(), CodebookInit::uniform_small);
    }

    const NetworkConfig& config() const { return config_; }
    Codebook<S>& codebook() { return codebook_; }
    const Codebook<S>& codebook() const { return codebook_; }

    /// Number of skip tensors captured by the last encode (structural:
    /// zero in reconstruction mode).
    int skip_count() const { return static_cast<int>(skips_.size()); }

    void validate_input(const Tensor<S>& x) const {
        if (x.channels() != config_.input_channels())
            throw ConfigError("encoder input has " + std::to_string(x.channels()) +
                              " channels, expected " + std::to_string(config_.input_channels()));
        const int f = config_.downsample_factor();
        if (x.h % f != 0 || x.w % f != 0)
            throw ConfigError("input spatial size " + std::to_string(x.h) + "x" + std::to_string(x.w) +
                              " not divisible by 2^levels = " + std::to_string(f));
    }

    /// Encoder pass; captures skip features (prediction mode only).
    Tensor<S> encode(const Tensor<S>& x, bool train) {
        validate_input(x);
        skips_.clear();
        Tensor<S> t = x;
        for (int i = 0; i < config_.levels; ++i) {
            t = enc_a_[i].forward(t, train);
            t = enc_b_[i].forward(t, train);
            if (config_.skips_enabled()) skips_.push_back(t);
            t = enc_down_[i].forward(t, train);
        }
        return t;
    }

    ForwardOutput<S> forward(const Tensor<S>& x, bool train) {
        ForwardOutput<S> out;
        out.z_e = encode(x, train);
        Tensor<S> t;
        if (config_.use_codebook) {
            out.quantization = quantize(out.z_e.data, codebook_);
            out.has_quantization = true;
            t.data = straight_through_forward(out.quantization);
            t.batch = out.z_e.batch;
            t.h = out.z_e.h;
            t.w = out.z_e.w;
        } else {
            t = out.z_e;
        }
        for (int i = config_.levels - 1; i >= 0; --i) {
            Tensor<S> u = dec_up_[i].forward(t);
            u = dec_bn_[i].forward(u, train);
            u = dec_relu_[i].forward(u);
            if (config_.skips_enabled()) u = concat_channels(u, skips_[static_cast<size_t>(i)]);
            u = dec_c1_[i].forward(u, train);
            t = dec_c2_[i].forward(u, train);
        }
        out.prediction = out_conv_.forward(t, train);
        return out;
    }

    /// Backward pass. `d_prediction` is the loss gradient at the predicted
    /// frame; `d_ze_extra`, when given, is added at the encoder output (the
    /// commitment-loss contribution). Valid after forward(train=true).
    void backward(const Tensor<S>& d_prediction, const Mat<S>* d_ze_extra = nullptr) {
        Tensor<S> d = out_conv_.backward(d_prediction);
        std::vector<Mat<S>> skip_grads(static_cast<size_t>(config_.levels));
        for (int i = 0; i < config_.levels; ++i) {
            d = dec_c2_[i].backward(d);
            d = dec_c1_[i].backward(d);
            if (config_.skips_enabled()) {
                const int ch = config_.level_channels(i);
                skip_grads[static_cast<size_t>(i)] = d.data.bottomRows(ch);
                Tensor<S> du;
                du.batch = d.batch;
                du.h = d.h;
                du.w = d.w;
                du.data = d.data.topRows(ch);
                d = du;
            }
            d = dec_relu_[i].backward(d);
            d = dec_bn_[i].backward(d);
            d = dec_up_[i].backward(d);
        }
        // d now sits at the decoder input (bottleneck).
        Mat<S> d_ze;
        if (config_.use_codebook) {
            grad_at_zq_ = d.data;
            d_ze = straight_through_backward(d.data);
            grad_at_ze_st_ = d_ze;
        } else {
            d_ze = d.data;
        }
        if (d_ze_extra != nullptr) d_ze += *d_ze_extra;
        d.data = d_ze;
        for (int i = config_.levels - 1; i >= 0; --i) {
            d = enc_down_[i].backward(d);
            if (config_.skips_enabled()) d.data += skip_grads[static_cast<size_t>(i)];
            d = enc_b_[i].backward(d);
            d = enc_a_[i].backward(d);
        }
    }

    /// Gradient probes for the straight-through contract: what the decoder
    /// handed back at z_q and what the encoder received at z_e through the
    /// quantizer (before any commitment contribution).
    const Mat<S>& last_grad_at_zq() const { return grad_at_zq_; }
    const Mat<S>& last_grad_at_ze_st() const { return grad_at_ze_st_; }

    std::vector<Param<S>*> parameters() {
        std::vector<Param<S>*> out;
        for (int i = 0; i < config_.levels; ++i) {
            enc_a_[i].collect(out);
            enc_b_[i].collect(out);
            enc_down_[i].collect(out);
        }
        for (int i = config_.levels - 1; i >= 0; --i) {
            dec_up_[i].collect(out);
            dec_bn_[i].collect(out);
            dec_c1_[i].collect(out);
            dec_c2_[i].collect(out);
        }
        out_conv_.collect(out);
        if (config_.use_codebook) out.push_back(&codebook_.param);
        return out;
    }

    /// Encoder-side parameters only (used by gradient-routing tests).
    std::vector<Param<S>*> encoder_parameters() {
        std::vector<Param<S>*> out;
        for (int i = 0; i < config_.levels; ++i) {
            enc_a_[i].collect(out);
            enc_b_[i].collect(out);
            enc_down_[i].collect(out);
        }
        return out;
    }

    /// Batch-norm running statistics, named for checkpointing.
    std::vector<std::pair<std::string, Vec<S>*>> named_buffers() {
        std::vector<std::pair<std::string, Vec<S>*>> out;
        auto add = [&out](BatchNorm2d<S>& bn, const std::string& name) {
            out.emplace_back(name + ".running_mean", &bn.running_mean);
            out.emplace_back(name + ".running_var", &bn.running_var);
        };
        for (int i = 0; i < config_.levels; ++i) {
            const std::string p = "enc" + std::to_string(i);
            add(enc_a_[i].bn, p + ".a.bn");
            add(enc_b_[i].bn, p + ".b.bn");
            add(enc_down_[i].bn, p + ".down.bn");
        }
        for (int i = 0; i < config_.levels; ++i) {
            const std::string p = "dec" + std::to_string(i);
            add(dec_bn_[i], p + ".up.bn");
            add(dec_c1_[i].bn, p + ".c1.bn");
            add(dec_c2_[i].bn, p + ".c2.bn");
        }
        return out;
    }

    void zero_grad() {
        for (Param<S>* p : parameters()) p->zero_grad();
    }

private:
    NetworkConfig config_;
    std::vector<ConvBlock<S>> enc_a_, enc_b_, enc_down_;
    std::vector<ConvTranspose2x2<S>> dec_up_;
    std::vector<BatchNorm2d<S>> dec_bn_;
    std::vector<ReLU<S>> dec_relu_;
    std::vector<ConvBlock<S>> dec_c1_, dec_c2_;
    ConvBlock<S> out_conv_;
    Codebook<S> codebook_;
    std::vector<Tensor<S>> skips_;
    Mat<S> grad_at_zq_, grad_at_ze_st_;
};

}  // namespace vqad
