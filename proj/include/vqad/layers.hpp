#pragma once

#include <string>
#include <vector>

#include "vqad/params.hpp"
#include "vqad/rng.hpp"
#include "vqad/tensor.hpp"

namespace vqad {

namespace conv_detail {

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

/// Unfold 3x3 (or kxk) receptive fields into a (in_ch*k*k, batch*ho*wo)
/// matrix. Row block o*in_ch..(o+1)*in_ch holds the input channels at kernel
/// offset o = ky*k + kx; out-of-bounds taps stay zero (zero padding).
template <typename S>
void im2col(const Tensor<S>& x, int k, int stride, int pad, Mat<S>& cols) {
    const int c = x.channels();
    const int ho = conv_out_extent(x.h, k, stride, pad);
    const int wo = conv_out_extent(x.w, k, stride, pad);
    cols.setZero(static_cast<Eigen::Index>(c) * k * k, static_cast<Eigen::Index>(x.batch) * ho * wo);
    for (int b = 0; b < x.batch; ++b) {
        const Eigen::Index src_base = static_cast<Eigen::Index>(b) * x.h * x.w;
        const Eigen::Index dst_base = static_cast<Eigen::Index>(b) * ho * wo;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int o = ky * k + kx;
                // valid output x range for this tap
                int xo_lo = (pad - kx + stride - 1) / stride;
                if (xo_lo < 0) xo_lo = 0;
                int xo_hi = (x.w - 1 + pad - kx) / stride;
                if (xo_hi > wo - 1) xo_hi = wo - 1;
                if (xo_lo > xo_hi) continue;
                const int len = xo_hi - xo_lo + 1;
                for (int yo = 0; yo < ho; ++yo) {
                    const int yi = yo * stride - pad + ky;
                    if (yi < 0 || yi >= x.h) continue;
                    const int xi0 = xo_lo * stride - pad + kx;
                    cols.block(static_cast<Eigen::Index>(o) * c, dst_base + static_cast<Eigen::Index>(yo) * wo + xo_lo, c, len) =
                        x.data(Eigen::all, Eigen::seqN(src_base + static_cast<Eigen::Index>(yi) * x.w + xi0, len, stride));
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-add column gradients back onto the input grid.
template <typename S>
void col2im(const Mat<S>& cols, int k, int stride, int pad, Tensor<S>& dx) {
    const int c = dx.channels();
    const int ho = conv_out_extent(dx.h, k, stride, pad);
    const int wo = conv_out_extent(dx.w, k, stride, pad);
    dx.data.setZero();
    for (int b = 0; b < dx.batch; ++b) {
        const Eigen::Index dst_base = static_cast<Eigen::Index>(b) * dx.h * dx.w;
        const Eigen::Index src_base = static_cast<Eigen::Index>(b) * ho * wo;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int o = ky * k + kx;
                int xo_lo = (pad - kx + stride - 1) / stride;
                if (xo_lo < 0) xo_lo = 0;
                int xo_hi = (dx.w - 1 + pad - kx) / stride;
                if (xo_hi > wo - 1) xo_hi = wo - 1;
                if (xo_lo > xo_hi) continue;
                const int len = xo_hi - xo_lo + 1;
                for (int yo = 0; yo < ho; ++yo) {
                    const int yi = yo * stride - pad + ky;
                    if (yi < 0 || yi >= dx.h) continue;
                    const int xi0 = xo_lo * stride - pad + kx;
                    dx.data(Eigen::all, Eigen::seqN(dst_base + static_cast<Eigen::Index>(yi) * dx.w + xi0, len, stride)) +=
                        cols.block(static_cast<Eigen::Index>(o) * c, src_base + static_cast<Eigen::Index>(yo) * wo + xo_lo, c, len);
                }
            }
        }
    }
}

}  // namespace conv_detail

/// Zero-padded kxk convolution (stride 1 preserves the spatial size, stride
/// 2 halves it). Weight layout: element (c_out, c_in, ky, kx) sits at
/// weight.value(c_out, (ky*k + kx)*in_ch + c_in).
template <typename S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride)
        : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(k / 2) {
        weight.init(name + ".w", out_ch, in_ch * k * k);
        bias.init(name + ".b", out_ch, 1);
    }

    void init_kaiming(Rng& rng) {
        const double fan_in = static_cast<double>(in_ch_) * k_ * k_;
        const double stddev = std::sqrt(2.0 / fan_in);
        for (Eigen::Index j = 0; j < weight.value.cols(); ++j)
            for (Eigen::Index i = 0; i < weight.value.rows(); ++i)
                weight.value(i, j) = static_cast<S>(rng.normal(0.0, stddev));
        bias.value.setZero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        input_ = x;
        conv_detail::im2col(x, k_, stride_, pad_, cols_);
        Tensor<S> out;
        out.batch = x.batch;
        out.h = conv_detail::conv_out_extent(x.h, k_, stride_, pad_);
        out.w = conv_detail::conv_out_extent(x.w, k_, stride_, pad_);
        out.data.noalias() = weight.value * cols_;
        out.data.colwise() += bias.value.col(0);
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        conv_detail::im2col(input_, k_, stride_, pad_, cols_);
        weight.grad.noalias() += dy.data * cols_.transpose();
        bias.grad.col(0) += dy.data.rowwise().sum();
        Mat<S> dcols;
        dcols.noalias() = weight.value.transpose() * dy.data;
        Tensor<S> dx(in_ch_, input_.batch, input_.h, input_.w);
        conv_detail::col2im(dcols, k_, stride_, pad_, dx);
        return dx;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    int out_channels() const { return out_ch_; }

    Param<S> weight, bias;

private:
    int in_ch_ = 0, out_ch_ = 0, k_ = 3, stride_ = 1, pad_ = 1;
    Tensor<S> input_;
    Mat<S> cols_;
};

/// 2x2 stride-2 transposed convolution: exact 2x upsampling with
/// non-overlapping output blocks. Weight row block o*out_ch..(o+1)*out_ch
/// maps the input to output offset (dy, dx) = (o/2, o%2).
template <typename S>
class ConvTranspose2x2 {
public:
    ConvTranspose2x2() = default;
    ConvTranspose2x2(const std::string& name, int in_ch, int out_ch)
        : in_ch_(in_ch), out_ch_(out_ch) {
        weight.init(name + ".w", out_ch * 4, in_ch);
        bias.init(name + ".b", out_ch, 1);
    }

    void init_kaiming(Rng& rng) {
        const double stddev = std::sqrt(2.0 / in_ch_);
        for (Eigen::Index j = 0; j < weight.value.cols(); ++j)
            for (Eigen::Index i = 0; i < weight.value.rows(); ++i)
                weight.value(i, j) = static_cast<S>(rng.normal(0.0, stddev));
        bias.value.setZero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        input_ = x;
        Tensor<S> out(out_ch_, x.batch, x.h * 2, x.w * 2);
        Mat<S> block;
        for (int o = 0; o < 4; ++o) {
            const int dy = o / 2, dx = o % 2;
            block.noalias() = weight.value.middleRows(static_cast<Eigen::Index>(o) * out_ch_, out_ch_) * x.data;
            for (int b = 0; b < x.batch; ++b) {
                const Eigen::Index src_base = static_cast<Eigen::Index>(b) * x.h * x.w;
                const Eigen::Index dst_base = static_cast<Eigen::Index>(b) * out.h * out.w;
                for (int y = 0; y < x.h; ++y) {
                    out.data(Eigen::all, Eigen::seqN(dst_base + static_cast<Eigen::Index>(2 * y + dy) * out.w + dx, x.w, 2)) =
                        block.middleCols(src_base + static_cast<Eigen::Index>(y) * x.w, x.w);
                }
            }
        }
        out.data.colwise() += bias.value.col(0);
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx(in_ch_, input_.batch, input_.h, input_.w);
        Mat<S> dy_o(out_ch_, input_.data.cols());
        for (int o = 0; o < 4; ++o) {
            const int ddy = o / 2, ddx = o % 2;
            for (int b = 0; b < input_.batch; ++b) {
                const Eigen::Index src_base = static_cast<Eigen::Index>(b) * dy.h * dy.w;
                const Eigen::Index dst_base = static_cast<Eigen::Index>(b) * input_.h * input_.w;
                for (int y = 0; y < input_.h; ++y) {
                    dy_o.middleCols(dst_base + static_cast<Eigen::Index>(y) * input_.w, input_.w) =
                        dy.data(Eigen::all, Eigen::seqN(src_base + static_cast<Eigen::Index>(2 * y + ddy) * dy.w + ddx, input_.w, 2));
                }
            }
            weight.grad.middleRows(static_cast<Eigen::Index>(o) * out_ch_, out_ch_).noalias() +=
                dy_o * input_.data.transpose();
            dx.data.noalias() += weight.value.middleRows(static_cast<Eigen::Index>(o) * out_ch_, out_ch_).transpose() * dy_o;
        }
        bias.grad.col(0) += dy.data.rowwise().sum();
        return dx;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    Param<S> weight, bias;

private:
    int in_ch_ = 0, out_ch_ = 0;
    Tensor<S> input_;
};

/// Per-channel batch normalization over (batch, y, x). Batch statistics in
/// training, running averages at inference.
template <typename S>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    BatchNorm2d(const std::string& name, int channels) : channels_(channels) {
        gamma.init(name + ".gamma", channels, 1);
        beta.init(name + ".beta", channels, 1);
        gamma.value.setOnes();
        running_mean = Vec<S>::Zero(channels);
        running_var = Vec<S>::Ones(channels);
    }

    Tensor<S> forward(const Tensor<S>& x, bool train) {
        Tensor<S> out;
        out.batch = x.batch;
        out.h = x.h;
        out.w = x.w;
        const Eigen::Index n = x.data.cols();
        if (train) {
            const Vec<S> mu = x.data.rowwise().mean();
            Mat<S> centered = x.data.colwise() - mu;
            const Vec<S> var = centered.array().square().rowwise().mean();
            inv_std_ = (var.array() + static_cast<S>(kEps)).sqrt().inverse().matrix();
            xhat_ = (centered.array().colwise() * inv_std_.array()).matrix();
            if (n > 1) {
                const S unbias = static_cast<S>(n) / static_cast<S>(n - 1);
                running_mean = (1 - static_cast<S>(kMomentum)) * running_mean + static_cast<S>(kMomentum) * mu;
                running_var = (1 - static_cast<S>(kMomentum)) * running_var + static_cast<S>(kMomentum) * (var * unbias);
            }
            out.data = ((xhat_.array().colwise() * gamma.value.col(0).array()).colwise() + beta.value.col(0).array()).matrix();
        } else {
            const Vec<S> inv = (running_var.array() + static_cast<S>(kEps)).sqrt().inverse().matrix();
            Mat<S> xhat = ((x.data.colwise() - running_mean).array().colwise() * inv.array()).matrix();
            out.data = ((xhat.array().colwise() * gamma.value.col(0).array()).colwise() + beta.value.col(0).array()).matrix();
        }
        return out;
    }

    /// Backward through the batch-statistics path.
    Tensor<S> backward(const Tensor<S>& dy) {
        const Eigen::Index n = dy.data.cols();
        gamma.grad.col(0) += (dy.data.array() * xhat_.array()).rowwise().sum().matrix();
        beta.grad.col(0) += dy.data.rowwise().sum();
        Mat<S> dxhat = (dy.data.array().colwise() * gamma.value.col(0).array()).matrix();
        const Vec<S> sum_dxhat = dxhat.rowwise().sum();
        const Vec<S> sum_dxhat_xhat = (dxhat.array() * xhat_.array()).rowwise().sum().matrix();
        Tensor<S> dx;
        dx.batch = dy.batch;
        dx.h = dy.h;
        dx.w = dy.w;
        dx.data = (((dxhat * static_cast<S>(n)).colwise() - sum_dxhat).array().colwise() *
                       (inv_std_.array() / static_cast<S>(n)) -
                   xhat_.array().colwise() *
                       (sum_dxhat_xhat.array() * inv_std_.array() / static_cast<S>(n)))
                      .matrix();
        return dx;
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

    Param<S> gamma, beta;
    Vec<S> running_mean, running_var;

    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;

private:
    int channels_ = 0;
    Mat<S> xhat_;
    Vec<S> inv_std_;
};

template <typename S>
class ReLU {
public:
    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> out;
        out.batch = x.batch;
        out.h = x.h;
        out.w = x.w;
        out.data = x.data.cwiseMax(static_cast<S>(0));
        mask_ = out.data;
        return out;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> dx;
        dx.batch = dy.batch;
        dx.h = dy.h;
        dx.w = dy.w;
        dx.data = ((mask_.array() > static_cast<S>(0)).template cast<S>() * dy.data.array()).matrix();
        return dx;
    }

private:
    Mat<S> mask_;
};

/// conv -> batch norm -> rectifier, with both post-ops optional (the output
/// layer drops them).
template <typename S>
class ConvBlock {
public:
    ConvBlock() = default;
    ConvBlock(const std::string& name, int in_ch, int out_ch, int k, int stride, bool bn, bool relu)
        : conv(name + ".conv", in_ch, out_ch, k, stride), use_bn_(bn), use_relu_(relu) {
        if (bn) this->bn = BatchNorm2d<S>(name + ".bn", out_ch);
    }

    void init(Rng& rng) { conv.init_kaiming(rng); }

    Tensor<S> forward(const Tensor<S>& x, bool train) {
        Tensor<S> y = conv.forward(x);
        if (use_bn_) y = bn.forward(y, train);
        if (use_relu_) y = relu.forward(y);
        return y;
    }

    Tensor<S> backward(const Tensor<S>& dy) {
        Tensor<S> d = dy;
        if (use_relu_) d = relu.backward(d);
        if (use_bn_) d = bn.backward(d);
        return conv.backward(d);
    }

    void collect(std::vector<Param<S>*>& out) {
        conv.collect(out);
        if (use_bn_) bn.collect(out);
    }

    bool has_bn() const { return use_bn_; }

    Conv2d<S> conv;
    BatchNorm2d<S> bn;
    ReLU<S> relu;

private:
    bool use_bn_ = false, use_relu_ = false;
};

}  // namespace vqad
