#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "vqad/errors.hpp"

namespace vqad {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
using MatXf = Mat<float>;
using MatXd = Mat<double>;
using VecXi = Eigen::VectorXi;

/// A batch of feature maps stored channels-first: `data` has one row per
/// channel and one column per pixel, columns ordered (batch, y, x) with x
/// fastest. Each column is the channel vector of one spatial site, which is
/// the layout the vector quantizer consumes directly.
template <typename S>
struct Tensor {
    Mat<S> data;
    int batch = 0;
    int h = 0;
    int w = 0;

    Tensor() = default;
    Tensor(int channels, int batch_, int h_, int w_)
        : data(Mat<S>::Zero(channels, static_cast<Eigen::Index>(batch_) * h_ * w_)),
          batch(batch_), h(h_), w(w_) {}

    int channels() const { return static_cast<int>(data.rows()); }
    Eigen::Index pixels_per_sample() const { return static_cast<Eigen::Index>(h) * w; }
    Eigen::Index cols() const { return data.cols(); }

    auto sample(int b) { return data.middleCols(static_cast<Eigen::Index>(b) * h * w, pixels_per_sample()); }
    auto sample(int b) const { return data.middleCols(static_cast<Eigen::Index>(b) * h * w, pixels_per_sample()); }

    bool finite() const { return data.allFinite(); }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.data = data.template cast<T>();
        out.batch = batch;
        out.h = h;
        out.w = w;
        return out;
    }
};

/// Stack `b` on top of `a` along the channel dimension.
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.batch != b.batch || a.h != b.h || a.w != b.w)
        throw NumericError("concat_channels: shape mismatch");
    Tensor<S> out(a.channels() + b.channels(), a.batch, a.h, a.w);
    out.data.topRows(a.channels()) = a.data;
    out.data.bottomRows(b.channels()) = b.data;
    return out;
}

}  // namespace vqad
