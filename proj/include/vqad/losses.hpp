#pragma once

#include <cmath>

#include "vqad/codebook.hpp"
#include "vqad/model.hpp"
#include "vqad/tensor.hpp"

namespace vqad {

/// Weights of the composite objective. The embedding, commitment and
/// separatedness terms are scaled by lambda_e/c/s on top of their intrinsic
/// beta and gamma factors.
struct LossWeights {
    double lambda_e = 1.0;
    double lambda_c = 1.0;
    double lambda_s = 1.0;
    double beta = 0.25;
    double gamma = 0.01;
    double alpha = 1.0;

    void validate() const {
        const double vals[] = {lambda_e, lambda_c, lambda_s, beta, gamma, alpha};
        for (double v : vals)
            if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and >= 0");
    }
};

template <typename S>
struct LossBreakdown {
    S pred = 0, embed = 0, commit = 0, sep = 0, total = 0;
};

/// Squared L2 error summed over pixels and channels, averaged over batch
/// elements.
template <typename S>
S prediction_loss(const Tensor<S>& predicted, const Tensor<S>& target) {
    if (predicted.data.rows() != target.data.rows() || predicted.data.cols() != target.data.cols())
        throw NumericError("prediction_loss: shape mismatch");
    const S sum = (predicted.data - target.data).squaredNorm();
    return sum / static_cast<S>(std::max(predicted.batch, 1));
}

/// Single-image convenience overload (batch of one).
template <typename S>
S prediction_loss(const Mat<S>& predicted, const Mat<S>& target) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
        throw NumericError("prediction_loss: shape mismatch");
    return (predicted - target).squaredNorm();
}

/// d(prediction_loss)/d(predicted) = 2 (predicted - target) / batch.
template <typename S>
Tensor<S> prediction_loss_grad(const Tensor<S>& predicted, const Tensor<S>& target) {
    Tensor<S> g;
    g.batch = predicted.batch;
    g.h = predicted.h;
    g.w = predicted.w;
    g.data = (predicted.data - target.data) * (static_cast<S>(2) / static_cast<S>(std::max(predicted.batch, 1)));
    return g;
}

/// || sg[z_e] - z_q ||^2 summed over sites, averaged over batch. Only the
/// codebook is trained by this term; the encoder-side gradient is zero by
/// construction (see embedding_loss_grad_codebook).
template <typename S>
S embedding_loss(const Mat<S>& z_e, const Mat<S>& z_q, int batch = 1) {
    return (z_e - z_q).squaredNorm() / static_cast<S>(std::max(batch, 1));
}

/// Accumulate scale * d(embed)/d(codebook): 2 (e_k - z_e) per assigned site.
template <typename S>
void embedding_loss_grad_codebook(const QuantizationResult<S>& qr, int batch, S scale, Mat<S>& cb_grad) {
    const S f = scale * static_cast<S>(2) / static_cast<S>(std::max(batch, 1));
    for (Eigen::Index p = 0; p < qr.sites(); ++p)
        cb_grad.col(qr.nearest(p)) += f * (qr.z_q.col(p) - qr.z_e.col(p));
}

/// beta * || z_e - sg[z_q] ||^2; trains the encoder only.
template <typename S>
S commitment_loss(const Mat<S>& z_e, const Mat<S>& z_q, S beta, int batch = 1) {
    return beta * (z_e - z_q).squaredNorm() / static_cast<S>(std::max(batch, 1));
}

/// d(commit)/d(z_e) = 2 beta (z_e - z_q) / batch, scaled by `scale`.
template <typename S>
Mat<S> commitment_loss_grad_ze(const QuantizationResult<S>& qr, S beta, int batch, S scale) {
    const S f = scale * static_cast<S>(2) * beta / static_cast<S>(std::max(batch, 1));
    return f * (qr.z_e - qr.z_q);
}

/// gamma * [ ||sg[z_e] - z_q||^2 - ||sg[z_e] - z_n||^2 + alpha ]_+ summed
/// over sites, averaged over batch. The anchor is stop-gradded, so the
/// encoder receives nothing; the nearest entry is pulled toward z_e and the
/// second-nearest pushed away wherever the hinge is active.
template <typename S>
S separatedness_loss(const QuantizationResult<S>& qr, S gamma, S alpha, int batch = 1) {
    S acc = 0;
    for (Eigen::Index p = 0; p < qr.sites(); ++p) {
        const S dq = (qr.z_e.col(p) - qr.z_q.col(p)).squaredNorm();
        const S dn = (qr.z_e.col(p) - qr.z_n.col(p)).squaredNorm();
        const S inner = dq - dn + alpha;
        if (inner > 0) acc += inner;
    }
    return gamma * acc / static_cast<S>(std::max(batch, 1));
}

template <typename S>
void separatedness_loss_grad_codebook(const QuantizationResult<S>& qr, S gamma, S alpha, int batch,
                                      S scale, Mat<S>& cb_grad) {
    const S f = scale * static_cast<S>(2) * gamma / static_cast<S>(std::max(batch, 1));
    for (Eigen::Index p = 0; p < qr.sites(); ++p) {
        const S dq = (qr.z_e.col(p) - qr.z_q.col(p)).squaredNorm();
        const S dn = (qr.z_e.col(p) - qr.z_n.col(p)).squaredNorm();
        if (dq - dn + alpha > 0) {
            cb_grad.col(qr.nearest(p)) += f * (qr.z_q.col(p) - qr.z_e.col(p));
            cb_grad.col(qr.second(p)) += f * (qr.z_e.col(p) - qr.z_n.col(p));
        }
    }
}

/// Values plus the gradients the training step feeds back into the network:
/// d_prediction enters the decoder-side backward pass, d_ze_extra is the
/// commitment contribution added at the encoder output, and the
/// embedding/separatedness gradients are accumulated straight into the
/// codebook.
template <typename S>
struct LossComputation {
    LossBreakdown<S> breakdown;
    Tensor<S> d_prediction;
    Mat<S> d_ze_extra;
    bool has_ze_extra = false;
};

template <typename S>
LossComputation<S> total_loss(const ForwardOutput<S>& out, const Tensor<S>& target,
                              const LossWeights& w, Codebook<S>* codebook,
                              bool with_gradients) {
    w.validate();
    LossComputation<S> lc;
    const int batch = std::max(out.prediction.batch, 1);
    lc.breakdown.pred = prediction_loss(out.prediction, target);
    if (out.has_quantization) {
        const auto& qr = out.quantization;
        lc.breakdown.embed = embedding_loss(qr.z_e, qr.z_q, batch);
        lc.breakdown.commit = commitment_loss(qr.z_e, qr.z_q, static_cast<S>(w.beta), batch);
        lc.breakdown.sep = separatedness_loss(qr, static_cast<S>(w.gamma), static_cast<S>(w.alpha), batch);
    }
    lc.breakdown.total = lc.breakdown.pred + static_cast<S>(w.lambda_e) * lc.breakdown.embed +
                         static_cast<S>(w.lambda_c) * lc.breakdown.commit +
                         static_cast<S>(w.lambda_s) * lc.breakdown.sep;
    if (with_gradients) {
        lc.d_prediction = prediction_loss_grad(out.prediction, target);
        if (out.has_quantization) {
            const auto& qr = out.quantization;
            lc.d_ze_extra = commitment_loss_grad_ze(qr, static_cast<S>(w.beta), batch,
                                                    static_cast<S>(w.lambda_c));
            lc.has_ze_extra = true;
            if (codebook != nullptr) {
                embedding_loss_grad_codebook(qr, batch, static_cast<S>(w.lambda_e), codebook->grad());
                separatedness_loss_grad_codebook(qr, static_cast<S>(w.gamma), static_cast<S>(w.alpha),
                                                 batch, static_cast<S>(w.lambda_s), codebook->grad());
            }
        }
    }
    return lc;
}

}  // namespace vqad
