#pragma once

#include <cmath>
#include <vector>

#include "vqad/params.hpp"

namespace vqad {

/// Adam with bias correction and optional global-norm gradient clipping
/// (clip_norm <= 0 disables it, the default).
template <typename S>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Param<S>*> params, double lr, double clip_norm = 0.0,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), clip_norm_(clip_norm), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const Param<S>* p : params_) {
            m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
        }
    }

    void zero_grad() {
        for (Param<S>* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        if (clip_norm_ > 0.0) {
            double sq = 0.0;
            for (const Param<S>* p : params_) sq += static_cast<double>(p->grad.squaredNorm());
            const double norm = std::sqrt(sq);
            if (norm > clip_norm_) {
                const S scale = static_cast<S>(clip_norm_ / norm);
                for (Param<S>* p : params_) p->grad *= scale;
            }
        }
        const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
        const S bc1 = static_cast<S>(1.0 - std::pow(beta1_, t_));
        const S bc2 = static_cast<S>(1.0 - std::pow(beta2_, t_));
        const S lr = static_cast<S>(lr_), eps = static_cast<S>(eps_);
        for (size_t i = 0; i < params_.size(); ++i) {
            Param<S>& p = *params_[i];
            m_[i] = b1 * m_[i] + (1 - b1) * p.grad;
            v_[i] = (b2 * v_[i].array() + (1 - b2) * p.grad.array().square()).matrix();
            p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
        }
    }

    long steps_taken() const { return t_; }
    double learning_rate() const { return lr_; }
    double clip_norm() const { return clip_norm_; }

    // Serialized state, ordered as the params were registered.
    std::vector<Mat<S>>& moment1() { return m_; }
    std::vector<Mat<S>>& moment2() { return v_; }
    void set_steps_taken(long t) { t_ = t; }
    const std::vector<Param<S>*>& params() const { return params_; }

private:
    std::vector<Param<S>*> params_;
    std::vector<Mat<S>> m_, v_;
    long t_ = 0;
    double lr_ = 1e-3, clip_norm_ = 0.0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

}  // namespace vqad
