#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "vqad/params.hpp"
#include "vqad/rng.hpp"
#include "vqad/tensor.hpp"

namespace vqad {

/// Learnable table of K D-dimensional embedding vectors, stored as the
/// columns of a (D, K) parameter. The gradient accumulates the
/// embedding/separatedness contributions between optimizer steps; `usage`
/// counts nearest-neighbour hits as a utilization diagnostic.
template <typename S>
struct Codebook {
    Param<S> param;
    std::vector<std::uint64_t> usage;

    Codebook() = default;
    Codebook(int dim, int size) : usage(static_cast<size_t>(size), 0) {
        param.init("codebook", dim, size);
    }

    Mat<S>& entries() { return param.value; }
    const Mat<S>& entries() const { return param.value; }
    Mat<S>& grad() { return param.grad; }
    const Mat<S>& grad() const { return param.grad; }

    int dim() const { return static_cast<int>(param.value.rows()); }
    int size() const { return static_cast<int>(param.value.cols()); }
    void zero_grad() { param.zero_grad(); }
    void reset_usage() { std::fill(usage.begin(), usage.end(), 0); }
};

enum class CodebookInit { uniform_small, data_driven };

/// Per-site retrieval result for one quantized feature map. Column p of
/// `z_q` is entries[nearest(p)] exactly; `z_n` holds the runner-up entry
/// used by the separatedness loss.
template <typename S>
struct QuantizationResult {
    Mat<S> z_e;
    Mat<S> z_q;
    Mat<S> z_n;
    VecXi nearest;
    VecXi second;

    Eigen::Index sites() const { return nearest.size(); }
};

/// Nearest- and second-nearest-entry retrieval under squared Euclidean
/// distance, ties broken toward the lower index. Columns of `features` are
/// the sites. Increments the codebook usage counters.
template <typename S>
QuantizationResult<S> quantize(const Mat<S>& features, Codebook<S>& codebook) {
    if (features.rows() != codebook.entries().rows())
        throw NumericError("quantize: feature dim " + std::to_string(features.rows()) +
                           " != codebook dim " + std::to_string(codebook.entries().rows()));
    if (codebook.size() < 2)
        throw ConfigError("quantize: codebook needs at least 2 entries");
    if (!features.allFinite())
        throw NumericError("quantize: non-finite feature values (training diverged?)");

    const Eigen::Index n = features.cols();
    const int k = codebook.size();

    QuantizationResult<S> result;
    result.z_e = features;
    result.z_q.resize(features.rows(), n);
    result.z_n.resize(features.rows(), n);
    result.nearest.resize(n);
    result.second.resize(n);

    Vec<S> dist(k);
    for (Eigen::Index p = 0; p < n; ++p) {
        dist = (codebook.entries().colwise() - features.col(p)).colwise().squaredNorm().transpose();
        int best = 0, runner = -1;
        S best_d = dist(0);
        S runner_d = std::numeric_limits<S>::infinity();
        for (int j = 1; j < k; ++j) {
            const S d = dist(j);
            if (d < best_d) {
                runner = best;
                runner_d = best_d;
                best = j;
                best_d = d;
            } else if (d < runner_d) {
                runner = j;
                runner_d = d;
            }
        }
        result.nearest(p) = best;
        result.second(p) = runner;
        result.z_q.col(p) = codebook.entries().col(best);
        result.z_n.col(p) = codebook.entries().col(runner);
        ++codebook.usage[static_cast<size_t>(best)];
    }
    return result;
}

/// Forward half of the straight-through estimator: the decoder consumes
/// z_q as-is.
template <typename S>
const Mat<S>& straight_through_forward(const QuantizationResult<S>& result) {
    return result.z_q;
}

/// Backward half: the gradient that arrived at the quantizer output is
/// handed to the encoder features unchanged; the codebook receives nothing
/// through this path.
template <typename S>
Mat<S> straight_through_backward(const Mat<S>& grad_at_output) {
    return grad_at_output;
}

/// Seeded codebook construction. `uniform_small` draws i.i.d. from
/// [-1/K, 1/K]; `data_driven` copies feature columns sampled from
/// `sample_features` (one encoder pass over a training batch).
template <typename S>
Codebook<S> codebook_init(int size, int dim, std::uint64_t seed, CodebookInit scheme,
                          const Mat<S>* sample_features = nullptr) {
    if (size < 2) throw ConfigError("codebook_init: K must be >= 2");
    if (dim < 1) throw ConfigError("codebook_init: D must be >= 1");
    Codebook<S> cb(dim, size);
    Rng rng(seed);
    if (scheme == CodebookInit::uniform_small) {
        const double bound = 1.0 / size;
        for (int j = 0; j < size; ++j)
            for (int i = 0; i < dim; ++i)
                cb.entries()(i, j) = static_cast<S>(rng.uniform(-bound, bound));
    } else {
        if (sample_features == nullptr || sample_features->cols() == 0)
            throw ConfigError("codebook_init: data_driven scheme needs sample features");
        if (sample_features->rows() != dim)
            throw ConfigError("codebook_init: sample feature dim mismatch");
        const Eigen::Index avail = sample_features->cols();
        for (int j = 0; j < size; ++j) {
            const Eigen::Index pick = rng.uniform_int(0, avail - 1);
            cb.entries().col(j) = sample_features->col(pick);
        }
    }
    return cb;
}

}  // namespace vqad
