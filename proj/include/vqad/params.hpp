#pragma once

#include <string>

#include "vqad/tensor.hpp"

namespace vqad {

/// A trainable tensor with its gradient accumulator. Names are stable and
/// used as checkpoint keys.
template <typename S>
struct Param {
    std::string name;
    Mat<S> value;
    Mat<S> grad;

    void init(std::string param_name, int rows, int cols) {
        name = std::move(param_name);
        value = Mat<S>::Zero(rows, cols);
        grad = Mat<S>::Zero(rows, cols);
    }
    void zero_grad() { grad.setZero(); }
};

}  // namespace vqad
