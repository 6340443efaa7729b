#pragma once

#include <vector>

#include "vgcnfuse/tensor.hpp"

namespace vgcnfuse {

// mean over the batch of w[y] * (-log softmax(logits)[y])
template <typename S>
Tensor<S> weighted_cross_entropy(const Tensor<S>& logits, const std::vector<int32_t>& labels,
                                 const std::vector<double>& class_weights) {
  if (logits.ndim() != 2) throw ShapeMismatch("weighted_cross_entropy expects [m, C] logits");
  if (!class_weights.empty() &&
      static_cast<long>(class_weights.size()) != logits.dim(1))
    throw ShapeMismatch("class weight count vs classes");
  Tensor<S> lsm = log_softmax(logits, 1);
  return nll_gather(lsm, labels, class_weights);
}

// mean over all batch*class entries of (softmax(logits) - target)^2;
// targets are probability rows
template <typename S>
Tensor<S> mse_soft(const Tensor<S>& logits, const Tensor<S>& soft_targets) {
  if (logits.ndim() != 2 || soft_targets.ndim() != 2 ||
      logits.shape() != soft_targets.shape())
    throw ShapeMismatch("mse_soft: " + shape_str(logits.shape()) + " vs " +
                        shape_str(soft_targets.shape()));
  Tensor<S> diff = sub(softmax(logits, 1), soft_targets);
  return scale(sum_all(mul(diff, diff)), 1.0 / static_cast<double>(logits.numel()));
}

}  // namespace vgcnfuse
