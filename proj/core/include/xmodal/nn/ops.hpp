#pragma once

#include <functional>
#include <span>
#include <vector>

#include "xmodal/losses.hpp"
#include "xmodal/nn/tensor.hpp"

namespace xmodal::nn {

/// Zero-padded 2D convolution. weight [out, in, k, k], bias [1, out, 1, 1].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);

Tensor max_pool2(const Tensor& x);
Tensor upsample_nearest2(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, float slope);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
/// (1 - t) * a + t * b.
Tensor lerp(const Tensor& a, const Tensor& b, float t);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Per-sample, per-channel normalisation to zero mean and unit variance.
Tensor instance_norm(const Tensor& x, float eps = 1e-5F);

/// Scalar objective evaluated outside the graph: `fn` receives the values of
/// x and returns the loss together with d loss / d x.
using ExternalLoss = std::function<LossGrad(std::span<const float>)>;
Tensor external_loss(const Tensor& x, const ExternalLoss& fn);

/// Scalar objective of two tensors; `fn` returns the value and both gradients.
struct PairLossGrad {
  double value = 0.0;
  std::vector<double> grad_a;
  std::vector<double> grad_b;
};
using ExternalPairLoss = std::function<PairLossGrad(std::span<const float>, std::span<const float>)>;
Tensor external_loss(const Tensor& a, const Tensor& b, const ExternalPairLoss& fn);

/// sum_i weights[i] * scalars[i] over single-element tensors.
Tensor weighted_sum(const std::vector<Tensor>& scalars, const std::vector<double>& weights);

}  // namespace xmodal::nn
