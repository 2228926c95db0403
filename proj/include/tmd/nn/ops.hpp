#pragma once

#include <cstddef>
#include <span>

#include "tmd/nn/tensor.hpp"

// Differentiable operations. Every op records itself on the tape when at
// least one operand requires a gradient; otherwise it is a plain
// computation with no bookkeeping.
namespace tmd::nn {

// input [C,H,W], kernels [F,C,kh,kw], bias [F] -> [F,H',W'] with
// H' = (H + 2*padding - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

// input [C,L], kernels [F,C,k], bias [F] -> [F,L'].
Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

// Non-overlapping k x k max pooling of [C,H,W]. The gradient goes to the
// first maximum in row-major order.
Tensor maxpool2d(const Tensor& input, std::size_t k);
Tensor maxpool1d(const Tensor& input, std::size_t k);

// weight [m,n], bias [m]; input holds n values (any shape).
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
Tensor exp(const Tensor& input);

// Max-subtracted; throws NumericError on non-finite scores.
Tensor softmax(const Tensor& scores);
Tensor log_softmax(const Tensor& scores);

// -log(probs[label]) and -log_probs[label] as [1] tensors.
Tensor cross_entropy(const Tensor& probs, std::size_t label);
Tensor nll_loss(const Tensor& log_probs, std::size_t label);

Tensor sum(const Tensor& input);
Tensor max(const Tensor& input);
Tensor select(const Tensor& input, std::size_t index);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& input, float factor);

Tensor reshape(const Tensor& input, Shape shape);
Tensor flatten(const Tensor& input);

// Concatenate along `axis`; all other dimensions must agree.
Tensor concat(std::span<const Tensor> inputs, std::size_t axis);

// (sum_k inputs[k]) / N, summed in order.
Tensor mean(std::span<const Tensor> inputs);
// sum_k weights[k] * inputs[k]; weights is [N].
Tensor weighted_sum(std::span<const Tensor> inputs, const Tensor& weights);
// out[c] = log sum_k exp(log_weights[k] + log_probs[k][c]); a mixture of
// distributions evaluated in log space. log_weights may contain -inf.
Tensor log_mixture(std::span<const Tensor> log_probs, const Tensor& log_weights);

// [C, ...] -> [C], averaging everything after the channel axis.
Tensor global_avg_pool(const Tensor& input);
// [C, ...] * gains[C] broadcast over the trailing axes.
Tensor channel_scale(const Tensor& input, const Tensor& gains);

}  // namespace tmd::nn
