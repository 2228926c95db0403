#include "tmd/nn/graph.hpp"

#include <cmath>

#include "tmd/errors.hpp"
#include "tmd/nn/ops.hpp"

namespace tmd::nn {

LossTerms ModelGraph::loss(std::span<const Tensor> inputs, std::size_t label) const {
  Tensor l = nll_loss(forward(inputs), label);
  return {l, {l.item()}};
}

std::vector<float> ModelGraph::probabilities(std::span<const Tensor> inputs) const {
  const NoGradGuard no_grad;
  const Tensor log_probs = forward(inputs);
  std::vector<float> out(log_probs.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_probs[i]);
  return out;
}

void ModelGraph::check_inputs(std::span<const Tensor> inputs) const {
  if (inputs.size() != arity()) {
    throw ConfigError(info_.mode + ": expected " + std::to_string(arity()) + " input streams, got " +
                      std::to_string(inputs.size()));
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != info_.input_shapes[i]) {
      throw ConfigError(info_.mode + ": input " + std::to_string(i) + " has shape " +
                        shape_string(inputs[i].shape()) + ", expected " + shape_string(info_.input_shapes[i]));
    }
  }
}

}  // namespace tmd::nn
