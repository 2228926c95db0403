#include "tmd/nn/layers.hpp"

#include "tmd/nn/ops.hpp"

namespace tmd::nn {

Conv2dLayer::Conv2dLayer(ParameterStore& store, Rng& rng, const std::string& name, std::size_t in_channels,
                         std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
  const std::size_t fan_in = in_channels * kernel * kernel;
  weight_ = store.create(name + ".weight", {out_channels, in_channels, kernel, kernel},
                         he_uniform(out_channels * fan_in, fan_in, rng));
  bias_ = store.create(name + ".bias", {out_channels}, std::vector<float>(out_channels, 0.0f));
}

Tensor Conv2dLayer::forward(const Tensor& input) const { return conv2d(input, weight_, bias_, stride_, padding_); }

std::string Conv2dLayer::describe() const {
  return "conv2d(" + std::to_string(in_) + "->" + std::to_string(out_) + ",k" + std::to_string(kernel_) + "x" +
         std::to_string(kernel_) + ",s" + std::to_string(stride_) + ",p" + std::to_string(padding_) + ")";
}

Conv1dLayer::Conv1dLayer(ParameterStore& store, Rng& rng, const std::string& name, std::size_t in_channels,
                         std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
  const std::size_t fan_in = in_channels * kernel;
  weight_ = store.create(name + ".weight", {out_channels, in_channels, kernel},
                         he_uniform(out_channels * fan_in, fan_in, rng));
  bias_ = store.create(name + ".bias", {out_channels}, std::vector<float>(out_channels, 0.0f));
}

Tensor Conv1dLayer::forward(const Tensor& input) const { return conv1d(input, weight_, bias_, stride_, padding_); }

std::string Conv1dLayer::describe() const {
  return "conv1d(" + std::to_string(in_) + "->" + std::to_string(out_) + ",k" + std::to_string(kernel_) + ",s" +
         std::to_string(stride_) + ",p" + std::to_string(padding_) + ")";
}

Tensor MaxPool2dLayer::forward(const Tensor& input) const { return maxpool2d(input, k_); }
std::string MaxPool2dLayer::describe() const { return "maxpool2d(" + std::to_string(k_) + ")"; }

Tensor MaxPool1dLayer::forward(const Tensor& input) const { return maxpool1d(input, k_); }
std::string MaxPool1dLayer::describe() const { return "maxpool1d(" + std::to_string(k_) + ")"; }

Tensor ReluLayer::forward(const Tensor& input) const { return relu(input); }

Tensor FlattenLayer::forward(const Tensor& input) const { return flatten(input); }

DenseLayer::DenseLayer(ParameterStore& store, Rng& rng, const std::string& name, std::size_t in_features,
                       std::size_t out_features)
    : in_(in_features), out_(out_features) {
  weight_ = store.create(name + ".weight", {out_features, in_features},
                         xavier_uniform(out_features * in_features, in_features, out_features, rng));
  bias_ = store.create(name + ".bias", {out_features}, std::vector<float>(out_features, 0.0f));
}

Tensor DenseLayer::forward(const Tensor& input) const { return dense(input, weight_, bias_); }

std::string DenseLayer::describe() const {
  return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

Tensor Sequential::forward(const Tensor& input) const {
  Tensor x = input;
  for (const auto& layer : layers_) x = layer->forward(x);
  return x;
}

std::vector<std::string> Sequential::describe() const {
  std::vector<std::string> out;
  out.reserve(layers_.size());
  for (const auto& layer : layers_) out.push_back(layer->describe());
  return out;
}

}  // namespace tmd::nn
