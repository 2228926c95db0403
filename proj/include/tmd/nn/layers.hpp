#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tmd/nn/parameter.hpp"
#include "tmd/nn/tensor.hpp"

namespace tmd::nn {

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& input) const = 0;
  // Stable textual signature used for topology comparisons.
  virtual std::string describe() const = 0;
};

class Conv2dLayer : public Layer {
 public:
  Conv2dLayer(ParameterStore& store, Rng& rng, const std::string& name, std::size_t in_channels,
              std::size_t out_channels, std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0);

  Tensor forward(const Tensor& input) const override;
  std::string describe() const override;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_, bias_;
  std::size_t in_, out_, kernel_, stride_, padding_;
};

class Conv1dLayer : public Layer {
 public:
  Conv1dLayer(ParameterStore& store, Rng& rng, const std::string& name, std::size_t in_channels,
              std::size_t out_channels, std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0);

  Tensor forward(const Tensor& input) const override;
  std::string describe() const override;

  const Tensor& weight() const { return weight_; }
  std::size_t kernel() const { return kernel_; }

 private:
  Tensor weight_, bias_;
  std::size_t in_, out_, kernel_, stride_, padding_;
};

class MaxPool2dLayer : public Layer {
 public:
  explicit MaxPool2dLayer(std::size_t k) : k_(k) {}
  Tensor forward(const Tensor& input) const override;
  std::string describe() const override;

 private:
  std::size_t k_;
};

class MaxPool1dLayer : public Layer {
 public:
  explicit MaxPool1dLayer(std::size_t k) : k_(k) {}
  Tensor forward(const Tensor& input) const override;
  std::string describe() const override;

 private:
  std::size_t k_;
};

class ReluLayer : public Layer {
 public:
  Tensor forward(const Tensor& input) const override;
  std::string describe() const override { return "relu"; }
};

class FlattenLayer : public Layer {
 public:
  Tensor forward(const Tensor& input) const override;
  std::string describe() const override { return "flatten"; }
};

class DenseLayer : public Layer {
 public:
  DenseLayer(ParameterStore& store, Rng& rng, const std::string& name, std::size_t in_features,
             std::size_t out_features);

  Tensor forward(const Tensor& input) const override;
  std::string describe() const override;

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::size_t in_features() const { return in_; }

 private:
  Tensor weight_, bias_;
  std::size_t in_, out_;
};

class Sequential {
 public:
  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& input) const;
  std::vector<std::string> describe() const;
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace tmd::nn
