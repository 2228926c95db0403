#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tmd/nn/graph.hpp"
#include "tmd/nn/layers.hpp"

namespace tmd::model {

enum class InputKind { k1d, k2d };

// Single-sensor CNN: three conv -> relu -> maxpool stages, flatten, two
// dense layers. Convolutions are "same"-padded so only pooling shrinks the
// input.
struct BaselineConfig {
  InputKind kind = InputKind::k2d;
  std::size_t channels = 1;
  std::size_t height = 48;  // 2-D only
  std::size_t width = 48;   // 2-D only
  std::size_t length = 6000;  // 1-D only
  std::size_t n_classes = 8;
  std::array<std::size_t, 3> conv_channels{32, 64, 128};
  std::size_t kernel = 3;
  std::array<std::size_t, 3> pools{2, 2, 2};
  std::size_t hidden = 128;

  nn::Shape input_shape() const;
  // Shape leaving the last pooling stage.
  nn::Shape feature_shape() const;
  std::size_t flattened_size() const;
  // Throws ConfigError naming the offending dimension.
  void validate() const;
};

// Optional replacements for the architecture widths; unset fields keep
// the defaults.
struct ModelOverrides {
  std::optional<std::array<std::size_t, 3>> conv_channels;
  std::optional<std::size_t> kernel;
  std::optional<std::array<std::size_t, 3>> pools;
  std::optional<std::size_t> hidden;

  bool empty() const { return !conv_channels && !kernel && !pools && !hidden; }
};

// Default configuration for a single-stream input: [1,48,48] and other
// 2-D inputs pool 2/2/2, [1,550,250] pools 2/5/5, [C,L] inputs are 1-D with
// pools 4/4/5.
BaselineConfig config_for_input(const nn::Shape& shape, const ModelOverrides& overrides = {});

class ConvStack {
 public:
  ConvStack(nn::ParameterStore& store, nn::Rng& rng, const std::string& prefix, const BaselineConfig& cfg);
  nn::Tensor forward(const nn::Tensor& input) const { return layers_.forward(input); }
  std::vector<std::string> describe() const { return layers_.describe(); }
  const nn::Sequential& layers() const { return layers_; }

 private:
  nn::Sequential layers_;
};

class ClassifierHead {
 public:
  ClassifierHead(nn::ParameterStore& store, nn::Rng& rng, const std::string& prefix, std::size_t in_features,
                 std::size_t hidden, std::size_t n_classes);
  // Unnormalized class scores.
  nn::Tensor forward(const nn::Tensor& features) const { return layers_.forward(features); }
  std::vector<std::string> describe() const { return layers_.describe(); }
  const nn::Sequential& layers() const { return layers_; }

 private:
  nn::Sequential layers_;
};

class BaselineNetwork {
 public:
  BaselineNetwork(nn::ParameterStore& store, nn::Rng& rng, const std::string& prefix, const BaselineConfig& cfg);

  nn::Tensor logits(const nn::Tensor& input) const { return head_.forward(trunk_.forward(input)); }
  std::vector<std::string> describe() const;
  const ConvStack& trunk() const { return trunk_; }
  const ClassifierHead& head() const { return head_; }

 private:
  ConvStack trunk_;
  ClassifierHead head_;
};

class BaselineGraph : public nn::ModelGraph {
 public:
  BaselineGraph(const BaselineConfig& cfg, std::uint64_t seed, std::string sensor = "input");

  nn::Tensor forward(std::span<const nn::Tensor> inputs) const override;
  std::vector<std::string> topology() const override { return net_->describe(); }

  nn::Tensor logits(const nn::Tensor& input) const { return net_->logits(input); }
  const BaselineConfig& config() const { return cfg_; }
  const BaselineNetwork& network() const { return *net_; }

 private:
  BaselineConfig cfg_;
  std::unique_ptr<BaselineNetwork> net_;
};

std::unique_ptr<BaselineGraph> build_baseline_2d(const BaselineConfig& cfg, std::uint64_t seed);
std::unique_ptr<BaselineGraph> build_baseline_1d(const BaselineConfig& cfg, std::uint64_t seed);

}  // namespace tmd::model
