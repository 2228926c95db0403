#include "tmd/model/baseline.hpp"

#include "tmd/errors.hpp"
#include "tmd/nn/ops.hpp"

namespace tmd::model {

nn::Shape BaselineConfig::input_shape() const {
  if (kind == InputKind::k1d) return {channels, length};
  return {channels, height, width};
}

nn::Shape BaselineConfig::feature_shape() const {
  const std::size_t total_pool = pools[0] * pools[1] * pools[2];
  if (kind == InputKind::k1d) return {conv_channels[2], length / total_pool};
  return {conv_channels[2], height / total_pool, width / total_pool};
}

std::size_t BaselineConfig::flattened_size() const { return nn::shape_size(feature_shape()); }

void BaselineConfig::validate() const {
  if (channels == 0 || n_classes == 0 || hidden == 0 || kernel == 0) {
    throw ConfigError("baseline: channels, n_classes, hidden and kernel must be positive");
  }
  if (kernel % 2 == 0) throw ConfigError("baseline: kernel must be odd for same padding, got " + std::to_string(kernel));
  for (auto c : conv_channels) {
    if (c == 0) throw ConfigError("baseline: conv channel widths must be positive");
  }
  auto check_axis = [&](std::size_t extent, const char* axis) {
    std::size_t n = extent;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      if (pools[i] == 0 || n % pools[i] != 0) {
        throw ConfigError("baseline: input " + std::string(axis) + "=" + std::to_string(extent) +
                          " not divisible by pooling chain (stage " + std::to_string(i + 1) + ": " +
                          std::to_string(n) + " % " + std::to_string(pools[i]) + ")");
      }
      n /= pools[i];
    }
  };
  if (kind == InputKind::k1d) {
    check_axis(length, "length");
  } else {
    check_axis(height, "height");
    check_axis(width, "width");
  }
}

BaselineConfig config_for_input(const nn::Shape& shape, const ModelOverrides& overrides) {
  BaselineConfig cfg;
  if (shape.size() == 2) {
    cfg.kind = InputKind::k1d;
    cfg.channels = shape[0];
    cfg.length = shape[1];
    cfg.pools = {4, 4, 5};
  } else if (shape.size() == 3) {
    cfg.kind = InputKind::k2d;
    cfg.channels = shape[0];
    cfg.height = shape[1];
    cfg.width = shape[2];
    if (shape[1] == 550 && shape[2] == 250) cfg.pools = {2, 5, 5};
  } else {
    throw ConfigError("baseline: unsupported input shape " + nn::shape_string(shape));
  }
  if (overrides.conv_channels) cfg.conv_channels = *overrides.conv_channels;
  if (overrides.kernel) cfg.kernel = *overrides.kernel;
  if (overrides.pools) cfg.pools = *overrides.pools;
  if (overrides.hidden) cfg.hidden = *overrides.hidden;
  return cfg;
}

ConvStack::ConvStack(nn::ParameterStore& store, nn::Rng& rng, const std::string& prefix, const BaselineConfig& cfg) {
  std::size_t in = cfg.channels;
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string name = prefix + "conv" + std::to_string(i + 1);
    if (cfg.kind == InputKind::k2d) {
      layers_.add<nn::Conv2dLayer>(store, rng, name, in, cfg.conv_channels[i], cfg.kernel, 1, cfg.kernel / 2);
      layers_.add<nn::ReluLayer>();
      layers_.add<nn::MaxPool2dLayer>(cfg.pools[i]);
    } else {
      layers_.add<nn::Conv1dLayer>(store, rng, name, in, cfg.conv_channels[i], cfg.kernel, 1, cfg.kernel / 2);
      layers_.add<nn::ReluLayer>();
      layers_.add<nn::MaxPool1dLayer>(cfg.pools[i]);
    }
    in = cfg.conv_channels[i];
  }
}

ClassifierHead::ClassifierHead(nn::ParameterStore& store, nn::Rng& rng, const std::string& prefix,
                               std::size_t in_features, std::size_t hidden, std::size_t n_classes) {
  layers_.add<nn::FlattenLayer>();
  layers_.add<nn::DenseLayer>(store, rng, prefix + "fc1", in_features, hidden);
  layers_.add<nn::ReluLayer>();
  layers_.add<nn::DenseLayer>(store, rng, prefix + "fc2", hidden, n_classes);
}

BaselineNetwork::BaselineNetwork(nn::ParameterStore& store, nn::Rng& rng, const std::string& prefix,
                                 const BaselineConfig& cfg)
    : trunk_(store, rng, prefix, cfg), head_(store, rng, prefix, cfg.flattened_size(), cfg.hidden, cfg.n_classes) {}

std::vector<std::string> BaselineNetwork::describe() const {
  auto out = trunk_.describe();
  auto head = head_.describe();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

BaselineGraph::BaselineGraph(const BaselineConfig& cfg, std::uint64_t seed, std::string sensor)
    : nn::ModelGraph({"baseline", {std::move(sensor)}, {cfg.input_shape()}, cfg.n_classes}), cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  net_ = std::make_unique<BaselineNetwork>(params_, rng, "", cfg_);
}

nn::Tensor BaselineGraph::forward(std::span<const nn::Tensor> inputs) const {
  check_inputs(inputs);
  return nn::log_softmax(net_->logits(inputs[0]));
}

std::unique_ptr<BaselineGraph> build_baseline_2d(const BaselineConfig& cfg, std::uint64_t seed) {
  if (cfg.kind != InputKind::k2d) throw ConfigError("build_baseline_2d: config describes a 1-D input");
  return std::make_unique<BaselineGraph>(cfg, seed);
}

std::unique_ptr<BaselineGraph> build_baseline_1d(const BaselineConfig& cfg, std::uint64_t seed) {
  if (cfg.kind != InputKind::k1d) throw ConfigError("build_baseline_1d: config describes a 2-D input");
  return std::make_unique<BaselineGraph>(cfg, seed);
}

}  // namespace tmd::model
